//! Start and finish times of robots sharing a resource that serves one robot at a time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::CalibratedRule;
use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::order::Order;
use crate::order_rank::{enumerate_likely_orders, OrderEnumeration, OrderProbability, RankingMode};
use crate::scalar::Scalar;
use crate::truncation::condition_on_order;

/// Orders less likely than this may fall back to unconditioned arrivals when
/// conditioning on them fails.
pub const NEGLIGIBLE_ORDER_PROBABILITY: f64 = 1e-9;

/// A robot's arrival at the resource and how long it occupies it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalProcess<T = f64> {
    pub robot_id: usize,
    pub arrival: Gaussian<T>,
    pub duration: Gaussian<T>,
}

impl<T: Scalar> ArrivalProcess<T> {
    pub fn new(robot_id: usize, arrival: Gaussian<T>, duration: Gaussian<T>) -> Self {
        Self {
            robot_id,
            arrival,
            duration,
        }
    }
}

/// Start and finish of every robot under one service order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderBranch<T = f64> {
    pub order: Order,
    /// Normalized weight of the branch in the aggregate.
    pub weight: T,
    pub start: Vec<Gaussian<T>>,
    pub finish: Vec<Gaussian<T>>,
    /// Conditioning failed on this improbable order and the raw arrivals were used.
    pub unconditioned: bool,
}

/// Per-robot start and finish distributions, indexed like the input processes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineResult<T = f64> {
    pub start: Vec<Gaussian<T>>,
    pub finish: Vec<Gaussian<T>>,
    pub branches: Vec<OrderBranch<T>>,
    /// Probability mass of the orders considered, before renormalization.
    pub mass: T,
}

impl<T: Scalar> TimelineResult<T> {
    pub fn orders_considered(&self) -> usize {
        self.branches.len()
    }

    /// Number of branches that fell back to unconditioned arrivals.
    pub fn unconditioned_branches(&self) -> usize {
        self.branches.iter().filter(|b| b.unconditioned).count()
    }
}

fn serve_in_order<T: Scalar>(
    arrivals: &[Gaussian<T>],
    durations: &[Gaussian<T>],
    order: &Order,
) -> (Vec<Gaussian<T>>, Vec<Gaussian<T>>) {
    let mut start = arrivals.to_vec();
    let mut finish = arrivals.to_vec();
    let mut prev: Option<Gaussian<T>> = None;
    for &r in order.sequence() {
        let s = match prev {
            None => arrivals[r],
            Some(f) => f.clark_max(&arrivals[r]),
        };
        start[r] = s;
        finish[r] = s + durations[r];
        prev = Some(finish[r]);
    }
    (start, finish)
}

/// Serves the robots in the given order: each starts at the later of its
/// arrival and the previous robot's finish.
pub fn propagate_specified<T: Scalar>(
    processes: &[ArrivalProcess<T>],
    order: &Order,
) -> Result<TimelineResult<T>> {
    order.check_len(processes.len())?;
    let arrivals: Vec<_> = processes.iter().map(|p| p.arrival).collect();
    let durations: Vec<_> = processes.iter().map(|p| p.duration).collect();
    let (start, finish) = serve_in_order(&arrivals, &durations, order);
    Ok(TimelineResult {
        start: start.clone(),
        finish: finish.clone(),
        branches: vec![OrderBranch {
            order: order.clone().with_probability(1.0),
            weight: T::one(),
            start,
            finish,
            unconditioned: false,
        }],
        mass: T::one(),
    })
}

/// First-come first-served service over the enumerated arrival orders.
///
/// Each order contributes a branch in which the arrivals are conditioned on
/// that order and then served in it. Branch weights are the order
/// probabilities renormalized over the enumeration, and every robot's start
/// and finish are moment-matched mixtures of its branch distributions.
///
/// A branch whose conditioning fails keeps the unconditioned arrivals (and is
/// flagged) when its probability is below [`NEGLIGIBLE_ORDER_PROBABILITY`] or
/// the failure is a negligible-probability condition; other failures are
/// returned.
pub fn propagate_fifo(
    processes: &[ArrivalProcess],
    orders: &OrderEnumeration,
    rule: &CalibratedRule,
) -> Result<TimelineResult> {
    if orders.is_empty() {
        return Err(Error::Empty);
    }
    let arrivals: Vec<_> = processes.iter().map(|p| p.arrival).collect();
    let durations: Vec<_> = processes.iter().map(|p| p.duration).collect();
    let weights: Vec<f64> = orders
        .orders
        .iter()
        .map(|o| o.probability.unwrap_or(0.0))
        .collect();
    let mass: f64 = weights.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::InvalidParameter(
            "enumerated orders carry no probability".into(),
        ));
    }

    let branches: Vec<Result<OrderBranch>> = orders
        .orders
        .par_iter()
        .zip(weights.par_iter())
        .map(|(order, &w)| {
            order.check_len(processes.len())?;
            let (conditioned, unconditioned) = match condition_on_order(&arrivals, order, rule) {
                Ok(c) => (c, false),
                // The failed condition itself shows the order is negligible,
                // whatever weight an estimated probability gave it.
                Err(Error::NegligibleProbability { .. }) => (arrivals.clone(), true),
                Err(_) if w < NEGLIGIBLE_ORDER_PROBABILITY => (arrivals.clone(), true),
                Err(e) => return Err(e),
            };
            let (start, finish) = serve_in_order(&conditioned, &durations, order);
            Ok(OrderBranch {
                order: order.clone(),
                weight: w / mass,
                start,
                finish,
                unconditioned,
            })
        })
        .collect();
    let branches = branches.into_iter().collect::<Result<Vec<_>>>()?;

    let n = processes.len();
    let aggregate = |pick: fn(&OrderBranch) -> &Vec<Gaussian>| -> Result<Vec<Gaussian>> {
        (0..n)
            .map(|r| Gaussian::mixture(branches.iter().map(|b| (b.weight, pick(b)[r]))))
            .collect()
    };
    Ok(TimelineResult {
        start: aggregate(|b| &b.start)?,
        finish: aggregate(|b| &b.finish)?,
        branches,
        mass,
    })
}

/// Enumerates the likely arrival orders and propagates first-come first-served service over them.
pub fn fifo_timeline(
    processes: &[ArrivalProcess],
    phi: f64,
    prob: &impl OrderProbability,
    mode: RankingMode,
    rule: &CalibratedRule,
) -> Result<TimelineResult> {
    let arrivals: Vec<_> = processes.iter().map(|p| p.arrival).collect();
    let orders = enumerate_likely_orders(&arrivals, phi, prob, mode)?;
    propagate_fifo(processes, &orders, rule)
}
