//! Ranking arrival orders by likelihood.
//!
//! With equal arrival spreads the order of ascending means is the most likely
//! one, and the k-th most likely order is one adjacent swap away from one of
//! the k − 1 more likely orders. [`enumerate_likely_orders`] exploits this to
//! list orders in descending probability without visiting all `n!` of them.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::order::Order;
use crate::order_prob::{estimate_order_probability, order_probability_estimate};
use crate::orthant::OrthantOptions;
use crate::scalar::Scalar;

/// Relative tolerance on standard deviations for them to count as equal.
pub const EQUAL_SPREAD_TOLERANCE: f64 = 1e-9;

/// Whether the ranking guarantees are required or waived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RankingMode {
    /// Arrivals must share one standard deviation.
    #[default]
    Strict,
    /// Any spreads accepted; the output is best effort.
    Heuristic,
}

/// True when all arrivals share one standard deviation within [`EQUAL_SPREAD_TOLERANCE`].
pub fn has_equal_spread<T: Scalar>(arrivals: &[Gaussian<T>]) -> bool {
    let sds = arrivals.iter().map(|g| g.std_dev());
    let (lo, hi) = sds.fold((T::infinity(), T::zero()), |(lo, hi), s| {
        (lo.min(s), hi.max(s))
    });
    arrivals.is_empty() || hi - lo <= T::lit(EQUAL_SPREAD_TOLERANCE) * hi
}

/// Robots sorted by ascending mean arrival, ties broken by index.
pub fn most_likely_order<T: Scalar>(arrivals: &[Gaussian<T>], mode: RankingMode) -> Result<Order> {
    if mode == RankingMode::Strict && !has_equal_spread(arrivals) {
        return Err(Error::UnequalSpread);
    }
    let mut seq: Vec<usize> = (0..arrivals.len()).collect();
    seq.sort_by(|&a, &b| {
        arrivals[a]
            .mean
            .partial_cmp(&arrivals[b].mean)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    Order::new(seq)
}

/// Source of order probabilities for the enumeration.
pub trait OrderProbability: Sync {
    fn probability(&self, arrivals: &[Gaussian], order: &Order) -> Result<f64>;
}

/// The two built-in probability sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbabilityBackend {
    /// Orthant integration.
    Exact { options: OrthantOptions, seed: u64 },
    /// Product of successive pairwise probabilities.
    Estimate,
}

impl ProbabilityBackend {
    pub fn exact(seed: u64) -> Self {
        Self::Exact {
            options: OrthantOptions::default(),
            seed,
        }
    }
}

impl OrderProbability for ProbabilityBackend {
    fn probability(&self, arrivals: &[Gaussian], order: &Order) -> Result<f64> {
        match self {
            Self::Exact { options, seed } => {
                Ok(order_probability_estimate(arrivals, order, options, *seed)?.probability)
            }
            Self::Estimate => estimate_order_probability(arrivals, order),
        }
    }
}

impl<F> OrderProbability for F
where
    F: Fn(&[Gaussian], &Order) -> Result<f64> + Sync,
{
    fn probability(&self, arrivals: &[Gaussian], order: &Order) -> Result<f64> {
        self(arrivals, order)
    }
}

/// Orders in descending probability covering at least `threshold` of the mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEnumeration {
    /// Every entry carries its probability.
    pub orders: Vec<Order>,
    pub mass: f64,
    pub threshold: f64,
    /// Set when the spreads were unequal and the ranking is best effort.
    pub heuristic: bool,
}

impl OrderEnumeration {
    /// A single order carrying all of the mass.
    pub fn forced(order: Order) -> Self {
        Self {
            orders: vec![order.with_probability(1.0)],
            mass: 1.0,
            threshold: 1.0,
            heuristic: false,
        }
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }
}

struct Candidate {
    probability: f64,
    order: Order,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Max-heap: higher probability first, then lexicographically smaller sequence.
    fn cmp(&self, other: &Self) -> Ordering {
        self.probability
            .total_cmp(&other.probability)
            .then_with(|| other.order.sequence().cmp(self.order.sequence()))
    }
}

/// Lists the most likely arrival orders until their total probability reaches `phi`.
///
/// Starting from the most likely order, the most probable order not yet
/// listed is repeatedly taken from the frontier, appended to the output, and
/// its unvisited adjacent-swap neighbours are added to the frontier. Stops
/// once the listed mass reaches `phi`; `phi = 1` lists every order.
pub fn enumerate_likely_orders(
    arrivals: &[Gaussian],
    phi: f64,
    prob: &impl OrderProbability,
    mode: RankingMode,
) -> Result<OrderEnumeration> {
    if !(phi > 0.0 && phi <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "probability threshold {phi} is outside (0, 1]"
        )));
    }
    let heuristic = !has_equal_spread(arrivals);
    let start = most_likely_order(arrivals, mode)?;
    let p0 = prob.probability(arrivals, &start)?;

    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    visited.insert(start.sequence().to_vec());
    let mut frontier = BinaryHeap::new();
    frontier.push(Candidate {
        probability: p0,
        order: start,
    });

    let mut orders = Vec::new();
    let mut mass = 0.0;
    while let Some(Candidate { probability, order }) = frontier.pop() {
        mass += probability;
        let fresh: Vec<Order> = order
            .neighbors()
            .into_iter()
            .filter(|o| visited.insert(o.sequence().to_vec()))
            .collect();
        orders.push(order.with_probability(probability));
        if phi < 1.0 && mass >= phi {
            break;
        }
        let scored: Vec<Result<Candidate>> = fresh
            .into_par_iter()
            .map(|o| {
                Ok(Candidate {
                    probability: prob.probability(arrivals, &o)?,
                    order: o,
                })
            })
            .collect();
        for c in scored {
            frontier.push(c?);
        }
    }
    Ok(OrderEnumeration {
        orders,
        mass,
        threshold: phi,
        heuristic,
    })
}
