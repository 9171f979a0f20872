//! Task allocation under timing uncertainty.
//!
//! Two problem shapes are supported:
//!
//! * [`Scenario1Spec`]: several robot types each build part of a structure at
//!   every location, in a fixed type order per location. One robot of each type
//!   goes to each location, and the cost is the expected tardiness of the
//!   overall completion. Solved by [`exhaustive_search`].
//! * [`Scenario2Spec`]: controlled robots each collect one package at a
//!   location that is also visited by uncontrolled robots, first come first
//!   served, then deliver it against a deadline. Solved by
//!   [`scenario2_cost_matrix`] and [`hungarian_assign`].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::CalibratedRule;
use crate::contention::{fifo_timeline, propagate_specified, ArrivalProcess};
use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::mc::{draw, sample_moments, Moments};
use crate::order::{all_orders, Order};
use crate::order_rank::{ProbabilityBackend, RankingMode};
use crate::orthant::OrthantOptions;

/// How a candidate allocation is costed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method {
    /// Means only.
    Deterministic,
    /// Average over this many sampled realizations.
    MonteCarlo { samples: usize },
    /// Analytical propagation; arrival orders up to probability mass `phi`.
    Analytical { phi: f64 },
    /// Analytical propagation with estimated order probabilities.
    AnalyticalEstimate { phi: f64 },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Deterministic => write!(f, "D"),
            Method::MonteCarlo { samples } => write!(f, "M({samples})"),
            Method::Analytical { phi } => write!(f, "A({phi})"),
            Method::AnalyticalEstimate { phi } if *phi == 1.0 => write!(f, "AEst"),
            Method::AnalyticalEstimate { phi } => write!(f, "AEst({phi})"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts `D`, `M(k)`, `A`, `A(phi)`, `AEst` and `AEst(phi)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidParameter(format!("unknown method tag {s:?}"));
        let (name, arg) = match s.find('(') {
            Some(i) if s.ends_with(')') => (&s[..i], Some(&s[i + 1..s.len() - 1])),
            Some(_) => return Err(bad()),
            None => (s, None),
        };
        let phi = |a: Option<&str>| -> Result<f64> {
            let v = a.map_or(Ok(1.0), |a| a.trim().parse::<f64>().map_err(|_| bad()))?;
            if v > 0.0 && v <= 1.0 {
                Ok(v)
            } else {
                Err(bad())
            }
        };
        match name {
            "D" if arg.is_none() => Ok(Method::Deterministic),
            "M" => {
                let samples = arg
                    .ok_or_else(bad)?
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| bad())?;
                if samples == 0 {
                    return Err(bad());
                }
                Ok(Method::MonteCarlo { samples })
            }
            "A" => Ok(Method::Analytical { phi: phi(arg)? }),
            "AEst" => Ok(Method::AnalyticalEstimate { phi: phi(arg)? }),
            _ => Err(bad()),
        }
    }
}

/// Inclusive range for uniformly drawn parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{name} range [{}, {}] is invalid",
                self.lo, self.hi
            )))
        }
    }

    fn validate_spread(&self, name: &str) -> Result<()> {
        self.validate(name)?;
        if self.lo < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{name} must not be negative"
            )));
        }
        Ok(())
    }
}

fn gaussian(rng: &mut impl Rng, mean: &Range, sd: &Range) -> Gaussian {
    let m = mean.sample(rng);
    let s = sd.sample(rng);
    Gaussian::from_std(m, s).expect("validated ranges give finite parameters")
}

// ---------------------------------------------------------------------------
// Scenario 1

/// Generation parameters for [`Scenario1Spec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario1Params {
    pub types: usize,
    pub locations: usize,
    pub travel_mean: Range,
    pub travel_sd: Range,
    pub task_mean: Range,
    pub task_sd: Range,
    pub deadline: Range,
}

impl Default for Scenario1Params {
    /// Four types of four robots each, building at four locations.
    fn default() -> Self {
        Self {
            types: 4,
            locations: 4,
            travel_mean: Range::new(5.0, 20.0),
            travel_sd: Range::new(0.5, 4.0),
            task_mean: Range::new(2.0, 6.0),
            task_sd: Range::new(0.2, 2.0),
            deadline: Range::new(28.0, 38.0),
        }
    }
}

impl Scenario1Params {
    pub fn validate(&self) -> Result<()> {
        if !(1..=6).contains(&self.types) || !(1..=6).contains(&self.locations) {
            return Err(Error::InvalidParameter(
                "types and locations must be between 1 and 6".into(),
            ));
        }
        self.travel_mean.validate("travel mean")?;
        self.travel_sd.validate_spread("travel sd")?;
        self.task_mean.validate("task mean")?;
        self.task_sd.validate_spread("task sd")?;
        self.deadline.validate("deadline")
    }
}

/// Robots of several types, one of each type per location.
///
/// Robot `t * locations + k` is the `k`-th robot of type `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario1Spec {
    pub types: usize,
    pub locations: usize,
    /// Travel time of every robot to every location, `travel[robot][location]`.
    pub travel: Vec<Vec<Gaussian>>,
    /// Task duration of every robot.
    pub task: Vec<Gaussian>,
    /// Order in which the types work at each location.
    pub type_order: Vec<usize>,
    pub deadline: f64,
}

/// For every type, the robot (index within the type) sent to each location.
pub type Scenario1Assignment = Vec<Vec<usize>>;

impl Scenario1Spec {
    pub fn generate(params: &Scenario1Params, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let robots = params.types * params.locations;
        let travel = (0..robots)
            .map(|_| {
                (0..params.locations)
                    .map(|_| gaussian(&mut rng, &params.travel_mean, &params.travel_sd))
                    .collect()
            })
            .collect();
        let task = (0..robots)
            .map(|_| gaussian(&mut rng, &params.task_mean, &params.task_sd))
            .collect();
        let deadline = params.deadline.sample(&mut rng);
        Ok(Self {
            types: params.types,
            locations: params.locations,
            travel,
            task,
            type_order: (0..params.types).collect(),
            deadline,
        })
    }

    pub fn robots(&self) -> usize {
        self.types * self.locations
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.robots();
        if self.travel.len() != r
            || self.task.len() != r
            || self.travel.iter().any(|t| t.len() != self.locations)
        {
            return Err(Error::InvalidParameter(
                "scenario dimensions are inconsistent".into(),
            ));
        }
        Order::new(self.type_order.clone())?.check_len(self.types)?;
        if !self.deadline.is_finite() {
            return Err(Error::InvalidParameter("deadline must be finite".into()));
        }
        Ok(())
    }

    fn check_assignment(&self, a: &Scenario1Assignment) -> Result<()> {
        if a.len() != self.types {
            return Err(Error::InvalidParameter(
                "assignment needs one permutation per type".into(),
            ));
        }
        for perm in a {
            Order::new(perm.clone())?.check_len(self.locations)?;
        }
        Ok(())
    }

    /// Robot working at `location` for `type_`.
    #[inline]
    fn robot(&self, a: &Scenario1Assignment, type_: usize, location: usize) -> usize {
        type_ * self.locations + a[type_][location]
    }

    /// Location of every robot under `a`.
    pub fn robot_locations(&self, a: &Scenario1Assignment) -> Vec<usize> {
        let mut out = vec![0; self.robots()];
        for t in 0..self.types {
            for l in 0..self.locations {
                out[self.robot(a, t, l)] = l;
            }
        }
        out
    }
}

/// Completion time of a realization (a value per robot for travel to its
/// location and for its task).
fn scenario1_realized_completion(
    spec: &Scenario1Spec,
    a: &Scenario1Assignment,
    travel: impl Fn(usize, usize) -> f64,
    task: impl Fn(usize) -> f64,
) -> f64 {
    let mut completion = f64::NEG_INFINITY;
    for l in 0..spec.locations {
        let mut free_at = f64::NEG_INFINITY;
        for &t in &spec.type_order {
            let r = spec.robot(a, t, l);
            free_at = travel(r, l).max(free_at) + task(r);
        }
        completion = completion.max(free_at);
    }
    completion
}

fn scenario1_analytical(
    spec: &Scenario1Spec,
    a: &Scenario1Assignment,
    means_only: bool,
) -> Result<f64> {
    let order = Order::identity(spec.types);
    let mut finishes = Vec::with_capacity(spec.locations);
    for l in 0..spec.locations {
        let processes: Vec<ArrivalProcess> = spec
            .type_order
            .iter()
            .map(|&t| {
                let r = spec.robot(a, t, l);
                let (arr, dur) = (spec.travel[r][l], spec.task[r]);
                if means_only {
                    ArrivalProcess::new(r, arr.mean_only(), dur.mean_only())
                } else {
                    ArrivalProcess::new(r, arr, dur)
                }
            })
            .collect();
        let timeline = propagate_specified(&processes, &order)?;
        finishes.push(*timeline.finish.last().expect("at least one type"));
    }
    Ok(Gaussian::clark_max_n(&finishes)?.expected_tardiness(spec.deadline))
}

/// Pre-drawn realizations shared by every candidate allocation.
struct Scenario1Bank {
    travel: Vec<Vec<f64>>,
    task: Vec<Vec<f64>>,
}

impl Scenario1Bank {
    fn new(spec: &Scenario1Spec, samples: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut travel = Vec::with_capacity(samples);
        let mut task = Vec::with_capacity(samples);
        for _ in 0..samples {
            let mut tr = Vec::with_capacity(spec.robots() * spec.locations);
            let mut ta = Vec::with_capacity(spec.robots());
            for r in 0..spec.robots() {
                for l in 0..spec.locations {
                    tr.push(draw(&mut rng, &spec.travel[r][l]));
                }
                ta.push(draw(&mut rng, &spec.task[r]));
            }
            travel.push(tr);
            task.push(ta);
        }
        Self { travel, task }
    }

    fn cost(&self, spec: &Scenario1Spec, a: &Scenario1Assignment) -> f64 {
        let total: f64 = self
            .travel
            .iter()
            .zip(&self.task)
            .map(|(tr, ta)| {
                let t = scenario1_realized_completion(
                    spec,
                    a,
                    |r, l| tr[r * spec.locations + l],
                    |r| ta[r],
                );
                (t - spec.deadline).max(0.0)
            })
            .sum();
        total / self.travel.len() as f64
    }
}

enum Scenario1Evaluator {
    Analytical { means_only: bool },
    Sampled(Scenario1Bank),
}

impl Scenario1Evaluator {
    fn new(spec: &Scenario1Spec, method: Method, seed: u64) -> Self {
        match method {
            Method::Deterministic => Self::Analytical { means_only: true },
            Method::MonteCarlo { samples } => {
                Self::Sampled(Scenario1Bank::new(spec, samples, seed))
            }
            Method::Analytical { .. } | Method::AnalyticalEstimate { .. } => {
                Self::Analytical { means_only: false }
            }
        }
    }

    fn cost(&self, spec: &Scenario1Spec, a: &Scenario1Assignment) -> Result<f64> {
        match self {
            Self::Analytical { means_only } => scenario1_analytical(spec, a, *means_only),
            Self::Sampled(bank) => Ok(bank.cost(spec, a)),
        }
    }
}

/// Predicted expected tardiness of the overall completion under `method`.
///
/// Sampling methods draw their realizations from `seed`.
pub fn scenario1_cost(
    spec: &Scenario1Spec,
    assignment: &Scenario1Assignment,
    method: Method,
    seed: u64,
) -> Result<f64> {
    spec.validate()?;
    spec.check_assignment(assignment)?;
    Scenario1Evaluator::new(spec, method, seed).cost(spec, assignment)
}

/// Monte Carlo estimate of the true expected tardiness of an allocation.
pub fn scenario1_ground_truth(
    spec: &Scenario1Spec,
    assignment: &Scenario1Assignment,
    samples: u64,
    seed: u64,
) -> Result<Moments> {
    spec.validate()?;
    spec.check_assignment(assignment)?;
    Ok(sample_moments(samples, seed, |rng| {
        // Draw every location's robots in type order, locations ascending.
        let mut travel = vec![0.0; spec.robots()];
        let mut task = vec![0.0; spec.robots()];
        for l in 0..spec.locations {
            for &t in &spec.type_order {
                let r = spec.robot(assignment, t, l);
                travel[r] = draw(rng, &spec.travel[r][l]);
                task[r] = draw(rng, &spec.task[r]);
            }
        }
        let t = scenario1_realized_completion(spec, assignment, |r, _| travel[r], |r| task[r]);
        (t - spec.deadline).max(0.0)
    }))
}

/// Outcome of an allocation method on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    /// Location (or package) of every controlled robot.
    pub assignment: Vec<usize>,
    pub predicted_cost: f64,
    pub method: Method,
    /// Seconds spent choosing the allocation.
    pub wall_time: f64,
    /// Monte Carlo estimate of the allocation's true cost.
    pub ground_truth: Option<f64>,
}

/// Searches every allocation for the one with the lowest predicted cost.
///
/// Allocations are visited in lexicographic order of their per-type
/// permutations and the first minimum wins. Sampling methods share one set of
/// realizations across all candidates.
pub fn exhaustive_search(
    spec: &Scenario1Spec,
    method: Method,
    seed: u64,
) -> Result<(Scenario1Assignment, f64)> {
    spec.validate()?;
    let perms: Vec<Vec<usize>> = all_orders(spec.locations)
        .into_iter()
        .map(|o| o.sequence().to_vec())
        .collect();
    let evaluator = Scenario1Evaluator::new(spec, method, seed);
    let total = perms.len().pow(spec.types as u32);

    // Chunks are searched in parallel and reduced in order.
    let chunk = perms.len().max(1);
    let best = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|c| -> Result<Option<(usize, f64)>> {
            let mut best: Option<(usize, f64)> = None;
            for idx in c * chunk..((c + 1) * chunk).min(total) {
                let a = decode_assignment(idx, &perms, spec.types);
                let cost = evaluator.cost(spec, &a)?;
                if best.is_none_or(|(_, b)| cost < b) {
                    best = Some((idx, cost));
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<(usize, f64)>, (i, c)| match acc {
            Some((_, b)) if b <= c => acc,
            _ => Some((i, c)),
        })
        .ok_or(Error::Empty)?;
    Ok((decode_assignment(best.0, &perms, spec.types), best.1))
}

// Index in lexicographic order over (type 0 permutation, type 1 permutation, ...).
fn decode_assignment(mut idx: usize, perms: &[Vec<usize>], types: usize) -> Scenario1Assignment {
    let mut out = vec![Vec::new(); types];
    for t in (0..types).rev() {
        out[t] = perms[idx % perms.len()].clone();
        idx /= perms.len();
    }
    out
}

// ---------------------------------------------------------------------------
// Scenario 2

/// Generation parameters for [`Scenario2Spec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario2Params {
    /// Controlled robots, equal to the number of packages.
    pub robots: usize,
    /// Uncontrolled robots at every collection location.
    pub uncontrolled: usize,
    pub arrival_mean: Range,
    /// Arrival spread, shared by every robot at a location.
    pub arrival_sd: Range,
    pub service_mean: Range,
    pub service_sd: Range,
    pub delivery_mean: Range,
    pub delivery_sd: Range,
    pub deadline: Range,
    pub cost_rate: f64,
}

impl Default for Scenario2Params {
    /// Thirty robots and packages with six uncontrolled robots per location.
    fn default() -> Self {
        Self {
            robots: 30,
            uncontrolled: 6,
            arrival_mean: Range::new(5.0, 25.0),
            arrival_sd: Range::new(0.5, 3.0),
            service_mean: Range::new(2.0, 5.0),
            service_sd: Range::new(0.2, 1.0),
            delivery_mean: Range::new(5.0, 15.0),
            delivery_sd: Range::new(0.5, 2.0),
            deadline: Range::new(20.0, 40.0),
            cost_rate: 1.0,
        }
    }
}

impl Scenario2Params {
    pub fn validate(&self) -> Result<()> {
        if !(1..=64).contains(&self.robots) {
            return Err(Error::InvalidParameter(
                "robot count must be between 1 and 64".into(),
            ));
        }
        if !(1..=6).contains(&self.uncontrolled) {
            return Err(Error::InvalidParameter(
                "uncontrolled robots per location must be between 1 and 6".into(),
            ));
        }
        self.arrival_mean.validate("arrival mean")?;
        self.arrival_sd.validate_spread("arrival sd")?;
        self.service_mean.validate("service mean")?;
        self.service_sd.validate_spread("service sd")?;
        self.delivery_mean.validate("delivery mean")?;
        self.delivery_sd.validate_spread("delivery sd")?;
        self.deadline.validate("deadline")?;
        if !(self.cost_rate.is_finite() && self.cost_rate >= 0.0) {
            return Err(Error::InvalidParameter(
                "cost rate must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Package collection with uncontrolled robots queueing at the collection points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario2Spec {
    /// Arrival of each controlled robot at each location, `arrival[robot][location]`.
    pub arrival: Vec<Vec<Gaussian>>,
    /// Service time of each controlled robot.
    pub service: Vec<Gaussian>,
    /// Robots outside our control visiting each location.
    pub uncontrolled: Vec<Vec<ArrivalProcess>>,
    /// Travel from each collection location to its package's destination.
    pub delivery: Vec<Gaussian>,
    pub deadline: Vec<f64>,
    pub cost_rate: f64,
}

impl Scenario2Spec {
    pub fn generate(params: &Scenario2Params, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = params.robots;
        let sd: Vec<f64> = (0..n).map(|_| params.arrival_sd.sample(&mut rng)).collect();
        let arrival_at = |rng: &mut ChaCha8Rng, loc: usize| {
            Gaussian::from_std(params.arrival_mean.sample(rng), sd[loc]).expect("validated")
        };
        let arrival = (0..n)
            .map(|_| (0..n).map(|l| arrival_at(&mut rng, l)).collect())
            .collect();
        let service = (0..n)
            .map(|_| gaussian(&mut rng, &params.service_mean, &params.service_sd))
            .collect();
        let uncontrolled = (0..n)
            .map(|l| {
                (0..params.uncontrolled)
                    .map(|k| {
                        let a = arrival_at(&mut rng, l);
                        let d = gaussian(&mut rng, &params.service_mean, &params.service_sd);
                        ArrivalProcess::new(k, a, d)
                    })
                    .collect()
            })
            .collect();
        let delivery = (0..n)
            .map(|_| gaussian(&mut rng, &params.delivery_mean, &params.delivery_sd))
            .collect();
        let deadline = (0..n).map(|_| params.deadline.sample(&mut rng)).collect();
        Ok(Self {
            arrival,
            service,
            uncontrolled,
            delivery,
            deadline,
            cost_rate: params.cost_rate,
        })
    }

    pub fn robots(&self) -> usize {
        self.arrival.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.robots();
        if n == 0
            || self.arrival.iter().any(|a| a.len() != n)
            || self.service.len() != n
            || self.uncontrolled.len() != n
            || self.delivery.len() != n
            || self.deadline.len() != n
        {
            return Err(Error::InvalidParameter(
                "scenario dimensions are inconsistent".into(),
            ));
        }
        if !(self.cost_rate.is_finite() && self.cost_rate >= 0.0) {
            return Err(Error::InvalidParameter(
                "cost rate must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Everyone visiting `location` if `robot` is sent there; the controlled robot is last.
    pub fn location_processes(&self, robot: usize, location: usize) -> Vec<ArrivalProcess> {
        let mut ps = self.uncontrolled[location].clone();
        for (k, p) in ps.iter_mut().enumerate() {
            p.robot_id = k;
        }
        ps.push(ArrivalProcess::new(
            ps.len(),
            self.arrival[robot][location],
            self.service[robot],
        ));
        ps
    }
}

/// Settings of the analytical methods.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub rule: CalibratedRule,
    pub orthant: OrthantOptions,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            rule: CalibratedRule::default_rule(),
            orthant: OrthantOptions::default(),
        }
    }
}

fn entry_seed(seed: u64, robot: usize, location: usize, n: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((robot * n + location) as u64)
}

/// Tardiness cost of one realization at a location.
fn realized_entry_cost(
    spec: &Scenario2Spec,
    ps: &[ArrivalProcess],
    location: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let draws: Vec<(f64, f64)> = ps
        .iter()
        .map(|p| (draw(rng, &p.arrival), draw(rng, &p.duration)))
        .collect();
    let delivery = draw(rng, &spec.delivery[location]);
    let me = ps.len() - 1;
    let mut order: Vec<usize> = (0..ps.len()).collect();
    order.sort_by(|&a, &b| draws[a].0.total_cmp(&draws[b].0).then(a.cmp(&b)));
    let mut free_at = f64::NEG_INFINITY;
    let mut finish = 0.0;
    for r in order {
        let (arr, dur) = draws[r];
        free_at = arr.max(free_at) + dur;
        if r == me {
            finish = free_at;
            break;
        }
    }
    spec.cost_rate * (finish + delivery - spec.deadline[location]).max(0.0)
}

/// Cost of sending `robot` to collect the package at `location`.
pub fn scenario2_entry_cost(
    spec: &Scenario2Spec,
    robot: usize,
    location: usize,
    method: Method,
    model: &CostModel,
    seed: u64,
) -> Result<f64> {
    let ps = spec.location_processes(robot, location);
    let me = ps.len() - 1;
    let delivery = spec.delivery[location];
    let deadline = spec.deadline[location];
    let analytical = |backend: ProbabilityBackend, phi: f64| -> Result<f64> {
        let t = fifo_timeline(&ps, phi, &backend, RankingMode::Heuristic, &model.rule)?;
        Ok(spec.cost_rate * (t.finish[me] + delivery).expected_tardiness(deadline))
    };
    match method {
        Method::Deterministic => {
            let means: Vec<ArrivalProcess> = ps
                .iter()
                .map(|p| {
                    ArrivalProcess::new(p.robot_id, p.arrival.mean_only(), p.duration.mean_only())
                })
                .collect();
            let mut order: Vec<usize> = (0..means.len()).collect();
            order.sort_by(|&a, &b| {
                means[a]
                    .arrival
                    .mean
                    .total_cmp(&means[b].arrival.mean)
                    .then(a.cmp(&b))
            });
            let t = propagate_specified(&means, &Order::new(order)?)?;
            Ok(spec.cost_rate * (t.finish[me].mean + delivery.mean - deadline).max(0.0))
        }
        Method::MonteCarlo { samples } => {
            let m = sample_moments(samples as u64, seed, |rng| {
                realized_entry_cost(spec, &ps, location, rng)
            });
            Ok(m.mean)
        }
        Method::Analytical { phi } => analytical(
            ProbabilityBackend::Exact {
                options: model.orthant,
                seed,
            },
            phi,
        ),
        Method::AnalyticalEstimate { phi } => analytical(ProbabilityBackend::Estimate, phi),
    }
}

/// Cost of every robot–package pairing, `costs[robot][package]`.
pub fn scenario2_cost_matrix(
    spec: &Scenario2Spec,
    method: Method,
    model: &CostModel,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let n = spec.robots();
    let flat: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n, k % n);
            scenario2_entry_cost(spec, i, j, method, model, entry_seed(seed, i, j, n))
        })
        .collect::<Result<_>>()?;
    Ok(flat.chunks(n).map(|c| c.to_vec()).collect())
}

/// Monte Carlo estimate of the true cost of one robot–package pairing.
pub fn scenario2_entry_ground_truth(
    spec: &Scenario2Spec,
    robot: usize,
    location: usize,
    samples: u64,
    seed: u64,
) -> Moments {
    let ps = spec.location_processes(robot, location);
    sample_moments(samples, seed, |rng| {
        realized_entry_cost(spec, &ps, location, rng)
    })
}

/// Minimum-cost perfect matching of rows to columns (Kuhn–Munkres with potentials).
///
/// Returns the column assigned to every row.
pub fn hungarian_assign(costs: &[Vec<f64>]) -> Result<Vec<usize>> {
    let n = costs.len();
    for (i, row) in costs.iter().enumerate() {
        if row.len() != n {
            return Err(Error::NotSquare {
                rows: n,
                cols: row.len(),
            });
        }
        if let Some(j) = row.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCost { row: i, col: j });
        }
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // 1-based arrays; column 0 is a virtual start column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = costs[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    Ok(assignment)
}

/// Total cost of an assignment.
pub fn assignment_cost(costs: &[Vec<f64>], assignment: &[usize]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| costs[i][j])
        .sum()
}
