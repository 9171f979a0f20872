//! Seeded Monte Carlo simulation of a one-at-a-time resource.
//!
//! Samples are drawn in fixed-size batches. Batch `b` uses a ChaCha8 generator
//! seeded with the run seed and set to stream `b`, so results do not depend on
//! how batches are scheduled across threads. Within a sample, each robot in
//! index order draws its arrival and then its duration from the standard
//! normal (ziggurat) transform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contention::ArrivalProcess;
use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::order::Order;

/// Samples per batch; each batch has its own generator stream.
pub const BATCH_SIZE: usize = 1 << 14;

/// Largest robot count for which realized orders are tallied.
pub const MAX_TALLIED_ROBOTS: usize = 8;

/// Generator for batch `batch` of a run seeded with `seed`.
pub fn batch_rng(seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

/// One draw from `g`.
#[inline]
pub fn draw(rng: &mut impl Rng, g: &Gaussian) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    g.mean + g.std_dev() * z
}

/// Sample mean and variance accumulated with Welford's update.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Combines two accumulators (Chan et al.).
    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn standard_error(&self) -> f64 {
        if self.count == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.count as f64).sqrt()
    }

    pub fn to_gaussian(&self) -> Gaussian {
        Gaussian {
            mean: self.mean,
            variance: self.variance(),
        }
    }
}

/// How the resource chooses whom to serve next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ServiceModel {
    /// Robots are served in a fixed order regardless of arrival.
    Specified(Order),
    /// Robots are served in the realized order of arrival, ties by index.
    Fifo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub samples: u64,
    pub seed: u64,
    pub model: ServiceModel,
    /// Serve first-come first-served samples in this order instead of the
    /// realized one. Only meaningful with [`ServiceModel::Fifo`]; used to
    /// cross-check the two code paths.
    pub forced_order: Option<Order>,
}

impl SimConfig {
    pub fn fifo(samples: u64, seed: u64) -> Self {
        Self {
            samples,
            seed,
            model: ServiceModel::Fifo,
            forced_order: None,
        }
    }

    pub fn specified(order: Order, samples: u64, seed: u64) -> Self {
        Self {
            samples,
            seed,
            model: ServiceModel::Specified(order),
            forced_order: None,
        }
    }
}

/// One simulated realization, indexed by robot.
#[derive(Debug)]
pub struct SampleView<'a> {
    pub arrival: &'a [f64],
    pub start: &'a [f64],
    pub finish: &'a [f64],
    /// Service order of this realization.
    pub order: &'a [usize],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub start: Vec<Moments>,
    pub finish: Vec<Moments>,
    /// Moments of the requested statistic, if any.
    pub statistic: Option<Moments>,
    /// Realized service orders as `(sequence, count)` in lexicographic
    /// sequence order; empty for more than [`MAX_TALLIED_ROBOTS`] robots.
    pub order_counts: Vec<(Vec<usize>, u64)>,
    pub samples: u64,
}

impl SimResult {
    /// Fraction of samples served in `order`.
    pub fn order_frequency(&self, order: &Order) -> f64 {
        self.order_counts
            .iter()
            .find(|(s, _)| s.as_slice() == order.sequence())
            .map_or(0.0, |(_, c)| *c as f64 / self.samples as f64)
    }
}

struct BatchAcc {
    start: Vec<Moments>,
    finish: Vec<Moments>,
    statistic: Moments,
    tally: Vec<u64>,
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

// Lehmer rank of a permutation, consistent with lexicographic order.
fn permutation_rank(seq: &[usize]) -> usize {
    let n = seq.len();
    let mut rank = 0;
    for i in 0..n {
        let smaller = seq[i + 1..].iter().filter(|&&x| x < seq[i]).count();
        rank += smaller * factorial(n - 1 - i);
    }
    rank
}

fn permutation_unrank(mut rank: usize, n: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let f = factorial(n - 1 - i);
        out.push(pool.remove(rank / f));
        rank %= f;
    }
    out
}

/// Runs the simulation, additionally averaging `statistic` over samples.
pub fn simulate_with<F>(
    processes: &[ArrivalProcess],
    config: &SimConfig,
    statistic: Option<F>,
) -> Result<SimResult>
where
    F: Fn(&SampleView) -> f64 + Sync,
{
    let n = processes.len();
    if config.samples == 0 {
        return Err(Error::InvalidParameter(
            "sample count must be positive".into(),
        ));
    }
    if let ServiceModel::Specified(o) = &config.model {
        o.check_len(n)?;
    }
    if let Some(o) = &config.forced_order {
        o.check_len(n)?;
    }
    let tally_size = if n <= MAX_TALLIED_ROBOTS {
        factorial(n)
    } else {
        0
    };
    let batches = config.samples.div_ceil(BATCH_SIZE as u64);

    let run_batch = |b: u64| -> BatchAcc {
        let mut rng = batch_rng(config.seed, b);
        let count = (config.samples - b * BATCH_SIZE as u64).min(BATCH_SIZE as u64);
        let mut acc = BatchAcc {
            start: vec![Moments::default(); n],
            finish: vec![Moments::default(); n],
            statistic: Moments::default(),
            tally: vec![0; tally_size],
        };
        let mut arrival = vec![0.0; n];
        let mut duration = vec![0.0; n];
        let mut start = vec![0.0; n];
        let mut finish = vec![0.0; n];
        let mut order: Vec<usize> = match &config.model {
            ServiceModel::Specified(o) => o.sequence().to_vec(),
            ServiceModel::Fifo => (0..n).collect(),
        };
        for _ in 0..count {
            for (k, p) in processes.iter().enumerate() {
                arrival[k] = draw(&mut rng, &p.arrival);
                duration[k] = draw(&mut rng, &p.duration);
            }
            if config.model == ServiceModel::Fifo {
                match &config.forced_order {
                    Some(o) => order.copy_from_slice(o.sequence()),
                    None => {
                        for (k, slot) in order.iter_mut().enumerate() {
                            *slot = k;
                        }
                        order.sort_by(|&a, &b| arrival[a].total_cmp(&arrival[b]).then(a.cmp(&b)));
                    }
                }
            }
            let mut free_at = f64::NEG_INFINITY;
            for &r in &order {
                start[r] = arrival[r].max(free_at);
                finish[r] = start[r] + duration[r];
                free_at = finish[r];
            }
            for k in 0..n {
                acc.start[k].push(start[k]);
                acc.finish[k].push(finish[k]);
            }
            if tally_size > 0 {
                acc.tally[permutation_rank(&order)] += 1;
            }
            if let Some(f) = &statistic {
                acc.statistic.push(f(&SampleView {
                    arrival: &arrival,
                    start: &start,
                    finish: &finish,
                    order: &order,
                }));
            }
        }
        acc
    };

    let parts: Vec<BatchAcc> = (0..batches).into_par_iter().map(run_batch).collect();
    let mut total = BatchAcc {
        start: vec![Moments::default(); n],
        finish: vec![Moments::default(); n],
        statistic: Moments::default(),
        tally: vec![0; tally_size],
    };
    for p in &parts {
        for k in 0..n {
            total.start[k].merge(&p.start[k]);
            total.finish[k].merge(&p.finish[k]);
        }
        total.statistic.merge(&p.statistic);
        for (t, c) in total.tally.iter_mut().zip(&p.tally) {
            *t += c;
        }
    }
    let order_counts = total
        .tally
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(rank, &c)| (permutation_unrank(rank, n), c))
        .collect();
    Ok(SimResult {
        start: total.start,
        finish: total.finish,
        statistic: statistic.as_ref().map(|_| total.statistic),
        order_counts,
        samples: config.samples,
    })
}

/// Runs the simulation without an extra statistic.
pub fn simulate(processes: &[ArrivalProcess], config: &SimConfig) -> Result<SimResult> {
    simulate_with(processes, config, None::<fn(&SampleView) -> f64>)
}

/// Moments of `f` over `samples` evaluations, each given its own slice of the
/// batch generator. Deterministic given `seed`.
pub fn sample_moments<F>(samples: u64, seed: u64, f: F) -> Moments
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let batches = samples.div_ceil(BATCH_SIZE as u64);
    let parts: Vec<Moments> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(seed, b);
            let count = (samples - b * BATCH_SIZE as u64).min(BATCH_SIZE as u64);
            let mut m = Moments::default();
            for _ in 0..count {
                m.push(f(&mut rng));
            }
            m
        })
        .collect();
    parts.iter().fold(Moments::default(), |mut acc, m| {
        acc.merge(m);
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proc(id: usize, a: (f64, f64), d: (f64, f64)) -> ArrivalProcess {
        ArrivalProcess::new(
            id,
            Gaussian::new(a.0, a.1).unwrap(),
            Gaussian::new(d.0, d.1).unwrap(),
        )
    }

    #[test]
    fn zero_variance_is_deterministic() {
        let ps = [
            proc(0, (0.0, 0.0), (2.0, 0.0)),
            proc(1, (1.0, 0.0), (1.0, 0.0)),
        ];
        let r = simulate(&ps, &SimConfig::fifo(1000, 3)).unwrap();
        assert_eq!(r.start[1].mean, 2.0);
        assert_eq!(r.finish[1].mean, 3.0);
        assert_eq!(r.finish[1].variance(), 0.0);
        assert_eq!(r.order_counts, vec![(vec![0, 1], 1000)]);
    }

    #[test]
    fn single_robot_moments() {
        let ps = [proc(0, (5.0, 1.0), (2.0, 0.5))];
        let r = simulate(&ps, &SimConfig::specified(Order::identity(1), 200_000, 1)).unwrap();
        let f = r.finish[0];
        assert!((f.mean - 7.0).abs() < 4.0 * f.standard_error());
        assert!((f.variance() - 1.5).abs() < 0.02);
    }

    #[test]
    fn seed_determinism() {
        let ps = [
            proc(0, (0.0, 1.0), (1.0, 0.1)),
            proc(1, (0.5, 1.0), (1.0, 0.1)),
        ];
        let a = simulate(&ps, &SimConfig::fifo(50_000, 11)).unwrap();
        let b = simulate(&ps, &SimConfig::fifo(50_000, 11)).unwrap();
        assert_eq!(a, b);
        let c = simulate(&ps, &SimConfig::fifo(50_000, 12)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn forced_fifo_equals_specified() {
        let ps = [
            proc(0, (0.0, 1.0), (1.0, 0.1)),
            proc(1, (0.5, 1.0), (1.0, 0.1)),
            proc(2, (0.2, 2.0), (0.5, 0.2)),
        ];
        let order = Order::new(vec![2, 0, 1]).unwrap();
        let mut fifo = SimConfig::fifo(40_000, 5);
        fifo.forced_order = Some(order.clone());
        let a = simulate(&ps, &fifo).unwrap();
        let b = simulate(&ps, &SimConfig::specified(order, 40_000, 5)).unwrap();
        assert_eq!(a.start, b.start);
        assert_eq!(a.finish, b.finish);
    }

    #[test]
    fn ranks_round_trip() {
        for (rank, o) in crate::order::all_orders(4).iter().enumerate() {
            assert_eq!(permutation_rank(o.sequence()), rank);
            assert_eq!(permutation_unrank(rank, 4), o.sequence());
        }
    }

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let (mut a, mut b) = (Moments::default(), Moments::default());
        xs[..333].iter().for_each(|&x| a.push(x));
        xs[333..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean - all.mean).abs() < 1e-12);
        assert!((a.variance() - all.variance()).abs() < 1e-10);
    }
}
