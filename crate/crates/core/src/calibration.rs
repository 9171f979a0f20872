//! Calibrated threshold rule choosing how the two bounds of a middle robot are
//! applied, and the harness that fits it.
//!
//! The rule first checks the overlap metric γ: well separated bounds are
//! applied together. Otherwise the bounds are applied one at a time and the
//! shape metric δ selects which comparison decides the first bound. The
//! harness samples random configurations, scores every strategy by the KL
//! divergence between its Gaussian and the moment-matched exact conditional
//! (numerical quadrature), and picks the thresholds and comparisons that select
//! the lowest-KL strategy most often on a training set, breaking ties by total
//! KL. Scores are reported on a separate held-out set.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::scalar::Scalar;
use crate::special::{std_normal_cdf, std_normal_pdf};
use crate::truncation::{
    condition_with_strategy, overlap_shape_metrics, ConditionBound, ConditioningStrategy,
};

pub const RULE_FORMAT: &str = "contention-rule";
pub const RULE_VERSION: u32 = 1;
/// Seed the shipped default rule was generated with.
pub const DEFAULT_RULE_SEED: u64 = 20_161;
/// Training sample count of the shipped default rule.
pub const DEFAULT_RULE_SAMPLES: usize = 10_000;

const DEFAULT_RULE: &str = include_str!("../data/default_rule.txt");

/// Oracle grid size; odd for Simpson's rule.
const ORACLE_POINTS: usize = 4001;
const ORACLE_HALF_WIDTH: f64 = 9.0;
/// Configurations whose condition holds with lower probability are skipped.
const ORACLE_MIN_PROBABILITY: f64 = 1e-9;
/// Strategies within this KL of the best one count as optimal.
pub const OPTIMAL_KL_TOLERANCE: f64 = 1e-9;
const THRESHOLD_CANDIDATES: usize = 64;

/// Comparison deciding which bound is applied first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FirstBound {
    Lower,
    Upper,
    /// Bound with the smaller spread.
    Tighter,
    /// Bound with the larger spread.
    Wider,
    /// Bound whose mean is closer to the conditioned variable's mean, in its standard units.
    Nearer,
    Farther,
    /// Bound that removes more of the conditioned variable's mass on its own.
    Stronger,
    Weaker,
}

impl FirstBound {
    pub const ALL: [Self; 8] = [
        Self::Lower,
        Self::Upper,
        Self::Tighter,
        Self::Wider,
        Self::Nearer,
        Self::Farther,
        Self::Stronger,
        Self::Weaker,
    ];

    fn name(self) -> &'static str {
        match self {
            Self::Lower => "lower",
            Self::Upper => "upper",
            Self::Tighter => "tighter",
            Self::Wider => "wider",
            Self::Nearer => "nearer",
            Self::Farther => "farther",
            Self::Stronger => "stronger",
            Self::Weaker => "weaker",
        }
    }

    /// Strategy for the given features; equal comparisons fall back to lower-first.
    fn strategy(self, f: &Features) -> ConditioningStrategy {
        use std::cmp::Ordering::*;
        let lower_first = |ord: Option<std::cmp::Ordering>| match ord {
            Some(Less) => ConditioningStrategy::LowerThenUpper,
            Some(Greater) => ConditioningStrategy::UpperThenLower,
            _ => ConditioningStrategy::LowerThenUpper,
        };
        match self {
            Self::Lower => ConditioningStrategy::LowerThenUpper,
            Self::Upper => ConditioningStrategy::UpperThenLower,
            Self::Tighter => lower_first(f.sd_lower.partial_cmp(&f.sd_upper)),
            Self::Wider => lower_first(f.sd_upper.partial_cmp(&f.sd_lower)),
            Self::Nearer => lower_first(f.dist_lower.partial_cmp(&f.dist_upper)),
            Self::Farther => lower_first(f.dist_upper.partial_cmp(&f.dist_lower)),
            Self::Stronger => lower_first(f.keep_lower.partial_cmp(&f.keep_upper)),
            Self::Weaker => lower_first(f.keep_upper.partial_cmp(&f.keep_lower)),
        }
    }
}

impl fmt::Display for FirstBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FirstBound {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::RuleFormat(format!("unknown comparison `{s}`")))
    }
}

/// Features of a (b, lower, upper) configuration in b's standard frame.
#[derive(Debug, Clone, Copy)]
pub struct Features {
    pub gamma: f64,
    pub delta: f64,
    sd_lower: f64,
    sd_upper: f64,
    dist_lower: f64,
    dist_upper: f64,
    // probability mass of b kept by each bound alone
    keep_lower: f64,
    keep_upper: f64,
}

impl Features {
    pub fn new<T: Scalar>(b: &Gaussian<T>, lower: &Gaussian<T>, upper: &Gaussian<T>) -> Self {
        let f = |x: T| x.to_f64().unwrap_or(f64::NAN);
        let sb = f(b.std_dev());
        let mu_d = (f(lower.mean) - f(b.mean)) / sb;
        let mu_e = (f(upper.mean) - f(b.mean)) / sb;
        let sd_d = f(lower.std_dev()) / sb;
        let sd_e = f(upper.std_dev()) / sb;
        let (gamma, delta) = overlap_shape_metrics(lower, upper)
            .map(|(g, d)| (f(g), f(d)))
            .unwrap_or((f64::INFINITY, 0.0));
        Self {
            gamma,
            delta,
            sd_lower: sd_d,
            sd_upper: sd_e,
            dist_lower: mu_d.abs() / (1.0 + sd_d * sd_d).sqrt(),
            dist_upper: mu_e.abs() / (1.0 + sd_e * sd_e).sqrt(),
            keep_lower: std_normal_cdf(-mu_d / (1.0 + sd_d * sd_d).sqrt()),
            keep_upper: std_normal_cdf(mu_e / (1.0 + sd_e * sd_e).sqrt()),
        }
    }
}

/// Provenance and held-out scores stored alongside a rule.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuleMetadata {
    pub seed: u64,
    pub sample_count: usize,
    pub heldout_count: usize,
    pub skipped: usize,
    pub heldout_optimal_rate: f64,
    pub heldout_mean_kl: f64,
    pub heldout_rms_kl: f64,
}

/// Threshold rule selecting a [`ConditioningStrategy`]. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedRule {
    /// Bounds with overlap metric at or above this are applied together.
    pub gamma_threshold: f64,
    /// Shape metric at or above this uses `first_when_shapes_differ`.
    pub delta_threshold: f64,
    pub first_when_shapes_differ: FirstBound,
    pub first_when_shapes_similar: FirstBound,
    pub metadata: RuleMetadata,
}

impl CalibratedRule {
    /// Rule shipped with the crate, generated by [`calibrate_rule`] with
    /// [`DEFAULT_RULE_SAMPLES`] samples at [`DEFAULT_RULE_SEED`].
    pub fn default_rule() -> Self {
        DEFAULT_RULE.parse().expect("shipped rule file parses")
    }

    pub fn select<T: Scalar>(
        &self,
        b: &Gaussian<T>,
        lower: &Gaussian<T>,
        upper: &Gaussian<T>,
    ) -> ConditioningStrategy {
        self.select_features(&Features::new(b, lower, upper))
    }

    pub fn select_features(&self, f: &Features) -> ConditioningStrategy {
        if f.gamma >= self.gamma_threshold {
            ConditioningStrategy::Together
        } else if f.delta >= self.delta_threshold {
            self.first_when_shapes_differ.strategy(f)
        } else {
            self.first_when_shapes_similar.strategy(f)
        }
    }

    /// Versioned `key = value` text form.
    pub fn to_text(&self) -> String {
        let m = &self.metadata;
        format!(
            "# conditioning strategy rule\n\
             format = {RULE_FORMAT}\n\
             version = {RULE_VERSION}\n\
             gamma_threshold = {:?}\n\
             delta_threshold = {:?}\n\
             first_when_shapes_differ = {}\n\
             first_when_shapes_similar = {}\n\
             seed = {}\n\
             sample_count = {}\n\
             heldout_count = {}\n\
             skipped = {}\n\
             heldout_optimal_rate = {:?}\n\
             heldout_mean_kl = {:?}\n\
             heldout_rms_kl = {:?}\n",
            self.gamma_threshold,
            self.delta_threshold,
            self.first_when_shapes_differ,
            self.first_when_shapes_similar,
            m.seed,
            m.sample_count,
            m.heldout_count,
            m.skipped,
            m.heldout_optimal_rate,
            m.heldout_mean_kl,
            m.heldout_rms_kl,
        )
    }
}

impl fmt::Display for CalibratedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for CalibratedRule {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut fields = std::collections::BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::RuleFormat(format!("line {}: expected `key = value`", n + 1))
            })?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            fields
                .get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::RuleFormat(format!("missing `{k}`")))
        };
        fn num<V: FromStr>(k: &str, v: &str) -> Result<V> {
            v.parse()
                .map_err(|_| Error::RuleFormat(format!("bad value for `{k}`: {v}")))
        }
        if get("format")? != RULE_FORMAT {
            return Err(Error::RuleFormat("not a rule file".into()));
        }
        let version: u32 = num("version", get("version")?)?;
        if version != RULE_VERSION {
            return Err(Error::RuleFormat(format!("unsupported version {version}")));
        }
        Ok(Self {
            gamma_threshold: num("gamma_threshold", get("gamma_threshold")?)?,
            delta_threshold: num("delta_threshold", get("delta_threshold")?)?,
            first_when_shapes_differ: get("first_when_shapes_differ")?.parse()?,
            first_when_shapes_similar: get("first_when_shapes_similar")?.parse()?,
            metadata: RuleMetadata {
                seed: num("seed", get("seed")?)?,
                sample_count: num("sample_count", get("sample_count")?)?,
                heldout_count: num("heldout_count", get("heldout_count")?)?,
                skipped: num("skipped", get("skipped")?)?,
                heldout_optimal_rate: num("heldout_optimal_rate", get("heldout_optimal_rate")?)?,
                heldout_mean_kl: num("heldout_mean_kl", get("heldout_mean_kl")?)?,
                heldout_rms_kl: num("heldout_rms_kl", get("heldout_rms_kl")?)?,
            },
        })
    }
}

/// Exact moments of `b | lower < b < upper` for independent Gaussians, with the
/// probability of the condition.
///
/// The bound variables integrate out in closed form, leaving a one-dimensional
/// integral over `b` that is evaluated with composite Simpson on a
/// [`ORACLE_POINTS`]-point grid spanning ±9σ of `b`, clipped to ±9σ of the bounds.
/// Returns `None` when the condition has negligible probability.
pub fn quadrature_conditional(
    b: &Gaussian,
    lower: &ConditionBound,
    upper: &ConditionBound,
) -> Option<(Gaussian, f64)> {
    let sb = b.std_dev();
    if !(sb > 0.0) {
        return None;
    }
    let mut lo = b.mean - ORACLE_HALF_WIDTH * sb;
    let mut hi = b.mean + ORACLE_HALF_WIDTH * sb;
    if let ConditionBound::Bounded(l) = lower {
        lo = lo.max(l.mean - ORACLE_HALF_WIDTH * l.std_dev());
    }
    if let ConditionBound::Bounded(u) = upper {
        hi = hi.min(u.mean + ORACLE_HALF_WIDTH * u.std_dev());
    }
    if !(hi > lo) {
        return None;
    }
    let keep = |bound: &ConditionBound, x: f64, above: bool| -> f64 {
        match bound {
            ConditionBound::Unbounded => 1.0,
            ConditionBound::Bounded(g) => {
                let s = g.std_dev();
                let z = if above { x - g.mean } else { g.mean - x };
                if s > 0.0 {
                    std_normal_cdf(z / s)
                } else if z >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    };
    let n = ORACLE_POINTS;
    let h = (hi - lo) / (n - 1) as f64;
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let x = lo + h * i as f64;
        let w = if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let dens =
            std_normal_pdf((x - b.mean) / sb) / sb * keep(lower, x, true) * keep(upper, x, false);
        m0 += w * dens;
        m1 += w * dens * x;
        m2 += w * dens * x * x;
    }
    let prob = m0 * h / 3.0;
    if !(prob >= ORACLE_MIN_PROBABILITY) {
        return None;
    }
    let mean = m1 / m0;
    let variance = m2 / m0 - mean * mean;
    if !(variance > 0.0) {
        return None;
    }
    Some((Gaussian { mean, variance }, prob))
}

/// A scored calibration configuration, in b's standard frame.
#[derive(Debug, Clone)]
pub struct ScoredSample {
    pub lower: Gaussian,
    pub upper: Gaussian,
    pub features: Features,
    /// Probability of the condition.
    pub probability: f64,
    /// KL divergence of each strategy, indexed like [`ConditioningStrategy::ALL`];
    /// infinite when the strategy fails.
    pub kl: [f64; 3],
}

impl ScoredSample {
    pub fn best_kl(&self) -> f64 {
        self.kl.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn kl_of(&self, s: ConditioningStrategy) -> f64 {
        self.kl[strategy_index(s)]
    }

    pub fn is_optimal(&self, s: ConditioningStrategy) -> bool {
        self.kl_of(s) <= self.best_kl() + OPTIMAL_KL_TOLERANCE
    }
}

fn strategy_index(s: ConditioningStrategy) -> usize {
    match s {
        ConditioningStrategy::Together => 0,
        ConditioningStrategy::LowerThenUpper => 1,
        ConditioningStrategy::UpperThenLower => 2,
    }
}

/// Random bound pair in b's standard frame: means uniform on [−3, 3] (sorted),
/// standard deviations log-uniform on [1/3, 3].
fn draw_config(rng: &mut ChaCha8Rng) -> (Gaussian, Gaussian) {
    let ln3 = 3f64.ln();
    let mut m1: f64 = rng.random_range(-3.0..3.0);
    let mut m2: f64 = rng.random_range(-3.0..3.0);
    if m1 > m2 {
        std::mem::swap(&mut m1, &mut m2);
    }
    let s1 = rng.random_range(-ln3..ln3).exp();
    let s2 = rng.random_range(-ln3..ln3).exp();
    (
        Gaussian {
            mean: m1,
            variance: s1 * s1,
        },
        Gaussian {
            mean: m2,
            variance: s2 * s2,
        },
    )
}

/// Scores one configuration against the quadrature oracle.
pub fn score_config(lower: &Gaussian, upper: &Gaussian) -> Option<ScoredSample> {
    let b = Gaussian::standard();
    let lo = ConditionBound::Bounded(*lower);
    let hi = ConditionBound::Bounded(*upper);
    let (exact, probability) = quadrature_conditional(&b, &lo, &hi)?;
    let mut kl = [f64::INFINITY; 3];
    for (slot, s) in kl.iter_mut().zip(ConditioningStrategy::ALL) {
        if let Ok(approx) = condition_with_strategy(&b, &lo, &hi, s) {
            let v = exact.kl_divergence(&approx);
            if v.is_finite() {
                *slot = v.max(0.0);
            }
        }
    }
    Some(ScoredSample {
        lower: *lower,
        upper: *upper,
        features: Features::new(&b, lower, upper),
        probability,
        kl,
    })
}

/// Draws `count` configurations from `stream` of `seed` and scores them.
/// Returns the scored samples and the number skipped by the oracle.
pub fn scored_samples(count: usize, seed: u64, stream: u64) -> (Vec<ScoredSample>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let configs: Vec<(Gaussian, Gaussian)> = (0..count).map(|_| draw_config(&mut rng)).collect();
    let scored: Vec<Option<ScoredSample>> = configs
        .par_iter()
        .map(|(l, u)| score_config(l, u))
        .collect();
    let skipped = scored.iter().filter(|s| s.is_none()).count();
    (scored.into_iter().flatten().collect(), skipped)
}

/// Selection quality of a rule over scored samples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RuleScore {
    pub count: usize,
    pub optimal_rate: f64,
    pub mean_kl: f64,
    pub rms_kl: f64,
    /// Mean and RMS KL restricted to samples where the choice was not optimal.
    pub mean_kl_incorrect: f64,
    pub rms_kl_incorrect: f64,
}

pub fn score_rule(rule: &CalibratedRule, samples: &[ScoredSample]) -> RuleScore {
    let mut optimal = 0usize;
    let (mut sum, mut sq, mut bad_sum, mut bad_sq, mut bad) = (0.0, 0.0, 0.0, 0.0, 0usize);
    for s in samples {
        let choice = rule.select_features(&s.features);
        let kl = s.kl_of(choice);
        sum += kl;
        sq += kl * kl;
        if s.is_optimal(choice) {
            optimal += 1;
        } else {
            bad += 1;
            bad_sum += kl;
            bad_sq += kl * kl;
        }
    }
    let n = samples.len().max(1) as f64;
    let nb = bad.max(1) as f64;
    RuleScore {
        count: samples.len(),
        optimal_rate: optimal as f64 / n,
        mean_kl: sum / n,
        rms_kl: (sq / n).sqrt(),
        mean_kl_incorrect: bad_sum / nb,
        rms_kl_incorrect: (bad_sq / nb).sqrt(),
    }
}

/// Result of [`calibrate_rule`].
#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub rule: CalibratedRule,
    pub training: RuleScore,
    pub heldout: RuleScore,
    pub skipped_training: usize,
    pub skipped_heldout: usize,
}

// Candidate thresholds: quantiles of the observed values, plus +∞.
fn quantile_candidates(mut values: Vec<f64>, count: usize) -> Vec<f64> {
    values.retain(|v| v.is_finite());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = (0..count)
        .filter_map(|k| values.get(k * values.len() / count).copied())
        .collect();
    out.push(f64::INFINITY);
    out.dedup();
    out
}

// Number of optimal choices, then total KL as tie-break.
#[derive(Debug, Clone, Copy, Default)]
struct Score {
    optimal: usize,
    kl: f64,
}

impl Score {
    fn of(s: &ScoredSample, strategy: ConditioningStrategy) -> Self {
        Self {
            optimal: s.is_optimal(strategy) as usize,
            kl: s.kl_of(strategy),
        }
    }

    fn add(&mut self, o: Score) {
        self.optimal += o.optimal;
        self.kl += o.kl;
    }

    fn better(&self, o: &Score) -> bool {
        self.optimal > o.optimal || (self.optimal == o.optimal && self.kl < o.kl)
    }
}

/// Fits a rule on `sample_count` training configurations and scores it on an
/// equally sized held-out set drawn from an independent stream of the same seed.
pub fn calibrate_rule(sample_count: usize, seed: u64) -> Result<CalibrationReport> {
    if sample_count < 1000 {
        return Err(Error::InvalidParameter(format!(
            "calibration needs at least 1000 samples, got {sample_count}"
        )));
    }
    let (train, skipped_training) = scored_samples(sample_count, seed, 0);
    let (heldout, skipped_heldout) = scored_samples(sample_count, seed, 1);

    let gammas = quantile_candidates(
        train.iter().map(|s| s.features.gamma).collect(),
        THRESHOLD_CANDIDATES,
    );
    let deltas = quantile_candidates(
        train.iter().map(|s| s.features.delta).collect(),
        THRESHOLD_CANDIDATES,
    );

    // Per-sample score of each comparison's choice, reused across thresholds.
    let choice: Vec<[Score; 8]> = train
        .iter()
        .map(|s| {
            let mut row = [Score::default(); 8];
            for (slot, c) in row.iter_mut().zip(FirstBound::ALL) {
                *slot = Score::of(s, c.strategy(&s.features));
            }
            row
        })
        .collect();
    let together: Vec<Score> = train
        .iter()
        .map(|s| Score::of(s, ConditioningStrategy::Together))
        .collect();

    let best = gammas
        .par_iter()
        .map(|&g_thr| {
            let mut best: Option<(Score, f64, usize, usize)> = None;
            for &d_thr in &deltas {
                let mut total = Score::default();
                let mut wide = [Score::default(); 8];
                let mut narrow = [Score::default(); 8];
                for (k, s) in train.iter().enumerate() {
                    if s.features.gamma >= g_thr {
                        total.add(together[k]);
                    } else {
                        let branch = if s.features.delta >= d_thr {
                            &mut wide
                        } else {
                            &mut narrow
                        };
                        for (acc, v) in branch.iter_mut().zip(choice[k]) {
                            acc.add(v);
                        }
                    }
                }
                let argbest = |v: &[Score; 8]| {
                    (0..8).fold(0, |bi, c| if v[c].better(&v[bi]) { c } else { bi })
                };
                let (wi, ni) = (argbest(&wide), argbest(&narrow));
                total.add(wide[wi]);
                total.add(narrow[ni]);
                if best.is_none_or(|b| total.better(&b.0)) {
                    best = Some((total, d_thr, wi, ni));
                }
            }
            let (total, d_thr, wi, ni) = best.expect("delta candidates non-empty");
            (total, g_thr, d_thr, wi, ni)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(
            None::<(Score, f64, f64, usize, usize)>,
            |acc, c| match acc {
                Some(a) if !c.0.better(&a.0) => Some(a),
                _ => Some(c),
            },
        )
        .expect("gamma candidates non-empty");

    let (_, gamma_threshold, delta_threshold, wi, ni) = best;
    let mut rule = CalibratedRule {
        gamma_threshold,
        delta_threshold,
        first_when_shapes_differ: FirstBound::ALL[wi],
        first_when_shapes_similar: FirstBound::ALL[ni],
        metadata: RuleMetadata::default(),
    };
    let training = score_rule(&rule, &train);
    let heldout_score = score_rule(&rule, &heldout);
    rule.metadata = RuleMetadata {
        seed,
        sample_count,
        heldout_count: heldout.len(),
        skipped: skipped_training + skipped_heldout,
        heldout_optimal_rate: heldout_score.optimal_rate,
        heldout_mean_kl: heldout_score.mean_kl,
        heldout_rms_kl: heldout_score.rms_kl,
    };
    Ok(CalibrationReport {
        rule,
        training,
        heldout: heldout_score,
        skipped_training,
        skipped_heldout,
    })
}
