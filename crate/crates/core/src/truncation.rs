//! Gaussian approximation of an arrival time conditioned on lying between two
//! other uncertain times, and its iterative use along an arrival order.
//!
//! The conditioning works in the frame where `B` is standard normal. The lower
//! and upper bounds `A`, `C` become `D = (A − μB)/σB` and `E = (C − μB)/σB`, the
//! conditional moments are evaluated there, then mapped back. An unbounded side
//! is handled as a bound at `∓∞`, which removes its terms.

use serde::{Deserialize, Serialize};

use crate::calibration::CalibratedRule;
use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::order::Order;
use crate::scalar::Scalar;
use crate::special::{erf, erfc, std_normal_cdf, std_normal_pdf};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Smallest erf difference accepted before a condition is declared negligible.
pub const NEGLIGIBLE_ERF_DIFFERENCE: f64 = 1e-14;

/// One side of a conditioning interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConditionBound<T = f64> {
    /// No constraint on this side (mean at −∞ for a lower, +∞ for an upper bound).
    Unbounded,
    Bounded(Gaussian<T>),
}

impl<T: Scalar> ConditionBound<T> {
    pub fn gaussian(&self) -> Option<&Gaussian<T>> {
        match self {
            Self::Unbounded => None,
            Self::Bounded(g) => Some(g),
        }
    }
}

impl<T> From<Gaussian<T>> for ConditionBound<T> {
    fn from(g: Gaussian<T>) -> Self {
        Self::Bounded(g)
    }
}

/// How the two bounds of a middle robot are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConditioningStrategy {
    /// Both bounds in one step.
    Together,
    /// Lower bound first, then the upper bound on the result.
    LowerThenUpper,
    /// Upper bound first, then the lower bound on the result.
    UpperThenLower,
}

impl ConditioningStrategy {
    /// All strategies in tie-break priority order.
    pub const ALL: [Self; 3] = [Self::Together, Self::LowerThenUpper, Self::UpperThenLower];
}

// Bound expressed in B's standard frame.
struct Transformed<T> {
    // μ/√(2(σ²+1)), ∓∞ for a sentinel
    erf_arg: T,
    // exp(−μ²/(2(σ²+1)))/√(σ²+1), zero for a sentinel
    density: T,
    // μ/(σ²+1), only used where multiplied by `density`
    slope: T,
}

fn transform<T: Scalar>(b: &Gaussian<T>, bound: &ConditionBound<T>, sentinel: T) -> Transformed<T> {
    match bound {
        ConditionBound::Unbounded => Transformed {
            erf_arg: sentinel,
            density: T::zero(),
            slope: T::zero(),
        },
        ConditionBound::Bounded(g) => {
            let mu = (g.mean - b.mean) / b.std_dev();
            let s2 = g.variance / b.variance + T::one();
            Transformed {
                erf_arg: mu / (T::lit(2.0) * s2).sqrt(),
                density: (-(mu * mu) / (T::lit(2.0) * s2)).exp() / s2.sqrt(),
                slope: mu / s2,
            }
        }
    }
}

// erf(hi) − erf(lo) without cancellation when both arguments sit in the same tail.
fn erf_difference<T: Scalar>(lo: T, hi: T) -> T {
    if lo >= T::zero() {
        erfc(lo) - erfc(hi)
    } else if hi <= T::zero() {
        erfc(-hi) - erfc(-lo)
    } else {
        erf(hi) - erf(lo)
    }
}

fn bound_summary<T: Scalar>(bound: &ConditionBound<T>) -> Option<(f64, f64)> {
    bound.gaussian().map(|g| {
        (
            g.mean.to_f64().unwrap_or(f64::NAN),
            g.variance.to_f64().unwrap_or(f64::NAN),
        )
    })
}

/// Gaussian approximation of `B | A < B < C`.
///
/// Either bound may be [`ConditionBound::Unbounded`]. When both are bounded the
/// lower mean must be strictly below the upper mean. A deterministic `b` (zero
/// variance) is returned unchanged, as is any `b` with both sides unbounded.
pub fn condition_between<T: Scalar>(
    b: &Gaussian<T>,
    lower: &ConditionBound<T>,
    upper: &ConditionBound<T>,
) -> Result<Gaussian<T>> {
    if let (ConditionBound::Bounded(l), ConditionBound::Bounded(u)) = (lower, upper) {
        if !(l.mean < u.mean) {
            return Err(Error::BoundsOutOfOrder {
                lower: l.mean.to_f64().unwrap_or(f64::NAN),
                upper: u.mean.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    if b.is_degenerate()
        || (matches!(lower, ConditionBound::Unbounded)
            && matches!(upper, ConditionBound::Unbounded))
    {
        return Ok(*b);
    }

    let d = transform(b, lower, T::neg_infinity());
    let e = transform(b, upper, T::infinity());
    let diff = erf_difference(d.erf_arg, e.erf_arg);
    if !(diff >= T::lit(NEGLIGIBLE_ERF_DIFFERENCE)) {
        return Err(Error::NegligibleProbability {
            b_mean: b.mean.to_f64().unwrap_or(f64::NAN),
            b_var: b.variance.to_f64().unwrap_or(f64::NAN),
            lower: bound_summary(lower),
            upper: bound_summary(upper),
        });
    }

    let two = T::lit(2.0);
    let alpha = T::one() / (T::lit(SQRT_2PI) * diff);
    let mean_n = two * alpha * (d.density - e.density);
    let var_n = alpha
        * (T::lit(SQRT_2PI) * (T::one() + mean_n * mean_n) * diff
            + two * (d.slope - two * mean_n) * d.density
            - two * (e.slope - two * mean_n) * e.density);
    if !(var_n > T::zero()) || !var_n.is_finite() || !mean_n.is_finite() {
        return Err(Error::DegenerateConditioning {
            variance: var_n.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(Gaussian {
        mean: mean_n * b.std_dev() + b.mean,
        variance: var_n * b.variance,
    })
}

/// Applies both bounds according to `strategy`.
pub fn condition_with_strategy<T: Scalar>(
    b: &Gaussian<T>,
    lower: &ConditionBound<T>,
    upper: &ConditionBound<T>,
    strategy: ConditioningStrategy,
) -> Result<Gaussian<T>> {
    let open = ConditionBound::Unbounded;
    match strategy {
        ConditioningStrategy::Together => condition_between(b, lower, upper),
        ConditioningStrategy::LowerThenUpper => {
            let first = condition_between(b, lower, &open)?;
            condition_between(&first, &open, upper)
        }
        ConditioningStrategy::UpperThenLower => {
            let first = condition_between(b, &open, upper)?;
            condition_between(&first, lower, &open)
        }
    }
}

/// Overlap metric γ and shape metric δ of a pair of bounds.
///
/// `γ = (μC − μA)/(σC + σA)`, `δ = |ln(σA/σC)|`. Both are unchanged by the
/// standardizing transform into B's frame, so they are evaluated directly.
pub fn overlap_shape_metrics<T: Scalar>(
    lower: &Gaussian<T>,
    upper: &Gaussian<T>,
) -> Result<(T, T)> {
    let sa = lower.std_dev();
    let sc = upper.std_dev();
    if !(sa + sc > T::zero()) {
        return Err(Error::ZeroSpread);
    }
    let gamma = (upper.mean - lower.mean) / (sa + sc);
    let delta = (sa / sc).ln().abs();
    Ok((gamma, delta))
}

/// Strategy the calibrated rule picks for conditioning `b` between `lower` and `upper`.
pub fn select_strategy<T: Scalar>(
    b: &Gaussian<T>,
    lower: &Gaussian<T>,
    upper: &Gaussian<T>,
    rule: &CalibratedRule,
) -> ConditioningStrategy {
    rule.select(b, lower, upper)
}

/// Conditions every arrival on the given arrival order.
///
/// Conditions are applied iteratively. Walking backwards, each robot is
/// conditioned to arrive before its already-conditioned successor; walking
/// forwards, each is conditioned to arrive after its already-conditioned
/// predecessor. The first robot in the order takes the backward result, the
/// last takes the forward result, and a robot in between is conditioned on both
/// neighbours (forward result of its predecessor, backward result of its
/// successor) using the strategy chosen by `rule`.
///
/// Returned distributions are indexed by robot, like `arrivals`.
pub fn condition_on_order<T: Scalar>(
    arrivals: &[Gaussian<T>],
    order: &Order,
    rule: &CalibratedRule,
) -> Result<Vec<Gaussian<T>>> {
    order.check_len(arrivals.len())?;
    let seq = order.sequence();
    let n = seq.len();
    if n <= 1 {
        return Ok(arrivals.to_vec());
    }
    let open = ConditionBound::Unbounded;

    let mut before_next = vec![Gaussian::point(T::zero()); n];
    before_next[n - 1] = arrivals[seq[n - 1]];
    for k in (0..n - 1).rev() {
        before_next[k] = condition_between(
            &arrivals[seq[k]],
            &open,
            &ConditionBound::Bounded(before_next[k + 1]),
        )?;
    }
    let mut after_prev = vec![Gaussian::point(T::zero()); n];
    after_prev[0] = arrivals[seq[0]];
    for k in 1..n {
        after_prev[k] = condition_between(
            &arrivals[seq[k]],
            &ConditionBound::Bounded(after_prev[k - 1]),
            &open,
        )?;
    }

    let mut out = arrivals.to_vec();
    out[seq[0]] = before_next[0];
    out[seq[n - 1]] = after_prev[n - 1];
    for k in 1..n - 1 {
        let b = &arrivals[seq[k]];
        let lower = after_prev[k - 1];
        let upper = before_next[k + 1];
        out[seq[k]] = condition_middle(b, &lower, &upper, rule)?;
    }
    Ok(out)
}

/// Conditions `b` on both neighbours with the rule's strategy, falling back to
/// the remaining strategies (in tie-break order) when the chosen one is not
/// applicable or degenerates.
pub fn condition_middle<T: Scalar>(
    b: &Gaussian<T>,
    lower: &Gaussian<T>,
    upper: &Gaussian<T>,
    rule: &CalibratedRule,
) -> Result<Gaussian<T>> {
    let lo = ConditionBound::Bounded(*lower);
    let hi = ConditionBound::Bounded(*upper);
    let chosen = if lower.mean < upper.mean {
        select_strategy(b, lower, upper, rule)
    } else {
        ConditioningStrategy::LowerThenUpper
    };
    let mut last_err = None;
    let fallbacks = ConditioningStrategy::ALL
        .into_iter()
        .filter(|s| *s != chosen);
    for strategy in std::iter::once(chosen).chain(fallbacks) {
        match condition_with_strategy(b, &lo, &hi, strategy) {
            Ok(g) => return Ok(g),
            Err(e @ (Error::DegenerateConditioning { .. } | Error::BoundsOutOfOrder { .. })) => {
                last_err = Some(e)
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one strategy attempted"))
}

fn window_mass<T: Scalar>(mu: T, sigma: T, a: T, b: T) -> T {
    let za = (a - mu) / sigma;
    let zb = (b - mu) / sigma;
    if za > T::zero() {
        std_normal_cdf(-za) - std_normal_cdf(-zb)
    } else {
        std_normal_cdf(zb) - std_normal_cdf(za)
    }
}

/// Density of `g` truncated to `[a, b]`; zero outside the window.
pub fn truncated_pdf<T: Scalar>(x: T, g: &Gaussian<T>, a: T, b: T) -> Result<T> {
    if !(a < b) {
        return Err(Error::InvalidWindow {
            a: a.to_f64().unwrap_or(f64::NAN),
            b: b.to_f64().unwrap_or(f64::NAN),
        });
    }
    if g.is_degenerate() {
        return Err(Error::InvalidGaussian {
            mean: g.mean.to_f64().unwrap_or(f64::NAN),
            variance: 0.0,
        });
    }
    let sigma = g.std_dev();
    let mass = window_mass(g.mean, sigma, a, b);
    if !(mass > T::zero()) {
        return Err(Error::EmptyWindow {
            a: a.to_f64().unwrap_or(f64::NAN),
            b: b.to_f64().unwrap_or(f64::NAN),
        });
    }
    if x < a || x > b {
        return Ok(T::zero());
    }
    Ok(std_normal_pdf((x - g.mean) / sigma) / sigma / mass)
}

/// Unique point in `(a, b)` where the truncated densities of `N(mu_x, σ²)` and
/// `N(mu_y, σ²)` on `[a, b]` coincide.
///
/// `x = (2σ² ln c + μx² − μy²) / (2(μx − μy))` with `c` the ratio of the two
/// window masses.
pub fn truncated_pdf_intersection<T: Scalar>(mu_x: T, mu_y: T, sigma: T, a: T, b: T) -> Result<T> {
    if !(a < b) {
        return Err(Error::InvalidWindow {
            a: a.to_f64().unwrap_or(f64::NAN),
            b: b.to_f64().unwrap_or(f64::NAN),
        });
    }
    if mu_x == mu_y {
        return Err(Error::IdenticalMeans);
    }
    let mass_x = window_mass(mu_x, sigma, a, b);
    let mass_y = window_mass(mu_y, sigma, a, b);
    if !(mass_x > T::zero()) || !(mass_y > T::zero()) {
        return Err(Error::EmptyWindow {
            a: a.to_f64().unwrap_or(f64::NAN),
            b: b.to_f64().unwrap_or(f64::NAN),
        });
    }
    let two = T::lit(2.0);
    let ln_c = mass_x.ln() - mass_y.ln();
    Ok((two * sigma * sigma * ln_c + mu_x * mu_x - mu_y * mu_y) / (two * (mu_x - mu_y)))
}

/// Closed-form mean of `N(mu, σ²)` truncated to `[a, b]`.
pub fn truncated_mean<T: Scalar>(mu: T, sigma: T, a: T, b: T) -> Result<T> {
    let mass = window_mass(mu, sigma, a, b);
    if !(mass > T::zero()) {
        return Err(Error::EmptyWindow {
            a: a.to_f64().unwrap_or(f64::NAN),
            b: b.to_f64().unwrap_or(f64::NAN),
        });
    }
    let za = (a - mu) / sigma;
    let zb = (b - mu) / sigma;
    Ok(mu + sigma * (std_normal_pdf(za) - std_normal_pdf(zb)) / mass)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(m: f64, v: f64) -> Gaussian {
        Gaussian::new(m, v).unwrap()
    }

    fn open() -> ConditionBound {
        ConditionBound::Unbounded
    }

    #[test]
    fn no_bounds_is_identity() {
        let b = g(0.0, 1.0);
        assert_eq!(condition_between(&b, &open(), &open()).unwrap(), b);
    }

    #[test]
    fn symmetric_bounds_keep_mean() {
        let b = g(0.0, 1.0);
        let out = condition_between(&b, &g(-3.0, 0.25).into(), &g(3.0, 0.25).into()).unwrap();
        assert!(out.mean.abs() < 1e-12);
        assert!(out.variance < 1.0);
    }

    #[test]
    fn one_sided_matches_truncated_normal_for_point_bound() {
        // A deterministic upper bound turns the condition into plain truncation.
        let b = g(1.0, 4.0);
        let out = condition_between(&b, &open(), &Gaussian::point(2.0).into()).unwrap();
        let want = truncated_mean(1.0, 2.0, f64::NEG_INFINITY, 2.0).unwrap();
        assert!((out.mean - want).abs() < 1e-12);
        // variance of a normal truncated above at z = 0.5
        let z: f64 = 0.5;
        let lam = std_normal_pdf(z) / std_normal_cdf(z);
        let want_var = 4.0 * (1.0 - z * lam - lam * lam);
        assert!((out.variance - want_var).abs() < 1e-12);
    }

    #[test]
    fn rejects_inverted_bounds() {
        let b = g(0.0, 1.0);
        let err = condition_between(&b, &g(1.0, 1.0).into(), &g(1.0, 1.0).into()).unwrap_err();
        assert!(matches!(err, Error::BoundsOutOfOrder { .. }));
    }

    #[test]
    fn negligible_condition_is_reported() {
        let b = g(0.0, 1.0);
        let err = condition_between(&b, &Gaussian::point(40.0).into(), &open()).unwrap_err();
        assert!(matches!(err, Error::NegligibleProbability { .. }));
    }

    #[test]
    fn metrics() {
        let (gm, dl) = overlap_shape_metrics(&g(0.0, 1.0), &g(4.0, 1.0)).unwrap();
        assert_eq!((gm, dl), (2.0, 0.0));
        let (gm, dl) = overlap_shape_metrics(&g(0.0, 1.0), &g(0.0, 1.0)).unwrap();
        assert_eq!((gm, dl), (0.0, 0.0));
        let (gm, dl) = overlap_shape_metrics(&g(0.0, 1.0), &g(2.0, 4.0)).unwrap();
        assert!((gm - 2.0 / 3.0).abs() < 1e-15 && (dl - 2f64.ln()).abs() < 1e-15);
        assert!(overlap_shape_metrics(&g(0.0, 0.0), &g(1.0, 0.0)).is_err());
    }

    #[test]
    fn strategies_agree_without_overlap() {
        let b = g(0.0, 1.0);
        let lo = g(-6.0, 0.1).into();
        let hi = g(6.0, 0.1).into();
        let t = condition_with_strategy(&b, &lo, &hi, ConditioningStrategy::Together).unwrap();
        for s in [
            ConditioningStrategy::LowerThenUpper,
            ConditioningStrategy::UpperThenLower,
        ] {
            let o = condition_with_strategy(&b, &lo, &hi, s).unwrap();
            assert!((o.mean - t.mean).abs() < 1e-6 && (o.variance - t.variance).abs() < 1e-6);
        }
    }

    #[test]
    fn order_conditioning_small_cases() {
        let rule = CalibratedRule::default_rule();
        let one = [g(3.0, 1.0)];
        assert_eq!(
            condition_on_order(&one, &Order::identity(1), &rule).unwrap(),
            one.to_vec()
        );

        let two = [g(0.0, 1.0), g(8.0, 1.0)];
        let out = condition_on_order(&two, &Order::identity(2), &rule).unwrap();
        for (o, a) in out.iter().zip(&two) {
            assert!((o.mean - a.mean).abs() < 1e-6 && (o.variance - a.variance).abs() < 1e-6);
        }
        // the lower robot of an inverted pair moves up, the upper one moves down
        let out = condition_on_order(&two, &Order::new(vec![1, 0]).unwrap(), &rule).unwrap();
        assert!(out[1].mean < out[0].mean);
    }

    #[test]
    fn middle_of_three_reproduces_condition_between() {
        let rule = CalibratedRule::default_rule();
        let arr = [g(0.0, 1.0), g(0.5, 1.0), g(1.0, 1.0)];
        let out = condition_on_order(&arr, &Order::identity(3), &rule).unwrap();
        let strategy = select_strategy(&arr[1], &arr[0], &arr[2], &rule);
        let direct =
            condition_with_strategy(&arr[1], &arr[0].into(), &arr[2].into(), strategy).unwrap();
        assert_eq!(out[1], direct);
        assert!(out[0].mean < out[1].mean && out[1].mean < out[2].mean);
    }

    #[test]
    fn truncated_pdf_values() {
        let s = g(0.0, 1.0);
        assert_eq!(truncated_pdf(2.0, &s, -1.0, 1.0).unwrap(), 0.0);
        let v = truncated_pdf(0.0, &s, -1.0, 1.0).unwrap();
        assert!((v - 0.398_942_280_401_432_7 / 0.682_689_492_137_085_9).abs() < 1e-12);
        assert!(truncated_pdf(0.0, &s, 1.0, -1.0).is_err());
        assert!(truncated_pdf(0.0, &s, 50.0, 60.0).is_err());
    }

    #[test]
    fn intersection_symmetric_window() {
        let x: f64 = truncated_pdf_intersection(-1.0, 1.0, 1.0, -2.0, 2.0).unwrap();
        assert!(x.abs() < 1e-12);
        assert!(matches!(
            truncated_pdf_intersection(1.0, 1.0, 1.0, -2.0, 2.0),
            Err(Error::IdenticalMeans)
        ));
    }
}
