//! Univariate Gaussian algebra used for every time and duration in the crate.

use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special::{erfc, std_normal_cdf, std_normal_pdf};

/// A normal distribution N(mean, variance).
///
/// `variance` is always non-negative. A zero variance encodes a deterministic
/// value, which the operations below handle explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian<T = f64> {
    pub mean: T,
    pub variance: T,
}

impl<T: Scalar> Gaussian<T> {
    /// Validated constructor: finite mean, finite non-negative variance.
    pub fn new(mean: T, variance: T) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance < T::zero() {
            return Err(Error::InvalidGaussian {
                mean: mean.to_f64().unwrap_or(f64::NAN),
                variance: variance.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { mean, variance })
    }

    /// Builds from mean and standard deviation.
    pub fn from_std(mean: T, std_dev: T) -> Result<Self> {
        Self::new(mean, std_dev * std_dev)
    }

    pub fn standard() -> Self {
        Self {
            mean: T::zero(),
            variance: T::one(),
        }
    }

    /// Zero-variance value.
    pub fn point(mean: T) -> Self {
        Self {
            mean,
            variance: T::zero(),
        }
    }

    #[inline]
    pub fn std_dev(&self) -> T {
        self.variance.sqrt()
    }

    pub fn is_degenerate(&self) -> bool {
        self.variance <= T::zero()
    }

    /// Same distribution with the variance removed.
    pub fn mean_only(&self) -> Self {
        Self::point(self.mean)
    }

    /// Distribution of `X + Y` for independent `X`, `Y`.
    #[inline]
    pub fn sum(&self, other: &Self) -> Self {
        Self {
            mean: self.mean + other.mean,
            variance: self.variance + other.variance,
        }
    }

    /// Clark's moment-matched approximation of `max(X, Y)` for independent `X`, `Y`.
    ///
    /// With `α = √(σx² + σy²)` and `β = (μx − μy)/α`:
    /// `μ = μx Φ(β) + μy Φ(−β) + α φ(β)` and
    /// `σ² = (μx² + σx²) Φ(β) + (μy² + σy²) Φ(−β) + (μx + μy) α φ(β) − μ²`.
    ///
    /// When both variances are zero the result is the input with the larger
    /// mean (the first one on ties).
    pub fn clark_max(&self, other: &Self) -> Self {
        let alpha = (self.variance + other.variance).sqrt();
        if !(alpha > T::zero()) {
            return if other.mean > self.mean {
                *other
            } else {
                *self
            };
        }
        // Moments are evaluated relative to the larger mean so the final
        // subtraction of μ² does not lose precision for large absolute times.
        let shift = self.mean.max(other.mean);
        let mx = self.mean - shift;
        let my = other.mean - shift;
        let beta = (mx - my) / alpha;
        let cdf_pos = std_normal_cdf(beta);
        let cdf_neg = std_normal_cdf(-beta);
        let pdf = std_normal_pdf(beta);
        let mean = mx * cdf_pos + my * cdf_neg + alpha * pdf;
        let second = (mx * mx + self.variance) * cdf_pos
            + (my * my + other.variance) * cdf_neg
            + (mx + my) * alpha * pdf;
        let variance = (second - mean * mean).max(T::zero());
        Self {
            mean: mean + shift,
            variance,
        }
    }

    /// Left fold of [`Gaussian::clark_max`] over `xs` in list order.
    ///
    /// The pairing order changes the approximation; folding left keeps
    /// results reproducible.
    pub fn clark_max_n(xs: &[Self]) -> Result<Self> {
        let (first, rest) = xs.split_first().ok_or(Error::Empty)?;
        Ok(rest.iter().fold(*first, |acc, x| acc.clark_max(x)))
    }

    /// `E[max(0, T − deadline)]` for `T` distributed as `self`.
    pub fn expected_tardiness(&self, deadline: T) -> T {
        let lateness = self.mean - deadline;
        if self.is_degenerate() {
            return lateness.max(T::zero());
        }
        let sigma = self.std_dev();
        let z = lateness / sigma;
        // (μ−κ)/2·(1 + erf((μ−κ)/(σ√2))) + σ/√(2π)·exp(−(μ−κ)²/(2σ²))
        let half_erfc = T::lit(0.5) * erfc(-z * T::lit(std::f64::consts::FRAC_1_SQRT_2));
        let value = lateness * half_erfc + sigma * std_normal_pdf(z);
        value.max(lateness).max(T::zero())
    }

    /// KL divergence `KL(self ‖ other)` between two non-degenerate Gaussians.
    pub fn kl_divergence(&self, other: &Self) -> T {
        let d = self.mean - other.mean;
        T::lit(0.5)
            * ((other.variance / self.variance).ln() + (self.variance + d * d) / other.variance
                - T::one())
    }

    /// Moment-matched Gaussian of a finite mixture. Weights need not be normalized.
    pub fn mixture(components: impl IntoIterator<Item = (T, Self)>) -> Result<Self> {
        let mut total = T::zero();
        let mut first = T::zero();
        let mut second = T::zero();
        for (w, g) in components {
            total = total + w;
            first = first + w * g.mean;
            second = second + w * (g.variance + g.mean * g.mean);
        }
        if !(total > T::zero()) {
            return Err(Error::Empty);
        }
        let mean = first / total;
        let variance = (second / total - mean * mean).max(T::zero());
        Ok(Self { mean, variance })
    }
}

impl<T: Scalar> Add for Gaussian<T> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        self.sum(&rhs)
    }
}

/// `X + Y` for independent Gaussians.
pub fn gauss_sum<T: Scalar>(x: &Gaussian<T>, y: &Gaussian<T>) -> Gaussian<T> {
    x.sum(y)
}

/// See [`Gaussian::clark_max`].
pub fn clark_max<T: Scalar>(x: &Gaussian<T>, y: &Gaussian<T>) -> Gaussian<T> {
    x.clark_max(y)
}

/// See [`Gaussian::clark_max_n`].
pub fn clark_max_n<T: Scalar>(xs: &[Gaussian<T>]) -> Result<Gaussian<T>> {
    Gaussian::clark_max_n(xs)
}

/// See [`Gaussian::expected_tardiness`].
pub fn expected_tardiness<T: Scalar>(t: &Gaussian<T>, deadline: T) -> T {
    t.expected_tardiness(deadline)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(m: f64, v: f64) -> Gaussian {
        Gaussian::new(m, v).unwrap()
    }

    #[test]
    fn sums() {
        assert_eq!(g(1.0, 4.0) + g(2.0, 9.0), g(3.0, 13.0));
        assert_eq!(g(5.0, 2.0) + g(0.0, 0.0), g(5.0, 2.0));
        let s = g(2.5, 1.2) + g(0.5, 0.3);
        assert!((s.mean - 3.0).abs() < 1e-15 && (s.variance - 1.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Gaussian::new(0.0, -1.0).is_err());
        assert!(Gaussian::new(f64::NAN, 1.0).is_err());
        assert!(Gaussian::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn clark_dominant() {
        let z = g(0.0, 1.0).clark_max(&g(-100.0, 1.0));
        assert!((z.mean - 0.0).abs() < 1e-9 && (z.variance - 1.0).abs() < 1e-9);
    }

    #[test]
    fn clark_identical_standard() {
        // β = 0, α = √2: μ = √2·φ(0) = 1/√π, σ² = 1 − 1/π.
        let z = g(0.0, 1.0).clark_max(&g(0.0, 1.0));
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        assert!((z.mean - inv_sqrt_pi).abs() < 1e-15);
        assert!((z.variance - (1.0 - 1.0 / std::f64::consts::PI)).abs() < 1e-15);
    }

    #[test]
    fn clark_degenerate() {
        assert_eq!(g(1.0, 0.0).clark_max(&g(2.0, 0.0)), g(2.0, 0.0));
        assert_eq!(g(3.0, 0.0).clark_max(&g(2.0, 0.0)), g(3.0, 0.0));
    }

    #[test]
    fn clark_n() {
        assert!(Gaussian::<f64>::clark_max_n(&[]).is_err());
        assert_eq!(Gaussian::clark_max_n(&[g(3.0, 1.0)]).unwrap(), g(3.0, 1.0));
        let z = Gaussian::clark_max_n(&[g(0.0, 1.0), g(-50.0, 1.0), g(-60.0, 1.0)]).unwrap();
        assert!((z.mean).abs() < 1e-6 && (z.variance - 1.0).abs() < 1e-6);
    }

    #[test]
    fn tardiness() {
        let t = g(3.0, 1.0);
        assert!((t.expected_tardiness(3.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!(t.expected_tardiness(3.0 + 40.0) < 1e-12);
        assert_eq!(g(5.0, 0.0).expected_tardiness(3.0), 2.0);
        assert_eq!(g(5.0, 0.0).expected_tardiness(7.0), 0.0);
        // far-below deadline linearizes
        assert!((t.expected_tardiness(-100.0) - 103.0).abs() < 1e-12);
    }

    #[test]
    fn mixture_moments() {
        let m = Gaussian::mixture([(1.0, g(0.0, 1.0)), (1.0, g(2.0, 1.0))]).unwrap();
        assert!((m.mean - 1.0).abs() < 1e-15);
        assert!((m.variance - 2.0).abs() < 1e-15);
        assert!(Gaussian::<f64>::mixture([]).is_err());
    }

    #[test]
    fn kl_zero_on_self() {
        let a = g(1.0, 2.0);
        assert!(a.kl_divergence(&a).abs() < 1e-15);
        assert!(a.kl_divergence(&g(0.0, 1.0)) > 0.0);
    }

    #[test]
    fn generic_over_f32() {
        let z = Gaussian::<f32>::new(0.0, 1.0)
            .unwrap()
            .clark_max(&Gaussian::new(0.0, 1.0).unwrap());
        assert!((z.mean - 0.564_189_6).abs() < 1e-6);
    }
}
