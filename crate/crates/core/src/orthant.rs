//! Multivariate normal orthant probabilities `P(X < 0)`.
//!
//! Genz's separation-of-variables transform turns the orthant probability into
//! an integral over the unit cube of dimension `m − 1`, evaluated with a
//! randomly shifted rank-1 (Richtmyer) lattice. The baker's transform
//! periodizes the integrand and every point is paired with its antithetic
//! image. Independent random shifts give the error estimate; the point count
//! doubles until the estimate meets the requested relative tolerance.
//!
//! Semi-definite covariances are supported: a vanishing Cholesky pivot makes
//! the corresponding factor an indicator of the remaining limit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::special::std_normal_inv;

/// Largest diagonal correction applied before a covariance is rejected.
pub const PSD_JITTER: f64 = 1e-10;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

// Square roots of the primes generate the Richtmyer lattice.
const PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Mean vector and row-major covariance of a multivariate normal.
#[derive(Debug, Clone, PartialEq)]
pub struct MvnSpec {
    pub mean: Vec<f64>,
    pub covariance: Vec<f64>,
}

impl MvnSpec {
    pub fn new(mean: Vec<f64>, covariance: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || covariance.len() != mean.len() * mean.len() {
            return Err(Error::InvalidParameter(format!(
                "covariance of length {} does not match dimension {}",
                covariance.len(),
                mean.len()
            )));
        }
        Ok(Self { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    #[inline]
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.covariance[i * self.mean.len() + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthantOptions {
    /// Lattice points per randomization in the first pass.
    pub initial_points: usize,
    /// Upper limit on lattice points per randomization.
    pub max_points: usize,
    pub randomizations: usize,
    /// Requested relative error.
    pub rel_tol: f64,
    /// Absolute error below which no refinement is attempted.
    pub abs_tol: f64,
}

impl Default for OrthantOptions {
    fn default() -> Self {
        Self {
            initial_points: 1 << 10,
            max_points: 1 << 16,
            randomizations: 8,
            rel_tol: 1e-4,
            abs_tol: 1e-6,
        }
    }
}

impl OrthantOptions {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

/// Probability with its estimated error (three standard errors across randomizations).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthantEstimate {
    pub probability: f64,
    pub error: f64,
    /// Lattice points per randomization used for the final estimate.
    pub points: usize,
}

/// Lower-triangular factor of a positive semi-definite matrix, row-major.
/// Pivots within [`PSD_JITTER`] of zero produce an all-zero column.
pub fn cholesky_psd(cov: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        let mut pivot = cov[i * n + i];
        for k in 0..i {
            pivot -= l[i * n + k] * l[i * n + k];
        }
        if pivot < -PSD_JITTER {
            return Err(Error::NotPositiveSemiDefinite { row: i, pivot });
        }
        if pivot <= PSD_JITTER {
            // Degenerate direction: the remaining rows must not load on it.
            for j in i + 1..n {
                let mut off = cov[j * n + i];
                for k in 0..i {
                    off -= l[j * n + k] * l[i * n + k];
                }
                if off.abs() > PSD_JITTER.sqrt() {
                    return Err(Error::NotPositiveSemiDefinite { row: i, pivot });
                }
            }
            continue;
        }
        let d = pivot.sqrt();
        l[i * n + i] = d;
        for j in i + 1..n {
            let mut off = cov[j * n + i];
            for k in 0..i {
                off -= l[j * n + k] * l[i * n + k];
            }
            l[j * n + i] = off / d;
        }
    }
    Ok(l)
}

// Φ through the platform-independent libm erfc; the integrand's hot path.
#[inline]
fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

fn limit_factor(limit: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        phi(limit / scale)
    } else if limit > 0.0 {
        1.0
    } else if limit == 0.0 {
        0.5
    } else {
        0.0
    }
}

struct Integrand<'a> {
    upper: &'a [f64],
    chol: &'a [f64],
    n: usize,
}

impl Integrand<'_> {
    // One point of the unit cube of dimension n − 1.
    fn eval(&self, w: &[f64], y: &mut [f64]) -> f64 {
        let n = self.n;
        let l = self.chol;
        let mut e = limit_factor(self.upper[0], l[0]);
        let mut f = e;
        for i in 1..n {
            if f <= 0.0 {
                return 0.0;
            }
            let prev = i - 1;
            y[prev] = if l[prev * n + prev] > 0.0 {
                std_normal_inv((w[prev] * e).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
            } else {
                0.0
            };
            let mut shift = 0.0;
            for (k, yk) in y.iter().enumerate().take(i) {
                shift += l[i * n + k] * yk;
            }
            e = limit_factor(self.upper[i] - shift, l[i * n + i]);
            f *= e;
        }
        f
    }
}

/// Cholesky factor with Genz–Bretz variable prioritization.
///
/// At every step the remaining variable with the smallest conditional
/// probability of satisfying its limit is moved to the front; the limits of
/// already placed variables are replaced by their truncated expectations.
/// Returns the permuted limits and the factor of the permuted covariance.
fn prioritized_cholesky(spec: &MvnSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = spec.dim();
    let mut cov = spec.covariance.clone();
    let mut upper: Vec<f64> = spec.mean.iter().map(|m| -m).collect();
    let mut l = vec![0.0; n * n];
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut best = i;
        let mut best_p = f64::INFINITY;
        for j in i..n {
            let mut var = cov[j * n + j];
            let mut shift = 0.0;
            for k in 0..i {
                var -= l[j * n + k] * l[j * n + k];
                shift += l[j * n + k] * y[k];
            }
            let p = limit_factor(upper[j] - shift, var.max(0.0).sqrt());
            if p < best_p {
                best_p = p;
                best = j;
            }
        }
        if best != i {
            upper.swap(i, best);
            for k in 0..n {
                cov.swap(i * n + k, best * n + k);
            }
            for k in 0..n {
                cov.swap(k * n + i, k * n + best);
            }
            for k in 0..i {
                l.swap(i * n + k, best * n + k);
            }
        }
        let mut pivot = cov[i * n + i];
        let mut shift = 0.0;
        for k in 0..i {
            pivot -= l[i * n + k] * l[i * n + k];
            shift += l[i * n + k] * y[k];
        }
        if pivot < -PSD_JITTER {
            return Err(Error::NotPositiveSemiDefinite { row: i, pivot });
        }
        if pivot <= PSD_JITTER {
            for j in i + 1..n {
                let mut off = cov[j * n + i];
                for k in 0..i {
                    off -= l[j * n + k] * l[i * n + k];
                }
                if off.abs() > PSD_JITTER.sqrt() {
                    return Err(Error::NotPositiveSemiDefinite { row: i, pivot });
                }
            }
            y[i] = 0.0;
            continue;
        }
        let d = pivot.sqrt();
        l[i * n + i] = d;
        for j in i + 1..n {
            let mut off = cov[j * n + i];
            for k in 0..i {
                off -= l[j * n + k] * l[i * n + k];
            }
            l[j * n + i] = off / d;
        }
        // Expectation of a standard normal truncated above at u.
        let u = (upper[i] - shift) / d;
        let mass = phi(u);
        y[i] = if mass > 1e-300 {
            -(-0.5 * u * u).exp() * FRAC_1_SQRT_2PI / mass
        } else {
            u
        };
    }
    Ok((upper, l))
}

/// `P(X_i < 0 for all i)` for `X ~ N(spec.mean, spec.covariance)`,
/// deterministic given `seed`.
pub fn mvn_orthant_prob(
    spec: &MvnSpec,
    options: &OrthantOptions,
    seed: u64,
) -> Result<OrthantEstimate> {
    let n = spec.dim();
    let (upper, chol) = prioritized_cholesky(spec)?;
    let integrand = Integrand {
        upper: &upper,
        chol: &chol,
        n,
    };

    let dims = n - 1;
    if dims == 0 {
        return Ok(OrthantEstimate {
            probability: limit_factor(upper[0], chol[0]),
            error: 0.0,
            points: 1,
        });
    }

    let gen: Vec<f64> = PRIMES
        .iter()
        .cycle()
        .take(dims)
        .enumerate()
        .map(|(k, &p)| {
            // Beyond the table reuse primes scaled by the wrap count.
            let v = (p as f64 * (1 + k / PRIMES.len()) as f64).sqrt();
            v.fract()
        })
        .collect();
    let reps = options.randomizations.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts: Vec<Vec<f64>> = (0..reps)
        .map(|_| (0..dims).map(|_| rng.random::<f64>()).collect())
        .collect();

    let mut sums = vec![0.0; reps];
    let mut done = 0usize;
    let mut target = options.initial_points.max(1);
    let mut w = vec![0.0; dims];
    let mut w_anti = vec![0.0; dims];
    let mut y = vec![0.0; dims];
    loop {
        for (r, shift) in shifts.iter().enumerate() {
            let mut acc = 0.0;
            for j in done..target {
                let jf = (j + 1) as f64;
                for k in 0..dims {
                    let x = (jf * gen[k] + shift[k]).fract();
                    let baker = 1.0 - (2.0 * x - 1.0).abs();
                    w[k] = baker;
                    w_anti[k] = 1.0 - baker;
                }
                acc += 0.5 * (integrand.eval(&w, &mut y) + integrand.eval(&w_anti, &mut y));
            }
            sums[r] += acc;
        }
        done = target;
        let means: Vec<f64> = sums.iter().map(|s| s / done as f64).collect();
        let p = means.iter().sum::<f64>() / reps as f64;
        let var = means.iter().map(|m| (m - p) * (m - p)).sum::<f64>() / ((reps - 1) * reps) as f64;
        let error = 3.0 * var.sqrt();
        let ok = error <= (options.rel_tol * p).max(options.abs_tol);
        if ok || done >= options.max_points {
            return Ok(OrthantEstimate {
                probability: p.clamp(0.0, 1.0),
                error,
                points: done,
            });
        }
        target = (done * 2).min(options.max_points);
    }
}
