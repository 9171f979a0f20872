//! Error function and standard normal helpers.
//!
//! `erf` and `erfc` are evaluated with two fixed expansions so results do not
//! depend on the platform math library:
//!
//! * `|x| < 3`: the everywhere-positive series
//!   `erf(x) = 2/√π · x·e^{-x²} · Σ (2x²)ⁿ / (1·3·…·(2n+1))`, which has no
//!   cancellation.
//! * `|x| ≥ 3`: the Laplace continued fraction for `erfc`, evaluated with the
//!   modified Lentz method.
//!
//! Both paths reach the working precision of the scalar type (absolute error
//! well below 1e-12 in `f64`).

use crate::scalar::Scalar;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SERIES_LIMIT: f64 = 3.0;
const MAX_ITERATIONS: usize = 1000;

/// Error function.
pub fn erf<T: Scalar>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    let ax = x.abs();
    let v = if ax < T::lit(SERIES_LIMIT) {
        erf_series(ax)
    } else {
        T::one() - erfc_continued_fraction(ax)
    };
    if x < T::zero() {
        -v
    } else {
        v
    }
}

/// Complementary error function, `1 - erf(x)`, accurate in the upper tail.
pub fn erfc<T: Scalar>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    if x < T::zero() {
        return T::lit(2.0) - erfc(-x);
    }
    if x < T::lit(SERIES_LIMIT) {
        T::one() - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

fn erf_series<T: Scalar>(x: T) -> T {
    let two_x2 = T::lit(2.0) * x * x;
    let mut term = T::one();
    let mut sum = T::one();
    let mut denom = T::one();
    for _ in 0..MAX_ITERATIONS {
        denom = denom + T::lit(2.0);
        term = term * two_x2 / denom;
        sum = sum + term;
        if term <= sum * T::epsilon() {
            break;
        }
    }
    T::lit(FRAC_2_SQRT_PI) * x * (-(x * x)).exp() * sum
}

// erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
fn erfc_continued_fraction<T: Scalar>(x: T) -> T {
    if x.is_infinite() {
        return T::zero();
    }
    let tiny = T::min_positive_value() / T::epsilon();
    let mut f = x;
    let mut c = f;
    let mut d = T::zero();
    for k in 1..MAX_ITERATIONS {
        let a = T::lit(k as f64 * 0.5);
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        d = d.recip();
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        let delta = c * d;
        f = f * delta;
        if (delta - T::one()).abs() <= T::epsilon() {
            break;
        }
    }
    T::lit(FRAC_1_SQRT_PI) * (-(x * x)).exp() / f
}

/// Standard normal density φ(x).
#[inline]
pub fn std_normal_pdf<T: Scalar>(x: T) -> T {
    T::lit(FRAC_1_SQRT_2PI) * (-(x * x) * T::lit(0.5)).exp()
}

/// Standard normal distribution function Φ(x) = ½(1 + erf(x/√2)).
///
/// Evaluated through `erfc` so the lower tail keeps relative accuracy.
#[inline]
pub fn std_normal_cdf<T: Scalar>(x: T) -> T {
    T::lit(0.5) * erfc(-x * T::lit(std::f64::consts::FRAC_1_SQRT_2))
}

/// `(φ(x), Φ(x))` in one call.
pub fn std_normal<T: Scalar>(x: T) -> (T, T) {
    (std_normal_pdf(x), std_normal_cdf(x))
}

/// Inverse of the standard normal distribution function (Wichura, AS241).
///
/// Returns `-∞` for `p = 0` and `+∞` for `p = 1`.
pub fn std_normal_inv(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((5.226_495_278_852_854e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_758_8)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_049e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pdf_and_cdf_at_zero() {
        let (pdf, cdf) = std_normal(0.0_f64);
        assert!((pdf - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert_eq!(cdf, 0.5);
    }

    #[test]
    fn cdf_at_upper_2_5_percent_point() {
        assert!((std_normal_cdf(1.959_964_f64) - 0.975).abs() < 1e-6);
    }

    #[test]
    fn erf_matches_reference_values() {
        // Abramowitz & Stegun table 7.1 / high precision values.
        let cases = [
            (0.5_f64, 0.520_499_877_813_046_5),
            (1.0, 0.842_700_792_949_714_9),
            (2.0, 0.995_322_265_018_952_7),
            (3.0, 0.999_977_909_503_001_4),
            (4.0, 0.999_999_984_582_742_1),
        ];
        for (x, want) in cases {
            assert!((erf(x) - want).abs() < 1e-15, "erf({x})");
            assert!((erf(-x) + want).abs() < 1e-15, "erf(-{x})");
        }
        assert!((erfc(5.0_f64) - 1.537_459_794_428_034_8e-12).abs() < 1e-25);
    }

    #[test]
    fn series_and_fraction_agree_at_switch() {
        let below = erf_series(2.999_999_999_f64);
        let above = 1.0 - erfc_continued_fraction(2.999_999_999_f64);
        assert!((below - above).abs() < 1e-15);
    }

    #[test]
    fn infinities() {
        assert_eq!(erf(f64::INFINITY), 1.0);
        assert_eq!(erf(f64::NEG_INFINITY), -1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY), 0.0);
        assert_eq!(std_normal_cdf(f64::INFINITY), 1.0);
    }

    #[test]
    fn f32_path() {
        assert!((erf(1.0_f32) - 0.842_700_8).abs() < 1e-6);
    }

    #[test]
    fn inverse_round_trips() {
        for i in 1..2000 {
            let p = i as f64 / 2000.0;
            let x = std_normal_inv(p);
            assert!((std_normal_cdf(x) - p).abs() < 1e-15 + 1e-12 * p, "p = {p}");
        }
        for p in [1e-300, 1e-100, 1e-20, 1e-10, 1e-5] {
            let x = std_normal_inv(p);
            let back = std_normal_cdf(x);
            assert!(((back - p) / p).abs() < 1e-12, "p = {p}");
        }
    }
}
