use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Gaussian: mean {mean}, variance {variance}")]
    InvalidGaussian { mean: f64, variance: f64 },

    #[error("operation requires a non-empty list")]
    Empty,

    #[error("lower bound mean {lower} is not below upper bound mean {upper}")]
    BoundsOutOfOrder { lower: f64, upper: f64 },

    #[error(
        "negligible-probability condition: b = N({b_mean}, {b_var}), lower = {lower:?}, upper = {upper:?}"
    )]
    NegligibleProbability {
        b_mean: f64,
        b_var: f64,
        lower: Option<(f64, f64)>,
        upper: Option<(f64, f64)>,
    },

    #[error("conditioned variance is not positive ({variance})")]
    DegenerateConditioning { variance: f64 },

    #[error("both bounds have zero spread")]
    ZeroSpread,

    #[error("truncation window [{a}, {b}] has zero probability mass")]
    EmptyWindow { a: f64, b: f64 },

    #[error("means are identical, the truncated densities coincide")]
    IdenticalMeans,

    #[error("invalid window: a = {a} must be below b = {b}")]
    InvalidWindow { a: f64, b: f64 },

    #[error("sequence is not a permutation of 0..{len}")]
    InvalidOrder { len: usize },

    #[error("order of length {order} does not match {arrivals} arrivals")]
    LengthMismatch { order: usize, arrivals: usize },

    #[error("difference transform needs at least two arrivals, got {0}")]
    TooFewArrivals(usize),

    #[error("covariance matrix is not positive semi-definite (pivot {pivot} at row {row})")]
    NotPositiveSemiDefinite { row: usize, pivot: f64 },

    #[error("standard deviations differ; ranking guarantee needs equal spreads or heuristic mode")]
    UnequalSpread,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cost matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("cost matrix entry ({row}, {col}) is not finite")]
    NonFiniteCost { row: usize, col: usize },

    #[error("invalid rule file: {0}")]
    RuleFormat(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
