//! Analytical propagation of Gaussian timing uncertainty through resources
//! that serve one robot at a time, with the probability, ranking, conditioning
//! and allocation machinery built on it.
//!
//! Numerical building blocks (Gaussian algebra, error functions, conditioning,
//! pairwise order probabilities) are generic over [`Scalar`] and work in both
//! `f32` and `f64`; the higher-level pipeline works in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod allocation;
pub mod calibration;
pub mod contention;
pub mod error;
pub mod gaussian;
pub mod mc;
pub mod order;
pub mod order_prob;
pub mod order_rank;
pub mod orthant;
pub mod scalar;
pub mod special;
pub mod truncation;

pub use calibration::{calibrate_rule, CalibratedRule};
pub use contention::{
    fifo_timeline, propagate_fifo, propagate_specified, ArrivalProcess, TimelineResult,
};
pub use error::{Error, Result};
pub use gaussian::{clark_max, clark_max_n, expected_tardiness, gauss_sum, Gaussian};
pub use order::{all_orders, neighbor_orders, Order};
pub use order_prob::{
    build_difference_mvn, estimate_order_probability, order_probability, pairwise_before_prob,
    prune_orders,
};
pub use order_rank::{
    enumerate_likely_orders, most_likely_order, OrderEnumeration, ProbabilityBackend, RankingMode,
};
pub use orthant::{mvn_orthant_prob, MvnSpec, OrthantOptions};
pub use scalar::Scalar;
pub use truncation::{condition_between, condition_on_order, ConditionBound, ConditioningStrategy};

pub type GaussianF32 = Gaussian<f32>;
pub type GaussianF64 = Gaussian<f64>;
