//! Gaussian-smoothed 1-Wasserstein distance between empirical measures.

// `!(x > 0.0)` is used on purpose so that NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod error;
pub mod exact_ot;
pub mod experiments;
pub mod measures;
pub mod mswe;
pub mod report;
pub mod rng;
pub mod smooth;
pub mod two_sample;

pub use error::{Result, SwdError};
pub use measures::{DiscreteMeasure, DistributionSpec, PointCloud};
pub use rng::Seed;
