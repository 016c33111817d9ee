//! Boosted graph-propagation classifiers for tabular data.
//!
//! Every boosting round searches one similarity graph per (feature,
//! threshold) pair, trains an APPNP weak learner on each under the current
//! sample weights, keeps the lowest weighted error, and weights it SAMME-style.
//!
//! The numeric kernels are generic over [`Real`]; the aliases below fix the
//! scalar for the common cases.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod appnp;
pub mod boost;
pub mod data;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod model_file;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type MatrixF64 = linalg::Matrix<f64>;
pub type MatrixF32 = linalg::Matrix<f32>;
pub type SparseAdjacencyF64 = graph::SparseAdjacency<f64>;
pub type SparseAdjacencyF32 = graph::SparseAdjacency<f32>;
pub type CandidateGraphF64 = graph::CandidateGraph<f64>;
pub type AppnpModelF64 = appnp::AppnpModel<f64>;
pub type AppnpModelF32 = appnp::AppnpModel<f32>;
pub type EnsembleF64 = boost::Ensemble<f64>;
pub type EnsembleF32 = boost::Ensemble<f32>;
