//! Few-shot anomalous sound detection.
//!
//! Classification-based anomaly scoring on log-mel context windows, trained
//! episodically with prototype losses, meta-learned across auxiliary
//! metadata tasks with Reptile, and regularized with outlier exposure.

pub mod anomaly;
pub mod autodiff;
pub mod benchgen;
pub mod config;
pub mod episodic;
pub mod error;
pub mod eval;
pub mod frontend;
pub mod meta;
pub mod pipeline;
pub mod scalar;

#[cfg(test)]
mod testutil;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;
pub use config::RunConfig;

/// Double-precision instantiations used by the pipeline.
pub type Tensor64 = autodiff::Tensor<f64>;
pub type Graph64 = autodiff::Graph<f64>;
pub type Params64 = autodiff::ParameterVector<f64>;
pub type Prototypes64 = episodic::PrototypeSet<f64>;
pub type Tensor32 = autodiff::Tensor<f32>;
pub type Params32 = autodiff::ParameterVector<f32>;
