//! Signature-kernel ratio estimation for simulation-based inference on time
//! series.

pub mod error;
pub mod classifier;
pub mod kernels;
pub mod metrics;
pub mod nystroem;
pub mod rng;
pub mod samplers;
pub mod series;
pub mod simulators;

pub use error::{Error, Result};
pub use series::{Dataset, ParameterVector, TimeSeries};
