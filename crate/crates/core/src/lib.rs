//! Conformal prediction for time series: calibration, finite-sample
//! dependence coefficients, coverage bounds and the experiments that check
//! them.

pub mod bounds;
pub mod conformal;
pub mod dependence;
pub mod error;
pub mod harness;
pub mod process;
pub mod quantile;
pub mod scoring;
pub mod verify;

pub use error::{Error, Result};
