//! Multifractional Brownian motion: covariance model, exact Gaussian path
//! simulation on grids, Monte Carlo estimation of Pickands/Piterbarg-type
//! constants, and closed-form tail approximations for the supremum.

pub mod asymptotics;
pub mod constants;
pub mod covariance;
pub mod error;
pub mod harness;
pub mod hurst;
pub mod rng;
pub mod sampler;
pub mod special;

pub use error::{Error, Result};
