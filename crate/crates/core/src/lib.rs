//! High-frequency U- and V-statistics of discontinuous Itô semimartingales.
//!
//! The crate is organised bottom-up:
//!
//! * [`sim`] simulates paths with stochastic volatility and compound-Poisson
//!   jumps on an equidistant grid and keeps the exact ground truth
//!   (jump times, sizes, spot volatility at the jump).
//! * [`kernels`] describes product-power kernels `|x|^p |y|^q L(x, y)` with
//!   analytic derivatives, Gaussian smoothing `rho` and admissibility checks.
//! * [`stats`] evaluates the discrete statistics, in O(n) whenever the kernel
//!   admits a separable expansion.
//! * [`limits`] evaluates the limit functionals and conditional variances from
//!   ground truth.
//! * [`law`] samples the conditionally Gaussian limit laws.
//! * [`harness`] runs the Monte Carlo experiments and writes reports.

pub mod error;
pub mod harness;
pub mod kernels;
pub mod law;
pub mod limits;
pub mod quad;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod summation;

pub use error::{Error, Result};
