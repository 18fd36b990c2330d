//! Multi-distribution conformal prediction.
//!
//! Prediction sets that keep `1 - alpha` coverage simultaneously for each of
//! `K` data sources, built by max-p aggregation of per-source conformal
//! p-values. Efficiency comes from a shared score
//! `s(x, y) = -sum_k lambda_k(x) f_k(y|x)` whose multipliers are learned by
//! maximising an empirical dual objective over a softplus-spline family.
//!
//! Modules:
//! - [`data`]: multi-source datasets, splitting, CSV I/O
//! - [`models`]: boosted-tree classifiers and Gaussian plug-in regressors
//! - [`conformal`]: p-values, max-p sets, randomized quantiles
//! - [`dualopt`]: spline basis, multiplier training, penalty tuning
//! - [`oracle`]: exact dual/primal solvers and certificates for discrete instances
//! - [`regsets`]: grid-search interval unions for regression
//! - [`dgp`]: synthetic simulation suites
//! - [`harness`]: end-to-end experiment runs and reports

pub mod conformal;
pub mod data;
pub mod dgp;
pub mod dualopt;
pub mod error;
pub mod harness;
pub mod models;
pub mod oracle;
pub mod persist;
pub mod regsets;
pub mod rng;

pub use error::{MdcpError, Result};
