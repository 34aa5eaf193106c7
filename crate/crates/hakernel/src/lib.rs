//! Nonparametric regression through the indicator-basis kernel trick.
//!
//! The dictionary of lower-orthant indicator functions with knots at the
//! training points induces a Gram matrix with closed-form integer entries, so
//! the full feature expansion never has to be materialized. Regression runs
//! in the principal-component coordinates of the (double-centered) Gram
//! matrix, where both the ridge and the soft-threshold lasso solutions are
//! closed-form. Tuning selects the penalty by V-fold cross-validation, the
//! rank by full-sample training error, and the interaction order by a
//! forward search over profiled risks.
//!
//! Modules:
//! - [`data`]: datasets, CSV ingestion, min-max scaling, fold assignment.
//! - [`design`]: the explicit indicator design matrix (test oracle).
//! - [`kernel`]: closed-form Gram and cross-kernel plus centering.
//! - [`spectral`]: eigendecomposition, PC scores, the sine eigensystem.
//! - [`estimators`]: closed-form fits, path thresholds, prediction.
//! - [`tuning`]: cross-validation, selection rules, the fit pipeline.
//! - [`simulate`]: benchmark signal generators and experiment runners.

pub mod data;
pub mod design;
pub mod error;
pub mod estimators;
pub mod kernel;
mod linalg;
pub mod rng;
pub mod simulate;
pub mod spectral;
pub mod tuning;

pub use error::{Error, ErrorClass, Result};
