//! Robust estimation and model selection with the exponential-polynomial
//! divergence (EPD).
//!
//! The crate covers the full pipeline:
//!
//! - [`divergence`]: the convex generating function, its derivatives and the
//!   samplewise divergence contribution for Gaussian and discrete models.
//! - [`estimation`]: MLE / minimum-DPD / minimum-EPD fitting of Gaussian linear
//!   regression and the sandwich matrices of the estimator.
//! - [`criteria`]: EPDIC, DPDIC and MLIC plus influence-function scans.
//! - [`tuning`]: selection of `(α, β, γ)` by generalized score matching.
//! - [`simulation`]: seeded contaminated-regression Monte Carlo studies.
//! - [`selection`]: LASSO screening, subset enumeration, consolidated rankings.
//! - [`panel`]: random-intercept linear mixed models.
//! - [`neural`]: small feed-forward classifiers trained under the EPD loss.
//! - [`io`] and [`cli`]: CSV ingestion, result emission and the `epdic` binary.
//!
//! Each capability has a runnable example under `examples/`.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod criteria;
pub mod divergence;
pub mod error;
pub mod estimation;
pub mod io;
pub mod linalg;
pub mod neural;
mod optim;
pub use optim::DESCENT_ROUNDING;
pub mod panel;
pub mod selection;
pub mod simulation;
pub mod tuning;

pub use criteria::{CriterionKind, CriterionReport};
pub use divergence::{DiscreteDensity, TuningTriple, UnivariateGaussian};
pub use error::{Error, Result};
pub use estimation::{EstimatorKind, FitOptions, FitResult, ParamVector, RegressionProblem};

/// Version string written into every run manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
