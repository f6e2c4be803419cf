use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("series did not converge within {terms} terms")]
    NonConvergence { terms: usize },

    #[error("design matrix is singular or rank deficient: {0}")]
    SingularDesign(String),

    #[error("fit did not converge; sandwich matrices require a converged fit")]
    NotConverged,

    #[error("matrix is not positive definite: {0}")]
    NonPositiveDefinite(String),

    #[error("estimator/criterion mismatch: {0}")]
    KindMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("no grid point produced a converged fit")]
    AllPointsFailed,

    #[error("too many candidate covariates: {got} (cap {cap})")]
    TooManyCovariates { got: usize, cap: usize },

    #[error("empty active set at lambda = {lambda}; try a smaller penalty")]
    EmptyActiveSet { lambda: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index {index} out of range for support of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{failed} of {total} replications failed (limit 10%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    DivergentLoss { epoch: usize },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("missing value in column `{column}` at row {row}")]
    MissingCell { column: String, row: usize },

    #[error("non-numeric cell `{value}` in column `{column}` at row {row}")]
    NonNumericCell {
        column: String,
        row: usize,
        value: String,
    },

    #[error("file contains no data rows")]
    EmptyFile,

    #[error("unbalanced panel: {0}")]
    UnbalancedPanel(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
