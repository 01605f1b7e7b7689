use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The l1 budget `t` admits no feasible point (t < 1, or t > sqrt(n) on the l1 sphere).
    #[error("infeasible l1 budget t = {t} for dimension {n}")]
    InfeasibleBudget { t: f64, n: usize },

    /// Sphere-constrained problem with a zero linear term has no canonical maximizer.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// The root finder was called on a domain where phi does not change sign.
    #[error("branch condition violated: {0}")]
    BranchConditionViolated(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("column {column} is constant and cannot be standardized")]
    DegenerateColumn { column: usize },

    #[error("scheme {0} is not supported by this solver (horst only)")]
    UnsupportedScheme(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable code, used by the CLI error line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::InfeasibleBudget { .. } => "infeasible-budget",
            Error::DegenerateInput(_) => "degenerate-input",
            Error::BranchConditionViolated(_) => "branch-condition-violated",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::DegenerateColumn { .. } => "degenerate-column",
            Error::UnsupportedScheme(_) => "unsupported-scheme",
            Error::Parse { .. } => "parse-error",
            Error::Io { .. } => "io-error",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
