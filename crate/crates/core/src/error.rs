use thiserror::Error;

/// Errors surfaced by the library. Statistical verdicts are never errors;
/// they are reported in the experiment and oracle reports instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid environment spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid oracle instance: {0}")]
    InvalidInstance(String),

    #[error("landmark scan exceeded {limit} indices without finding M_n")]
    ScanBudgetExceeded { limit: u64 },

    #[error("target not reached within {budget} steps")]
    Unreached { budget: u64 },

    #[error("rejection sampler gave up after {attempts} attempts")]
    RejectionBudgetExceeded { attempts: u64 },

    #[error("limit profile tail {tail:e} exceeds tolerance {tol:e}")]
    TailNotConverged { tail: f64, tol: f64 },

    #[error("invalid path: {0}")]
    PathInvalid(String),

    #[error("linear system is singular")]
    SingularSystem,

    #[error("weights out of the representable range at shell {shell}")]
    NumericRange { shell: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
