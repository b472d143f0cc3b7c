use thiserror::Error;

/// Error families, mapped one-to-one onto CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorFamily {
    Config,
    Numerical,
    Validation,
}

impl ErrorFamily {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorFamily::Config => 1,
            ErrorFamily::Numerical => 2,
            ErrorFamily::Validation => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid scenario: {invariant}: {detail}")]
    InvalidScenario {
        invariant: &'static str,
        detail: String,
    },

    #[error("CFL violation: dt = {dt:e} exceeds limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("non-finite value in wave field at step {step}")]
    NonFinite { step: usize },

    #[error("conjugate gradients did not converge: relative residual {residual:e} after {iterations} iterations")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("indefinite system: coefficient {value:e} at cell {cell} is not positive")]
    Indefinite { cell: usize, value: f64 },

    #[error("shape mismatch: expected {expected} cells, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("kernel singular at the origin in three dimensions")]
    KernelSingular,

    #[error("point lies inside the closed ball (|x - p| = {distance} <= {radius})")]
    InsideBall { distance: f64, radius: f64 },

    #[error("log-space underflow: {0}")]
    Underflow(String),

    #[error("too few indicator samples: {0}")]
    TooFewSamples(String),

    #[error("bound violated: {0}")]
    BoundViolation(String),

    #[error("contraction ratio {ratio} exceeds bound {bound}")]
    ContractionRatio { ratio: f64, bound: f64 },

    #[error("validation check `{check}` failed: {detail}")]
    CheckFailed { check: String, detail: String },

    #[error("missing data: {0}")]
    MissingData(String),
}

impl Error {
    pub fn family(&self) -> ErrorFamily {
        match self {
            Error::Parse { .. } | Error::Io { .. } | Error::InvalidScenario { .. } => {
                ErrorFamily::Config
            }
            Error::Cfl { .. }
            | Error::NonFinite { .. }
            | Error::NoConvergence { .. }
            | Error::Indefinite { .. }
            | Error::Shape { .. }
            | Error::KernelSingular
            | Error::InsideBall { .. }
            | Error::Underflow(_)
            | Error::TooFewSamples(_)
            | Error::MissingData(_) => ErrorFamily::Numerical,
            Error::BoundViolation(_)
            | Error::ContractionRatio { .. }
            | Error::CheckFailed { .. } => ErrorFamily::Validation,
        }
    }

    pub(crate) fn invalid(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidScenario {
            invariant,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
