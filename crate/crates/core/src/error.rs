use thiserror::Error;

/// Errors raised by geometry, operator evaluation and the estimation harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point outside the space domain: {0}")]
    OutsideDomain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("antipodal points do not determine a unique geodesic")]
    Antipodal,

    #[error("point is not fixed by the operator (residual {residual:e})")]
    NotFixed { residual: f64 },

    #[error("no usable samples: {0}")]
    EmptySample(String),

    #[error("the fixed-point set is unknown")]
    UnknownFixedSet,

    #[error("the described fixed-point set is empty")]
    EmptyFixedSet,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("insufficient trace: {0}")]
    InsufficientTrace(String),

    #[error("config error at {path}: {reason}")]
    Config { path: String, reason: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for errors that signal an iterate leaving the admissible domain.
    pub fn is_domain_escape(&self) -> bool {
        matches!(self, Error::OutsideDomain(_) | Error::Antipodal)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
