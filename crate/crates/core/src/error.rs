use thiserror::Error;

/// Errors produced by the analysis and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid rule: {0}")]
    InvalidRule(String),

    #[error("invalid rule distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid configuration: field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    /// Some interior states can neither reach 0 nor N.
    #[error("chain has a non-absorbing trapped region at state {0}")]
    Trapped(usize),

    #[error("no usable replicas: {0}")]
    NoSamples(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}
