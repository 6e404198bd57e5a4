//! Error types shared across the crate.

use alloc::string::String;
use core::fmt;

/// Errors raised by numerical operations and contract checks.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Two quantities that must share a dimension do not.
    DimensionMismatch { expected: usize, got: usize },
    /// An argument violates a documented precondition.
    InvalidArgument(String),
    /// A probe or solve produced a non-finite value. `coordinate` is the
    /// offending component when the failure is attributable to one.
    NumericalFailure {
        context: &'static str,
        coordinate: Option<usize>,
    },
    /// Rank correlation of a constant sequence has zero rank variance.
    UndefinedCorrelation,
    /// A linear system could not be factorized.
    SingularSystem,
    /// A check was invoked outside the hypotheses it assumes; the check
    /// is inapplicable rather than failed.
    HypothesisViolated(String),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            CoreError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            CoreError::NumericalFailure {
                context,
                coordinate,
            } => match coordinate {
                Some(i) => write!(f, "numerical failure in {context} at coordinate {i}"),
                None => write!(f, "numerical failure in {context}"),
            },
            CoreError::UndefinedCorrelation => {
                write!(f, "rank correlation undefined for constant input")
            }
            CoreError::SingularSystem => write!(f, "linear system is singular"),
            CoreError::HypothesisViolated(msg) => write!(f, "hypothesis violated: {msg}"),
        }
    }
}

impl core::error::Error for CoreError {}

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, CoreError>;

pub(crate) fn invalid(msg: impl Into<String>) -> CoreError {
    CoreError::InvalidArgument(msg.into())
}
