use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Caller violated a precondition (bad length, out-of-range index, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Input is valid but carries no information (e.g. a constant vector
    /// handed to the quantile transform). Callers usually mask instead of
    /// failing.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    /// A quantity that must be positive came out non-positive in floating
    /// point.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),
    /// Every candidate variant at a site was skipped.
    #[error("no testable variant")]
    NoTestableVariant,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
