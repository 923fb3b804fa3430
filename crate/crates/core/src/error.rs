use thiserror::Error;

/// Errors shared by every module of the workbench.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Inputs outside the domain of an operation (empty lists, mismatched
    /// column bounds, unknown indices, positions out of range, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("arity mismatch: expected {expected}, found {found}")]
    Arity { expected: usize, found: usize },

    /// A documented precondition did not verify. The message names the
    /// failing clause.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// An exhaustive search or enumeration would exceed its budget.
    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
