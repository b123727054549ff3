//! Error type shared by all modules.
//!
//! Two classes matter operationally: `Param` (a precondition on the inputs
//! failed; the CLI maps it to exit code 2) and `CostGuard` (the requested
//! computation exceeds a configured loop or memory budget; exit code 3).
//! Guards are always explicit refusals carrying the offending bound, never
//! silent truncations.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the parameters failed.
    #[error("parameter error: {0}")]
    Param(String),

    /// The computation would exceed a configured budget.
    #[error("cost guard: {what} would need {needed}, budget is {budget}")]
    CostGuard {
        what: &'static str,
        needed: u64,
        budget: u64,
    },

    /// Integer overflow in exact arithmetic where skipping is not allowed.
    #[error("overflow: {0}")]
    Overflow(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed external input (bitmask files, certificates).
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }
}
