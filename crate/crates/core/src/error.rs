//! Error type shared by all core modules.

use alloc::string::String;

/// Errors reported by the core algorithms.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoreError {
    /// Incompatible dimensions between operands.
    #[error("shape error: {0}")]
    Shape(String),
    /// An argument is outside its admissible range.
    #[error("value error: {0}")]
    Value(String),
    /// An operation was called in a configuration that forbids it.
    #[error("state error: {0}")]
    State(String),
}

/// Result alias used throughout the crate.
pub type CoreResult<T> = core::result::Result<T, CoreError>;
