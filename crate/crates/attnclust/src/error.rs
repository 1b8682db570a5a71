//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible or unsupported dimensions (e.g. more centroids than axes).
    #[error("dimension error: {0}")]
    Dimension(String),
    /// An operation that needs at least one token received none.
    #[error("empty sequence: {0}")]
    EmptySequence(String),
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A structurally invalid argument (missing vector, size mismatch, ...).
    #[error("invalid argument: {0}")]
    Argument(String),
    /// An invalid optimizer or experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// A numerical failure inside an optimizer step.
    #[error("step error: {0}")]
    Step(String),
}

pub type Result<T> = std::result::Result<T, Error>;
