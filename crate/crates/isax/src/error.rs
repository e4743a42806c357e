use thiserror::Error;

/// Errors reported by the library.
///
/// Contract violations with no sensible recovery (mismatched slice lengths,
/// cardinality ordering in prefix checks) panic instead; they are documented
/// on the functions that check them.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (segment count, leaf capacity, cardinality cap...).
    #[error("configuration: {0}")]
    Config(String),

    /// A file did not match the expected layout or is inconsistent.
    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
