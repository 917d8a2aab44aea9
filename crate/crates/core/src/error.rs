use thiserror::Error;

/// Errors raised by the simulator's numerical modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid OFDM grid: {0}")]
    InvalidGrid(String),

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    /// The requested operation is not defined for this array kind.
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    /// Target collocated with an element, zero gain, and similar.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("decode error: {0}")]
    Decode(String),
}

pub type Result<T> = std::result::Result<T, Error>;
