use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("angle {0} rad is outside [0, pi]")]
    AngleOutOfRange(f64),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("beam window is empty")]
    EmptyWindow,
    #[error("beam window of {len} indices exceeds the transform size {size}")]
    WindowTooLong { len: usize, size: usize },
    #[error("{got} RF chains cannot serve {users} users")]
    TooFewRfChains { got: usize, users: usize },
    #[error("pilot matrix is not unitary")]
    NonUnitaryPilot,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix inversion failed")]
    Singular,
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
