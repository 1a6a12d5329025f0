use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} elements, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("baseline channel has zero magnitude; RSSI-ratio is undefined")]
    DegenerateBaseline,

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("exhaustive search limited to {max} elements, got {n}")]
    SizeGuard { n: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
