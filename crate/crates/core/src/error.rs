use thiserror::Error;

use crate::grid::Space;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("non-positive half extent {value} on axis {axis}")]
    NonPositiveExtent { axis: usize, value: f64 },

    #[error("non-finite value encountered at {coordinate:?}")]
    NonFinite { coordinate: Vec<f64> },

    #[error("expected a {expected:?}-space field, got {found:?}")]
    WrongSpace { expected: Space, found: Space },

    #[error("multiindex has {found} components, expected {expected}")]
    MultiindexLength { expected: usize, found: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("shear offsets do not land on the x3 grid: {0}")]
    ShearMisaligned(String),

    #[error("unsupported multiindex: {0}")]
    UnsupportedMultiindex(String),

    #[error("matrix dimension {dim} exceeds cap {cap}")]
    CapExceeded { dim: usize, cap: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
