use std::path::PathBuf;

use crate::color::ColorState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("expected an image in state {expected}, got {found}")]
    StateMismatch {
        expected: &'static str,
        found: ColorState,
    },

    #[error("color matrix is singular (|det| = {0:e})")]
    SingularMatrix(f64),

    #[error("illuminant components must be finite and positive, got {0:?}")]
    InvalidIlluminant([f64; 3]),

    #[error("window {x0},{y0} {w}x{h} does not fit a {width}x{height} image")]
    OutOfBounds {
        x0: usize,
        y0: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },

    #[error("crop origin ({x0},{y0}) is not aligned to the {tile_w}x{tile_h} CFA tile")]
    PhaseMisaligned {
        x0: usize,
        y0: usize,
        tile_w: usize,
        tile_h: usize,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("{0} is not supported for the {1} pattern")]
    UnsupportedCfa(&'static str, &'static str),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("checkpoint: bad magic header")]
    BadMagic,

    #[error("checkpoint: format version {found} does not match supported version {expected}")]
    VersionMismatch { found: u16, expected: u16 },

    #[error("file truncated while reading {0}")]
    Truncated(&'static str),

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
