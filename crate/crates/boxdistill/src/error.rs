use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box ({x1}, {y1}, {x2}, {y2}): coordinates must be finite with x1 < x2 and y1 < y2")]
    InvalidBox { x1: f64, y1: f64, x2: f64, y2: f64 },

    #[error("box degenerated to zero area after clipping")]
    DegenerateBox,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("proposal set must contain at least one box")]
    EmptyProposalSet,

    #[error("mismatched proposal sets: {0}")]
    MismatchedProposals(String),

    #[error("image {width}x{height} below minimum size {min}x{min}")]
    ImageTooSmall { width: usize, height: usize, min: usize },

    #[error("step {step} exceeds schedule length {total}")]
    StepOutOfRange { step: u64, total: u64 },

    #[error("label vector is not one-hot")]
    NotOneHot,

    #[error("image must contain at least one positive class")]
    NoPositiveClass,

    #[error("parameter {name} = {value} violates requirement: {requirement}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },

    #[error("training diverged: non-finite loss at step {step}")]
    NonFiniteLoss { step: u64 },

    #[error("unknown image id {0:?}")]
    UnknownImageId(String),

    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unsupported image format {0:?} (expected PNG or binary PPM)")]
    UnsupportedImage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image decode: {0}")]
    ImageDecode(String),
}

pub type Result<T> = std::result::Result<T, Error>;
