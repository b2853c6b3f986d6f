use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("box too crowded: could not place {n_balls} balls in {attempts} attempts")]
    BoxTooCrowded { n_balls: usize, attempts: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("truncated payload while reading {0}")]
    Truncated(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("diverged: non-finite value at optimizer step {step}")]
    Diverged { step: usize },

    #[error("sequence too short: {len} frames, need at least {needed}")]
    SequenceTooShort { len: usize, needed: usize },

    #[error("unsupported architecture: {0}")]
    UnsupportedArchitecture(String),

    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),

    #[error("unknown hyperparameter axis {0:?}")]
    UnknownAxis(String),

    #[error("image encoding failed: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by malformed or incompatible input data files.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::BadMagic { .. }
                | Error::Truncated(_)
                | Error::DimensionMismatch(_)
                | Error::SequenceTooShort { .. }
                | Error::Checkpoint(_)
                | Error::Io(_)
        )
    }
}
