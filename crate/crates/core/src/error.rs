use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("position {position} is out of range for track width {width}")]
    OutOfBounds { position: usize, width: usize },

    #[error("illegal move: action {action} from position {position} at tick {tick} leaves the track")]
    IllegalMove {
        position: usize,
        tick: u64,
        action: i32,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite target at row {row}")]
    NonFiniteTarget { row: usize },

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("discount must lie in [0, 1), got {0}")]
    InvalidDiscount(f64),

    #[error("sequence too short: need at least {needed} entries, got {got}")]
    SequenceTooShort { needed: usize, got: usize },

    #[error("oracle normalizer is not positive over the requested window")]
    ZeroNormalizer,

    #[error("oracle table does not match the environment: {0}")]
    TableMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error("malformed value for `{key}`: {value}")]
    BadValue { key: String, value: String },

    #[error("model snapshot is corrupt or from an unsupported version: {0}")]
    BadSnapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad user configuration rather than runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::UnknownKey(_)
                | Error::UnknownAlgorithm(_)
                | Error::BadValue { .. }
        )
    }
}
