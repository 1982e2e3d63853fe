use thiserror::Error;

/// Errors raised by representation, reduction, operator and solver routines.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum HtError {
    #[error("dimension tree needs at least two modes, got {0}")]
    TooFewModes(usize),
    #[error("tree mismatch: {0}")]
    TreeMismatch(String),
    #[error("inadmissible rank vector: {0}")]
    InadmissibleRanks(String),
    #[error("representation is not in {0} form")]
    WrongForm(&'static str),
    #[error("dense size {size} exceeds guard {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("wavelet level {0} cannot be represented as a signed 64-bit index")]
    LevelOverflow(u32),
    #[error("no admissible compression level found below {0}")]
    NoCompressionLevel(usize),
    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),
    #[error("malformed representation file: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, HtError>;
