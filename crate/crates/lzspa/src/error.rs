use thiserror::Error;

/// Errors produced by the library.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("alphabet size must be at least 2, got {0}")]
    AlphabetTooSmall(u32),
    #[error("symbol {symbol} out of range for alphabet of size {alphabet_size}")]
    SymbolOutOfRange { symbol: u32, alphabet_size: u32 },
    #[error("alphabet mismatch: expected size {expected}, got {got}")]
    AlphabetMismatch { expected: u32, got: u32 },
    #[error("sequence must be non-empty")]
    EmptySequence,
    #[error("gamma must be strictly positive, got {0}")]
    InvalidGamma(f64),
    #[error("not a valid probability vector: {0}")]
    InvalidPmf(String),
    #[error("markov order {k} must be smaller than the sequence length {n}")]
    OrderTooLarge { k: usize, n: usize },
    #[error("model is frozen")]
    ModelFrozen,
    #[error("model must be frozen first")]
    ModelNotFrozen,

    // Serialized model / encoded stream errors.
    #[error("bad magic bytes; not a recognized file")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("byte stream truncated")]
    Truncated,
    #[error("checksum mismatch")]
    ChecksumMismatch,
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("encoded stream was produced by a different model")]
    ModelHashMismatch,
    #[error("symbol has zero probability under the model")]
    ZeroProbabilitySymbol,

    // Classification.
    #[error("classification requires at least two classes")]
    SingleClass,
    #[error("class {0:?} has no training sequences")]
    EmptyClass(String),
    #[error("gamma grid must be non-empty")]
    EmptyGrid,
    #[error("validation split is empty for class {0:?}")]
    EmptyValidationSplit(String),

    // Filtering.
    #[error("channel matrix is not left-invertible: {0}")]
    ChannelNotInvertible(String),
    #[error("channel row {0} is not a probability vector")]
    ChannelRowNotPmf(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("observed symbol has zero probability under the predicted law")]
    ZeroProbabilityObservation,
    #[error("loss matrix entries must be non-negative")]
    NegativeLoss,
    #[error("monte carlo sample budget must be at least 1")]
    InvalidSampleBudget,
    #[error("delay/lookahead window does not fit the sequence")]
    WindowTooLarge,
    #[error("source is not a first-order Markov specification")]
    NotMarkovSource,

    // Evaluation.
    #[error("state space too large for exhaustive enumeration: A^n = {0} states")]
    StateSpaceTooLarge(f64),
    #[error("histogram length mismatch: {a} vs {b}")]
    HistogramLengthMismatch { a: usize, b: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
