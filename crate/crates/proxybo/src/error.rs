//! Crate-wide error type.

/// Convenience alias used by every fallible operation in the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by search-space handling, model fitting, benchmark I/O,
/// and the search engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A search-space description was structurally invalid.
    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    /// An encoding does not belong to the space it was used with.
    #[error("encoding `{encoding}` does not belong to space `{space}`")]
    EncodingMismatch { encoding: String, space: String },

    /// Refused to enumerate a space larger than the requested cap.
    #[error("space holds {size} encodings, above the enumeration cap of {cap}")]
    SpaceTooLarge { size: u128, cap: u128 },

    /// A tensor had the wrong shape for the network layer it was fed to.
    #[error("shape mismatch at layer {layer}: {message}")]
    ShapeMismatch { layer: usize, message: String },

    /// A forward or backward pass produced a non-finite value.
    #[error("non-finite value at layer {layer} during {phase}")]
    NonFinite { layer: usize, phase: &'static str },

    /// A model was asked to fit or predict with too little data.
    #[error("model needs at least {needed} observations, got {got}")]
    ModelUnfit { needed: usize, got: usize },

    /// Two paired slices disagreed in length.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// A rank statistic was requested for a constant input vector.
    #[error("rank correlation is undefined for a constant input")]
    ConstantInput,

    /// A caller violated a documented numeric precondition.
    #[error("invalid value: {0}")]
    InvalidValue(String),

    /// A benchmark table file failed to parse.
    #[error("benchmark table line {line}: {message}")]
    TableFormat { line: usize, message: String },

    /// A benchmark lookup missed: the encoding has no recorded metrics.
    #[error("no benchmark entry for encoding `{0}`")]
    MissingEntry(String),

    /// A proxy column was requested that not every table row carries.
    #[error("proxy column `{name}` is missing for {missing} of {total} table rows")]
    MissingProxyColumn {
        name: String,
        missing: usize,
        total: usize,
    },

    /// Every encoding in the space has already been evaluated.
    #[error("search space exhausted: every encoding has been evaluated")]
    SearchComplete,

    /// Synthetic proxy calibration could not reach its target correlation.
    #[error(
        "proxy calibration failed for target {target}: best Spearman {achieved} after {iters} iterations"
    )]
    CalibrationFailed {
        target: f64,
        achieved: f64,
        iters: usize,
    },

    /// An underlying file operation failed.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
