use thiserror::Error;

/// Errors produced by the signal chain, the ensemble and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("frame length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("length mismatch: expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("input too short: need at least {needed} samples, got {actual}")]
    TooShort { needed: usize, actual: usize },

    #[error("interval [{start}, {end}) does not fit a segment of {segment} samples")]
    IntervalOutOfBounds { start: usize, end: usize, segment: usize },

    #[error("spectrum is not conjugate-symmetric (imaginary residue {0:e})")]
    NonRealSpectrum(f64),

    #[error("training failed: {0}")]
    Training(String),

    #[error("unknown class label {0}")]
    UnknownLabel(i32),

    #[error("malformed model: {0}")]
    Model(String),

    #[error("unsupported format version {found} (this build reads version {supported})")]
    Version { found: String, supported: u32 },

    #[error("line {line}, column {column}: {message}")]
    Schema { line: u64, column: usize, message: String },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("classifier adapter: {0}")]
    Adapter(String),

    #[error("mqtt: {0}")]
    Mqtt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable identifier used by the CLI's machine-parsable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::NotPowerOfTwo(_) => "not_power_of_two",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::TooShort { .. } => "too_short",
            Error::IntervalOutOfBounds { .. } => "interval_out_of_bounds",
            Error::NonRealSpectrum(_) => "non_real_spectrum",
            Error::Training(_) => "training",
            Error::UnknownLabel(_) => "unknown_label",
            Error::Model(_) => "model",
            Error::Version { .. } => "version",
            Error::Schema { .. } => "schema",
            Error::Iteration { .. } => "iteration",
            Error::Adapter(_) => "adapter",
            Error::Mqtt(_) => "mqtt",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
