use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("signal too short: {len} timesteps, need at least {width}")]
    SignalTooShort { len: usize, width: usize },

    #[error("invalid configuration `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("need at least 2 participants, found {0}")]
    NotEnoughParticipants(usize),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("participant {participant} has {have} windows, need {need}")]
    InsufficientWindows {
        participant: u32,
        have: usize,
        need: usize,
    },

    #[error("class `{class}` frequency {freq_hz} Hz is not below Nyquist ({nyquist_hz} Hz)")]
    AboveNyquist {
        class: String,
        freq_hz: f64,
        nyquist_hz: f64,
    },

    #[error("window of {window} samples is longer than signal of {len}")]
    WindowTooLong { window: usize, len: usize },

    #[error("COLA violation: zero window energy at sample {position}")]
    ColaViolation { position: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("undefined cosine: zero-magnitude vector")]
    UndefinedCosine,

    #[error("undefined correlation: constant vector")]
    UndefinedCorrelation,

    #[error("axis-count mismatch: {left} vs {right}")]
    AxisMismatch { left: usize, right: usize },

    #[error("scoring pair ({i}, {j}): {source}")]
    PairScore {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty sequence")]
    EmptySequence,

    #[error("oracle limit: sequences of length {n} x {m} exceed 8 x 8")]
    OracleLimit { n: usize, m: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("stale forward cache: parameters changed since the forward pass")]
    StaleCache,

    #[error("diverged: non-finite {0}")]
    Diverged(&'static str),

    #[error("diffusion step {t} outside 1..={max}")]
    StepOutOfRange { t: usize, max: usize },

    #[error("sampling run already finished")]
    SamplingFinished,

    #[error("all {0} probe sequences are degenerate")]
    DegenerateBatch(usize),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("need at least 2 classes to train a classifier")]
    SingleClass,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

/// Attaches a context string to the error branch of a result.
pub trait ResultExt<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| e.context(context()))
    }
}
