use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt input {path}: expected {expected} bytes, found {actual}")]
    CorruptInput {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("unsupported format: {0}")]
    Format(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported frame-rate ratio: {from} fps -> {to} fps (only exact doubling is supported)")]
    UnsupportedRatio { from: f64, to: f64 },

    #[error("{0}")]
    Undefined(String),

    #[error("value {value} outside attainable range [{min}, {max}]")]
    Domain { value: f64, min: f64, max: f64 },

    #[error("encoder failed ({status}): {diagnostics}")]
    EncoderFailure { status: String, diagnostics: String },

    #[error("degenerate rate-distortion data: {0}")]
    DegenerateRd(String),

    #[error("design infeasible: {0}")]
    DesignInfeasible(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("out-of-order vote: expected stimulus {expected} at position {position}, got {got}")]
    Sequence {
        expected: String,
        got: String,
        position: usize,
    },

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("missing reference score for subject {subject}, video {video}, session {session}")]
    MissingReference {
        subject: String,
        video: String,
        session: u32,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown stimulus {id} at line {line}")]
    UnknownStimulus { id: String, line: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
