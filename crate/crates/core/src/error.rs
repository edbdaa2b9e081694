use thiserror::Error;

/// Errors produced by corpus ingestion, analytics, and filter evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("trace {trace_id}: {message}")]
    InvalidTrace { trace_id: String, message: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("{0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("logistic fit did not converge: gradient norm {grad_norm:e} after {iterations} iterations")]
    NonConvergence { grad_norm: f64, iterations: usize },

    #[error("question leakage: {question_id} appears in the training set")]
    Leakage { question_id: String },
}

impl Error {
    pub(crate) fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }

    pub(crate) fn invalid_trace(trace_id: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidTrace {
            trace_id: trace_id.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
