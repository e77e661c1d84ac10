use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max |M - M^H| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid {name}: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("degenerate spectrum: {0}")]
    Degenerate(String),

    #[error("resonant parameter c = {c:e} is inadmissible: must be < delta_min = {delta_min:e}")]
    Inadmissible { c: f64, delta_min: f64 },

    #[error("post-selection failed: success probability {probability:e} below threshold")]
    PostSelectionFailed { probability: f64 },

    #[error("state is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("non-finite loss at sample {sample}")]
    NonFinite { sample: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
