use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("NaN in input to {0}")]
    NanInput(&'static str),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("{path}: row {row}, column {column}: cannot parse {value:?} as a number")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        value: String,
    },

    #[error("{path}: {message}")]
    Structure { path: PathBuf, message: String },

    #[error("infeasible RSS cycle: pool of {pool} cannot supply K^2 = {needed} distinct candidates")]
    InfeasibleCycle { pool: usize, needed: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("closed form requires margins in {{-1, +1}}; found support value {0} (use Monte Carlo only)")]
    FormulaDomain(f64),

    #[error("base classifier {id}: {source}")]
    Classifier {
        id: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported model format version {0}")]
    Version(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dims(op: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            op,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Stable machine-readable code, printed by the CLI on failure.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "E_DIMENSION",
            Error::NonFinite(_) => "E_NONFINITE",
            Error::InvalidArgument(_) => "E_CONTRACT",
            Error::NanInput(_) => "E_NAN",
            Error::UndefinedCorrelation(_) => "E_UNDEFINED_CORRELATION",
            Error::Parse { .. } => "E_PARSE",
            Error::Structure { .. } => "E_STRUCTURE",
            Error::InfeasibleCycle { .. } => "E_INFEASIBLE",
            Error::Diverged { .. } => "E_DIVERGED",
            Error::FormulaDomain(_) => "E_FORMULA_DOMAIN",
            Error::Classifier { source, .. } => source.code(),
            Error::Version(_) => "E_VERSION",
            Error::Io(_) => "E_IO",
            Error::Json(_) => "E_JSON",
            Error::Csv(_) => "E_CSV",
        }
    }
}
