use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("session `{session}` violates invariant: {invariant}")]
    Validation { session: String, invariant: String },

    #[error("unsupported log header {0:?}, expected `#expertise-log v1`")]
    Header(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("session `{session}`: {reason}")]
    Extraction { session: String, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("feature `{0}` has no observed values in the training data")]
    AllMissing(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("model file: {0}")]
    ModelFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable snake_case name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation { .. } => "validation",
            Error::Header(_) => "header",
            Error::EmptyCorpus => "empty_corpus",
            Error::Extraction { .. } => "extraction",
            Error::InvalidInput(_) => "invalid_input",
            Error::AllMissing(_) => "all_missing",
            Error::Fold { source, .. } => source.kind(),
            Error::ModelFile(_) => "model_file",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
