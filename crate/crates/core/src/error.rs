use std::path::PathBuf;

use crate::spn::validate::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed or inconsistent tabular input (CSV, schema, labels).
    #[error("{0}")]
    Data(String),

    /// Malformed model document.
    #[error("model: {0}")]
    Model(String),

    #[error("invalid model structure:\n{0}")]
    Invalid(ValidationReport),

    /// A query or sample that does not fit the model schema.
    #[error("query: {0}")]
    Query(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("evaluation-count bound violated: {0}")]
    EvalBound(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than the model.
    pub fn is_data_error(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Data(_) | Error::Query(_))
    }
}
