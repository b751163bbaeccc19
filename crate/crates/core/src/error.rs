use std::path::PathBuf;

use crate::annotate::SpanType;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("instance {qid}: {message}")]
    Validation { qid: String, message: String },

    #[error("no candidate for span type {stype} other than {original:?}")]
    Unsatisfiable { stype: SpanType, original: String },

    #[error("instance {qid}: {message}")]
    Plan { qid: String, message: String },

    #[error("name bank: {0}")]
    NameBank(String),

    #[error("{0}")]
    InvalidInput(String),

    #[error("{failed} of {total} instances failed, above the {:.2}% failure budget; first: {}", budget * 100.0, reasons.first().map(String::as_str).unwrap_or("-"))]
    FailureBudget {
        failed: usize,
        total: usize,
        budget: f64,
        reasons: Vec<String>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.to_string(),
        }
    }
}
