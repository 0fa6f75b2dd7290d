use thiserror::Error;

use crate::model::RequestId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The document could not be parsed.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// The input is structurally valid but refers to things that do not exist,
    /// or breaks a precondition of the called operation.
    #[error("input error: {0}")]
    Input(String),

    #[error("request {0} is not fully assigned")]
    Unassigned(RequestId),

    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The exact solver refuses instances outside its configured bounds.
    #[error("instance too large for exhaustive search: {0}")]
    OverBudget(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        if err.is_io() {
            return Error::Io(err.into());
        }
        let mut message = err.to_string();
        if let Some(at) = message.rfind(" at line ") {
            message.truncate(at);
        }
        Error::Parse {
            line: err.line(),
            column: err.column(),
            message,
        }
    }
}
