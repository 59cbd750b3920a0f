use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input is not a finite number or otherwise malformed.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input is finite but outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The inverse problem has no solution within the search range.
    #[error("no solution: {0}")]
    NoSolution(String),

    /// A service tier or plan cannot be supported by the configured resources.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Configuration rejected; `path` names the offending key.
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Io(_) => 4,
            _ => 3,
        }
    }
}
