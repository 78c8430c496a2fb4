use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("coded data does not fit in the frame budget")]
    BudgetExceeded,
    #[error("corrupt stream: {0}")]
    CorruptStream(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("bad stream header: {0}")]
    BadHeader(&'static str),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
