use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("link {link}: {message}")]
    InvalidLink { link: usize, message: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("controller used before initialization")]
    Uninitialized,

    #[error("mass matrix not positive definite (condition estimate {condition:e})")]
    SingularConfiguration { condition: f64 },

    #[error("numerical failure at t = {time} s: {message}")]
    NumericalFailure { time: f64, message: String },

    #[error("degenerate motion: {0}")]
    DegenerateMotion(String),

    #[error("trace: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
