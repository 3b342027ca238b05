use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent user input.
    #[error("input error: {0}")]
    Input(String),
    /// Argument outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("size cap exceeded: {what} needs {needed}, cap is {cap}")]
    SizeCap { what: String, needed: f64, cap: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn size_cap(what: impl Into<String>, needed: f64, cap: f64) -> Self {
        Error::SizeCap { what: what.into(), needed, cap }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
