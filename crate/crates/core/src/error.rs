use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Root bracketing or convergence failure.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Invalid design, rule or run configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// Caller violated an operation's precondition (e.g. asking for an interval after a futility stop).
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Same kind of error with `ctx` prepended to the message.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::Domain(m) => Error::Domain(format!("{ctx}: {m}")),
            Error::Numerical(m) => Error::Numerical(format!("{ctx}: {m}")),
            Error::Config(m) => Error::Config(format!("{ctx}: {m}")),
            Error::Contract(m) => Error::Contract(format!("{ctx}: {m}")),
        }
    }
}
