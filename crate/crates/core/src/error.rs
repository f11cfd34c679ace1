use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FsirError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix not positive definite after ridge escalation (last ridge tried: {ridge:e})")]
    Singular { ridge: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("client {client} excluded: sample size {n} below the minimum {required} for the privacy budget")]
    ClientExcluded {
        client: usize,
        n: usize,
        required: usize,
    },

    #[error("screening selected no variables")]
    ScreeningDegenerate,

    #[error("protocol error from client {client}: {message}")]
    Protocol { client: usize, message: String },

    #[error("run failed: {0}")]
    Run(String),
}

pub type Result<T> = std::result::Result<T, FsirError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(FsirError::InvalidInput(msg.into()))
}
