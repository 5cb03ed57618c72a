use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{what}: series did not converge within {terms} terms")]
    Convergence { what: &'static str, terms: usize },
    #[error("numeric overflow in {0}")]
    Overflow(&'static str),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("interferer matrix of user {user} in block {block} is rank deficient")]
    RankDeficient { user: usize, block: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
