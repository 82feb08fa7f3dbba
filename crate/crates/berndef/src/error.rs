//! Error taxonomy shared by the whole crate.
//!
//! Three families, mirroring how callers can react: `Input` (the object or
//! parameter itself is malformed — fix the data), `Config` (a name or setting
//! does not resolve — fix the setup), `Resource` (the request is well-formed
//! but exceeds a hard cap such as the exhaustive-enumeration limit).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed sequence, count, probability, or other caller-supplied datum.
    #[error("input: {0}")]
    Input(String),

    /// Unknown provider/test/grid name, non-normalized distribution, or an
    /// otherwise unusable configuration.
    #[error("config: {0}")]
    Config(String),

    /// Request exceeds a documented cap (e.g. exhaustive enumeration bounds).
    #[error("resource: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }
}
