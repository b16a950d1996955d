//! Error taxonomy shared across the crate.
//!
//! The CLI maps these onto distinct process exit codes (see `cli`), so the
//! variants are grouped by failure category rather than by module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad dimensions, fractions out of range,
    /// unfitted encoders, inconsistent model wiring.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed dataset content, reported with the 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Dataset-level schema violation (e.g. inconsistent embedding width).
    #[error("schema error: {0}")]
    Schema(String),

    /// An operation received input outside its contract.
    #[error("input error: {0}")]
    Input(String),

    /// Non-finite values encountered during numeric computation.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Training diverged or could not proceed.
    #[error("training error at epoch {epoch}, batch {batch}: {msg}")]
    Training {
        epoch: usize,
        batch: usize,
        msg: String,
    },

    /// Anchor selection failed (e.g. no intersection users in the train split).
    #[error("anchor error: {0}")]
    Anchor(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
