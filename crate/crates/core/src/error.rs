use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The grid is too coarse for the alias-free evaluation contract.
    #[error("grid of {n_grid} points cannot dealias {n_modes} modes (need at least {required})")]
    Dealiasing {
        n_grid: usize,
        n_modes: usize,
        required: usize,
    },

    /// A configuration value is rejected. `key` is the dotted config path.
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// A guaranteed property of the scheme failed at runtime.
    #[error("invariant violated at step {step} (t = {time}): {detail}")]
    Invariant {
        step: usize,
        time: f64,
        detail: String,
    },

    #[error("step count exceeded runaway guard ({limit} steps)")]
    Runaway { limit: usize },

    #[error("resource budget exceeded: {0}")]
    Budget(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error at {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}
