use std::path::PathBuf;

use stigsim_core::engine::ConfigError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: CONFIG_INVALID at `{field}`: {message}")]
    Parse {
        file: PathBuf,
        field: String,
        message: String,
    },
    #[error("{file}: {error}")]
    Invalid {
        file: PathBuf,
        error: ConfigErrorDisplay,
    },
    #[error("comparison needs at least 2 styles, config lists {0}")]
    CompareNeedsStyles(usize),
    #[error("unknown template `{name}`; available: {}", known.join(", "))]
    UnknownTemplate {
        name: String,
        known: Vec<&'static str>,
    },
    #[error("malformed digest file {path}: {reason}")]
    DigestFile { path: PathBuf, reason: String },
    #[error("malformed trace line {line}: {reason}")]
    Trace { line: usize, reason: String },
    #[error("STIGSIM_SEED_OVERRIDE must be an unsigned integer, got `{0}`")]
    SeedOverride(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// [`ConfigError`] as a std error.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct ConfigErrorDisplay(pub ConfigError);

impl Error {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
