use std::path::PathBuf;

use dch_core::DchError;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },

    #[error("line {line}: key `{key}` given twice")]
    Duplicate { key: String, line: usize },

    #[error("unknown key `{key}`; valid keys are: {valid}")]
    UnknownKey { key: String, valid: String },

    #[error("missing required keys: {keys}")]
    Missing { keys: String },

    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Invalid {
        key: &'static str,
        value: String,
        reason: String,
    },

    #[error("T = {final_time} is not an integer multiple of tau = {tau}")]
    NonIntegerSteps { final_time: f64, tau: f64 },

    #[error(transparent)]
    Solver(DchError),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("solver failed: {0}")]
    Solver(#[from] DchError),

    #[error("{failed} of {total} study rows failed")]
    StudyFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
