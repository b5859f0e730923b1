use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Model(#[from] peakref::Error),
    #[error("ConfigError: {0}")]
    Config(String),
    #[error("ParseError: {0}")]
    Parse(String),
    #[error("IoError: {0}")]
    Io(String),
    #[error("verification failed: {}", .0.join(", "))]
    ChecksFailed(Vec<String>),
}

pub type CliResult<T> = std::result::Result<T, CliError>;
