use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] partreg::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    /// The run finished but a checked quantity is out of bounds.
    #[error("check failed: {0}")]
    Check(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;
