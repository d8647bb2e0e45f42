use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad plan, config or arguments. Maps to exit code 2.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] mixbayes_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;
