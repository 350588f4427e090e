use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, malformed or physically invalid configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] cvgauss_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}
