use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Solver {
        context: String,
        #[source]
        source: gfstack::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Attaches a description of the failing computation to a library error.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for gfstack::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| CliError::Solver { context: what(), source })
    }
}
