use iontangle_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Process exit code: 1 for configuration problems, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Numeric(_) | RunError::Io(_) => 2,
        }
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            RunError::Config(m) => RunError::Config(format!("{what}: {m}")),
            RunError::Numeric(m) => RunError::Numeric(format!("{what}: {m}")),
            other => other,
        }
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Input(_) => RunError::Config(e.to_string()),
            _ => RunError::Numeric(e.to_string()),
        }
    }
}
