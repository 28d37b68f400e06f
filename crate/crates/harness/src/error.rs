use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("guard violations, nothing was run:\n  {}", .0.join("\n  "))]
    Guard(Vec<String>),
    #[error("invariant failure: {0}")]
    Invariant(String),
    #[error(transparent)]
    Core(#[from] misspec_core::Error),
}

impl HarnessError {
    /// 1 config or input error, 2 guard violation, 3 invariant failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Parse { .. } | HarnessError::Config(_) | HarnessError::Io { .. } | HarnessError::Csv(_) => 1,
            HarnessError::Guard(_) | HarnessError::Core(misspec_core::Error::GuardExceeded { .. }) => 2,
            HarnessError::Invariant(_) | HarnessError::Core(_) => 3,
        }
    }

    pub(crate) fn parse(path: &str, line: usize, message: impl Into<String>) -> Self {
        HarnessError::Parse { path: path.to_string(), line, message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
