use thiserror::Error;

/// Run failures, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or unwritable output: exit code 2.
    #[error("{0}")]
    Validation(String),
    /// A numerical routine failed: exit code 3.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<momentum_risk::Error> for CliError {
    fn from(e: momentum_risk::Error) -> Self {
        match e {
            momentum_risk::Error::Io(_) => CliError::Validation(e.to_string()),
            e if e.is_validation() => CliError::Validation(e.to_string()),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Validation(format!("csv output: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("i/o: {e}"))
    }
}
