use dualcert::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input: flags, config, instance files. Exit code 2.
    #[error("{0}")]
    Validation(String),
    /// The solver itself failed. Exit code 3.
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::InvalidInstance(_) | Error::DimensionMismatch { .. } => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Solver(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
