use thiserror::Error;

/// Failure of a CLI command, mapped to the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Verification(_) => 3,
        }
    }

    /// Prefixes the message with its location, e.g. a row number.
    pub fn context(self, at: impl std::fmt::Display) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{at}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{at}: {m}")),
            CliError::Verification(m) => CliError::Verification(format!("{at}: {m}")),
        }
    }
}

impl From<bcsoftmax::Error> for CliError {
    fn from(e: bcsoftmax::Error) -> Self {
        use bcsoftmax::Error as E;
        match e {
            E::Usage(_) | E::TooLarge(_) => CliError::Usage(e.to_string()),
            E::Internal(_) => CliError::Verification(e.to_string()),
            E::Domain(_) | E::Dimension { .. } | E::Divergence { .. } => {
                CliError::Data(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
