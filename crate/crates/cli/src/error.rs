use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("acceptance check failed: {0}")]
    Check(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) | Self::Io(_) => 1,
            Self::Check(_) => 2,
            Self::Solver(_) => 3,
        }
    }
}

impl From<l1bound::Error> for CliError {
    fn from(e: l1bound::Error) -> Self {
        use l1bound::Error as E;
        match e {
            E::NonConvergence(_) => Self::Solver(e.to_string()),
            E::Io(io) => Self::Io(io),
            other => Self::Validation(other.to_string()),
        }
    }
}
