use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const INPUT_ERROR: i32 = 1;
    pub const INFEASIBLE: i32 = 2;
    pub const PRECONDITION: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    /// The instance parses but does not meet the command's precondition.
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Core(#[from] locc_usd::Error),
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Precondition(_) => exit::PRECONDITION,
            _ => exit::INPUT_ERROR,
        }
    }
}
