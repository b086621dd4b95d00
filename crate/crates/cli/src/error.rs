use thiserror::Error;

/// CLI failure with a scriptable exit code: 2 config, 3 precondition,
/// 4 budget/feasibility, 1 anything else.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Budget(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<branchsim::Error> for CliError {
    fn from(e: branchsim::Error) -> Self {
        use branchsim::Error as E;
        match e {
            E::Budget { .. } | E::Stagnation { .. } | E::SizeCap { .. } | E::Infeasible { .. } => {
                CliError::Budget(e.to_string())
            }
            other => CliError::Precondition(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
