use std::fmt;

use postsel_core::SimError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Sim(SimError),
}

impl CliError {
    /// 2 for an impossible post-selection, 3 for the memory cap, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Sim(SimError::PostSelectionImpossible(_)) => 2,
            CliError::Sim(SimError::ResourceLimit { .. }) => 3,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Sim(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Sim(e)
    }
}
