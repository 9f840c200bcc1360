use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    /// A pipeline stopped without a result.
    #[error("run aborted: {0}")]
    Abort(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Abort(_) => 3,
            CliError::Io(_) | CliError::Output(_) => 1,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(vec![msg.into()])
    }
}

impl From<stmcmc::Error> for CliError {
    fn from(e: stmcmc::Error) -> Self {
        use stmcmc::Error as E;
        match e {
            E::InvalidConfig(_) | E::InvalidMarginal(_) | E::InvalidLayout(_) => {
                CliError::config(e.to_string())
            }
            other => CliError::Abort(other.to_string()),
        }
    }
}

impl From<stmcmc_hydro::HydroError> for CliError {
    fn from(e: stmcmc_hydro::HydroError) -> Self {
        CliError::config(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
