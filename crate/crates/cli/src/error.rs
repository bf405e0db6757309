use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Core(#[from] sfdma_core::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for bad input, 3 for numeric divergence, 4 for infeasible targets.
    pub fn exit_code(&self) -> i32 {
        use sfdma_core::Error as E;
        match self {
            CliError::Core(E::Infeasible { .. }) => 4,
            CliError::Core(E::Divergence { .. } | E::NonFinite(_)) => 3,
            _ => 2,
        }
    }
}
