use thiserror::Error;

/// Errors that end a command with exit code 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed instance: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid instance: {0}")]
    Instance(qcqp_exact_core::InstanceError),
    #[error("{0}")]
    Usage(String),
    #[error("oracle: {0}")]
    Oracle(qcqp_exact_core::oracle::OracleError),
    #[error("relaxation: {0}")]
    Relax(qcqp_exact_core::relaxations::RelaxError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
