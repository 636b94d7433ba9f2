use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("solver failure: {0}")]
    Solver(#[from] magnus_lq::Error),
}

impl CliError {
    /// Process exit code: divergence-type solver failures map to 2,
    /// everything else to 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(e) if e.is_divergence() => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
