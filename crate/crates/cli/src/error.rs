use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] pairwise_rkhs::Error),
}

impl CliError {
    /// 1 for bad input or unsupported requests, 3 for failed numeric post-checks.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(pairwise_rkhs::Error::Numeric(_)) => 3,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn input<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Input(msg.into()))
}
