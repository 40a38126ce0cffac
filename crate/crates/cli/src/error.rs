use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ippt_core::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 3 for numerical failures, 2 for everything else (usage,
    /// configuration, domain and file errors).
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numeric() => 3,
            _ => 2,
        }
    }
}
