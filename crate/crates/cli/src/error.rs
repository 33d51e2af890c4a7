use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] vfd_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 0 ok, 2 config/validation, 3 runtime guard, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => core_code(e),
            CliError::Io { .. } => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

fn core_code(e: &vfd_core::Error) -> i32 {
    use vfd_core::Error::*;
    match e {
        InvalidParameter { .. } | Window(_) => 2,
        Guard(_) | ZeroFundamental | NotSteady { .. } => 3,
        Cell { source, .. } => core_code(source),
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
