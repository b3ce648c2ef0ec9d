use std::io;
use std::path::PathBuf;

/// Pipeline failures, grouped by the exit code they map to.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("data: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Core(#[from] loglab_core::Error),
}

impl PipelineError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        PipelineError::Io { path: path.into(), source }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        PipelineError::Data(msg.into())
    }

    /// 2 usage/config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> u8 {
        use loglab_core::Error as E;
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => 2,
            PipelineError::Io { .. } | PipelineError::Data(_) => 3,
            PipelineError::Numeric(_) => 4,
            PipelineError::Core(e) => match e {
                E::InvalidConfig(_) | E::InvalidThreshold(_) | E::EmptyContextWindow | E::InvalidDelta | E::InvalidSynthetic(_) => 2,
                E::NonFinite(_) | E::Diverged { .. } => 4,
                _ => 3,
            },
        }
    }
}

impl From<csv::Error> for PipelineError {
    fn from(e: csv::Error) -> Self {
        PipelineError::Data(e.to_string())
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;
