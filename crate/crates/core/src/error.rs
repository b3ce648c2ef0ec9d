use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid synthetic spec: {0}")]
    InvalidSynthetic(String),
    #[error("line {line}: {reason}")]
    Unparsable { line: usize, reason: String },
    #[error("no log messages")]
    EmptyCorpus,
    #[error("template {0} does not match the token sequence")]
    TemplateMismatch(u32),
    #[error("template {0} never occurs")]
    UnseenTemplate(u32),
    #[error("context boundaries must satisfy a + b >= 1")]
    EmptyContextWindow,
    #[error("threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("corpus carries no ground-truth labels")]
    MissingTruth,
    #[error("window half-width must be positive")]
    InvalidDelta,
    #[error("ratio q = {0} outside (0, 1); the P/U split is degenerate")]
    DegenerateSplit(f64),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("non-finite activation at {0}")]
    NonFinite(&'static str),
    #[error("training diverged in epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
