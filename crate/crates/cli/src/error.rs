use std::fmt;

/// Coarse failure class, reported as the error label and the exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Missing, unreadable or malformed input or configuration.
    Input,
    /// Inputs were readable but an analysis stage could not complete.
    Analysis,
    /// Writing results failed.
    Output,
}

impl ErrorKind {
    pub fn label(self) -> &'static str {
        match self {
            ErrorKind::Input => "input-error",
            ErrorKind::Analysis => "analysis-error",
            ErrorKind::Output => "output-error",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Input => 3,
            ErrorKind::Analysis => 4,
            ErrorKind::Output => 5,
        }
    }
}

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub kind: ErrorKind,
    pub stage: String,
    pub source: anyhow::Error,
}

impl StageError {
    pub fn new(kind: ErrorKind, stage: impl Into<String>, source: impl Into<anyhow::Error>) -> Self {
        StageError { kind, stage: stage.into(), source: source.into() }
    }

    pub fn input(stage: impl Into<String>, source: impl Into<anyhow::Error>) -> Self {
        Self::new(ErrorKind::Input, stage, source)
    }

    pub fn analysis(stage: impl Into<String>, source: impl Into<anyhow::Error>) -> Self {
        Self::new(ErrorKind::Analysis, stage, source)
    }

    pub fn output(stage: impl Into<String>, source: impl Into<anyhow::Error>) -> Self {
        Self::new(ErrorKind::Output, stage, source)
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {:#}", self.kind.label(), self.stage, self.source)
    }
}

impl std::error::Error for StageError {}

pub type StageResult<T> = Result<T, StageError>;

/// Attach a stage and kind to any fallible result.
pub trait StageContext<T> {
    fn stage(self, kind: ErrorKind, stage: &str) -> StageResult<T>;
}

impl<T, E: Into<anyhow::Error>> StageContext<T> for Result<T, E> {
    fn stage(self, kind: ErrorKind, stage: &str) -> StageResult<T> {
        self.map_err(|e| StageError::new(kind, stage, e))
    }
}
