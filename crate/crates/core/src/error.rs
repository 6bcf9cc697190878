use thiserror::Error;

/// Errors raised by group computations and the structure pipelines.
///
/// `Hypothesis` marks a mathematical precondition that the input does not
/// satisfy; it is a legitimate outcome. `Bug` marks a verification failure of
/// something that should be a theorem, and always indicates a defect.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("element does not belong to context {0}")]
    CrossContext(String),
    #[error("enumeration cap exceeded while computing {what}: reached {reached} (cap {cap})")]
    CapExceeded {
        what: String,
        reached: usize,
        cap: usize,
    },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("search exhausted: {0}")]
    SearchExhausted(String),
    #[error("family exhausted: {0}")]
    FamilyExhausted(String),
    #[error("verification failure (bug): {0}")]
    Bug(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn cap(what: impl Into<String>, reached: usize, cap: usize) -> Self {
        Error::CapExceeded {
            what: what.into(),
            reached,
            cap,
        }
    }

    /// Prefixes the message with the pipeline stage, keeping the kind.
    pub fn in_stage(self, stage: &str) -> Self {
        let tag = |m: String| format!("[{stage}] {m}");
        match self {
            Error::Malformed(m) => Error::Malformed(tag(m)),
            Error::Unsupported(m) => Error::Unsupported(tag(m)),
            Error::CrossContext(m) => Error::CrossContext(tag(m)),
            Error::CapExceeded { what, reached, cap } => Error::CapExceeded { what: tag(what), reached, cap },
            Error::Hypothesis(m) => Error::Hypothesis(tag(m)),
            Error::SearchExhausted(m) => Error::SearchExhausted(tag(m)),
            Error::FamilyExhausted(m) => Error::FamilyExhausted(tag(m)),
            Error::Bug(m) => Error::Bug(tag(m)),
        }
    }
}
