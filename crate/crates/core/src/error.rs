use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The Gram system could not be solved even after jitter escalation
    /// and the eigendecomposition fallback.
    #[error("numerically singular Gram matrix (condition estimate {condition_estimate:e})")]
    Solver { condition_estimate: f64 },

    #[error("support collision: atoms {0} and {1} are identical")]
    SupportCollision(usize, usize),

    #[error("statistical test error: {0}")]
    Test(String),

    #[error("{context}: {source}")]
    Trial {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Wraps an error with the trial that produced it.
    pub fn in_trial(self, context: impl Into<String>) -> Self {
        Error::Trial {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
