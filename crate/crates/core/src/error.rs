use thiserror::Error;

/// Errors raised by the solver, the hierarchy builder and the runtime.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MgritError {
    /// A time step could not be taken.
    #[error("step from t={t_start} to t={t_stop} failed: {reason}")]
    Step {
        t_start: f64,
        t_stop: f64,
        reason: String,
    },

    /// A step failed inside a relaxation or solve; carries where it happened.
    #[error("level {level}, {op} at index {index}: {source}")]
    Propagation {
        level: usize,
        op: &'static str,
        index: usize,
        #[source]
        source: Box<MgritError>,
    },

    /// Buffer or vector shapes do not agree.
    #[error("structural mismatch: expected length {expected}, got {actual}")]
    Structure { expected: usize, actual: usize },

    #[error("invalid time grid: {0}")]
    TimeGrid(String),

    #[error("hierarchy level {level}: {reason}")]
    Hierarchy { level: usize, reason: String },

    #[error("invalid settings: {0}")]
    Settings(String),

    #[error("residual became non-finite at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("transport failure ({context}): {reason}")]
    Transport { context: String, reason: String },

    #[error("invalid decomposition: {0}")]
    Decomposition(String),
}

pub type Result<T> = std::result::Result<T, MgritError>;

impl MgritError {
    pub(crate) fn at(self, level: usize, op: &'static str, index: usize) -> Self {
        MgritError::Propagation {
            level,
            op,
            index,
            source: Box::new(self),
        }
    }
}
