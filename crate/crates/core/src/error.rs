use thiserror::Error;

/// Error type shared by every module in the crate.
///
/// Degenerate theory inputs are rejected with typed errors instead of being
/// mapped to infinities; infinities produced silently would survive into
/// downstream reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} out of range, expected {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("bound is vacuous: {0}")]
    VacuousBound(String),

    #[error("enumeration guard exceeded: |vocab|^max_len = {states:.3e} > {guard:.1e}")]
    EnumerationGuard { states: f64, guard: f64 },

    #[error("token outside vocabulary: {0}")]
    UnknownToken(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("insufficient samples: have {have}, need at least {need}")]
    InsufficientSamples { have: usize, need: usize },

    #[error("undefined quantity: {0}")]
    Undefined(String),

    #[error("schema violation at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("problem {problem_id} is missing its {missing} record")]
    MissingGroupMember {
        problem_id: String,
        missing: &'static str,
    },

    #[error("template mismatch: {0}")]
    TemplateMismatch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that signal a violated theory premise or a vacuous
    /// bound (as opposed to malformed input or I/O trouble).
    pub fn is_premise_error(&self) -> bool {
        matches!(
            self,
            Error::VacuousBound(_) | Error::Degenerate(_) | Error::Undefined(_)
        )
    }
}
