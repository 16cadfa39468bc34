use thiserror::Error;

/// Errors raised by the witness toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: local dimension must be at least 2")]
    InvalidDimension(usize),

    #[error("{name} = {value} is outside the allowed range [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("invariant `{invariant}` violated: measured deviation {deviation:e} exceeds tolerance {tolerance:e}")]
    InvariantViolation {
        invariant: &'static str,
        deviation: f64,
        tolerance: f64,
    },

    #[error("operator is not Hermitian: Tr[op rho] has imaginary part {0:e}")]
    NonHermitianOperator(f64),

    #[error("invalid observable: {0}")]
    InvalidObservable(String),

    #[error("invalid sample set: {0}")]
    InvalidSamples(String),

    #[error("correlation table is missing entries: {}", .0.join(", "))]
    MissingEntries(Vec<String>),

    #[error("sign-vector enumeration refused for d = {d} (limit {limit}); use the heuristic optimizer")]
    EnumerationBudget { d: usize, limit: usize },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors that indicate a broken internal invariant rather than
    /// bad user input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
