use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("tolerance must be positive, got {0}")]
    InvalidTol(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no preimage found for lift index {k} at depth {depth}")]
    BranchMiss { k: i64, depth: usize },
    #[error("tail sum over lift indices diverges for t = {0} <= 1")]
    TNotSummable(f64),
    #[error("node budget of {budget} exceeded (partial value {partial})")]
    BudgetExceeded { budget: usize, partial: f64 },
    #[error("no sign change of the pressure found: {trace}")]
    NoBracket { trace: String },
    #[error("requested accuracy {requested} not reached: best estimate {value} with uncertainty {reached}")]
    AccuracyNotReached { requested: f64, reached: f64, value: f64 },
    #[error("continuation step rejected at c = {c}")]
    StepRejected { c: String },
    #[error("|1 - (F^n)'| = {0} too close to zero")]
    DenominatorNearOne(f64),
    #[error("no expansion: observation with |(F^n)'| = {modulus} at n = {n}")]
    NoExpansion { n: usize, modulus: f64 },
    #[error("grid needs at least {needed} points per axis, got {got}")]
    InsufficientGrid { needed: usize, got: usize },
    #[error("{context}: {message}")]
    Io { context: String, message: String },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Error::Io { context: context.into(), message: err.to_string() }
    }
}
