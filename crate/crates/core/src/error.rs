use thiserror::Error;

/// Errors surfaced by parsing, validation and the simulators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown class {class} at line {line}")]
    UnknownClass { line: usize, class: usize },

    #[error("invalid weight table: {0}")]
    InvalidWeights(String),

    #[error("infeasible schedule at time {time}: {msg}")]
    Infeasible { time: usize, msg: String },

    #[error("repeat property violated: positions {t1} and {t2} share value {value} but {missing} is absent between them")]
    RepeatViolation {
        t1: usize,
        t2: usize,
        value: usize,
        missing: usize,
    },

    #[error("instance exceeds the brute-force budget: {0}")]
    BudgetExceeded(String),

    #[error("monitor violation at event {event}: {msg}")]
    MonitorViolation { event: usize, msg: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
