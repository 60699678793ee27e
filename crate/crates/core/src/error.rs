use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for {num_qubits}-qubit register")]
    QubitOutOfRange { index: usize, num_qubits: usize },

    #[error("two-qubit gate targets must be distinct (got {0})")]
    DuplicateTargets(usize),

    #[error("unsupported gate for this operation: {0}")]
    UnsupportedGate(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("register size {0} exceeds the configured qubit cap {1}")]
    QubitCapExceeded(usize, usize),

    #[error("fit failure: {0}")]
    Fit(String),

    #[error("design matrix is rank-deficient over X in [{x_min:.6}, {x_max:.6}]")]
    RankDeficient { x_min: f64, x_max: f64 },

    #[error("no exponential decay in fit window: slope {slope:.3e} >= 0")]
    NoDecay { slope: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
