use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("qubit index {index} out of range for {qubits} qubit(s)")]
    QubitIndex { index: usize, qubits: usize },

    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("invalid density matrix at slice {slice}: {reason}")]
    InvalidState { slice: usize, reason: String },

    #[error("amplitude {value} on channel {channel}, slice {slice} exceeds bound {bound}")]
    BoundViolation {
        channel: usize,
        slice: usize,
        value: f64,
        bound: f64,
    },

    #[error("Jacobian is singular at polar angle {theta} (parameters on a pole)")]
    PoleSingularity { theta: f64 },

    #[error("Hamiltonian shift is not in the span of the control channels (residual {residual:.3e})")]
    InfeasibleShift { residual: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
