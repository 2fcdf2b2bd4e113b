use thiserror::Error;

use crate::qmath::Label;
use crate::tomography::Basis;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Pauli index {0} is out of range (expected 0..=3)")]
    PauliIndex(usize),

    #[error("rotation angle {0} is not finite")]
    NonFiniteAngle(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("unsupported size: {0} qubits (at most 4 are supported)")]
    TooManyQubits(usize),

    #[error("unknown qubit label {0:?}")]
    UnknownLabel(Label),

    #[error("qubit label {0:?} appears more than once")]
    DuplicateLabel(Label),

    #[error("keep set for a partial trace must be nonempty")]
    EmptyKeep,

    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("operator flagged unitary fails U^dag U = I")]
    NotUnitary,

    #[error("projector is not idempotent")]
    NotIdempotent,

    #[error("observable is not Hermitian")]
    NotHermitian,

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("invalid process matrix: {0}")]
    InvalidProcess(String),

    #[error("{name} = {value} lies outside [0, 1]")]
    Probability { name: &'static str, value: f64 },

    #[error("expected {expected} qubits labelled {labels:?}")]
    WrongLabels { expected: usize, labels: Vec<Label> },

    #[error("no herald after {attempts} attempts (cap {cap})")]
    AttemptCapExceeded { attempts: u64, cap: u64 },

    #[error("gate probability is zero; waiting time is unbounded")]
    ZeroGateProbability,

    #[error("input state {state}: no counts for basis {basis}")]
    MissingBasis { state: String, basis: Basis },

    #[error("input state {state}: basis {basis} has zero shots")]
    ZeroShots { state: String, basis: Basis },

    #[error("shots per basis must be positive")]
    NoShots,

    #[error("process tomography needs all six basis inputs; missing {0}")]
    MissingInput(String),

    #[error("input state {0} appears more than once")]
    DuplicateInput(String),

    #[error("unknown input state label {0:?}")]
    UnknownInput(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
