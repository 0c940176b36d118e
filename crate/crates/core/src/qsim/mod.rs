//! Exact pure-branch simulation over named registers.

mod bits;
mod density;
mod ensemble;
pub mod gates;
mod layout;
mod state;

pub use bits::{Bits, ParseBitsError};
pub use density::{trace_distance, DensityView};
pub use ensemble::{cq_trace_distance, Basis, CqEnsemble, Labels, PureBranch, BRANCH_PRUNE};
pub use layout::{RegEntry, RegKind, RegisterLayout, DEFAULT_MAX_QUANTUM_WIDTH};
pub use state::{deposit, gather, sub_index, SparseState, AMP_EPS, MAX_SPARSE_QUBITS};

pub type C64 = num_complex::Complex<f64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QsimError {
    #[error("gate is not unitary")]
    NonUnitaryGate,
    #[error("qubit index {index} out of range for width {width}")]
    IndexOutOfRange { index: usize, width: usize },
    #[error("register {register}: expected width {expected}, got {got}")]
    WidthMismatch { register: String, expected: usize, got: usize },
    #[error("measurement pairs overlap")]
    OverlappingPairs,
    #[error("empty register selection")]
    EmptySelection,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("unknown register {0}")]
    UnknownRegister(String),
    #[error("classical register {0} already written")]
    AlreadyWritten(String),
    #[error("bad layout: {0}")]
    BadLayout(String),
    #[error("{requested} qubits exceed the limit of {max}")]
    TooManyQubits { requested: usize, max: usize },
    #[error("classical map is not injective on the support")]
    NotInjective,
    #[error("angle {0} is not a multiple of pi/4")]
    BadAngle(f64),
}
