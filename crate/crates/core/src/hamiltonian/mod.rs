//! XZ local Hamiltonians, the sampled computational-basis state used to
//! estimate their energy through teleportation, and the two-mode energy test.

mod model;
mod protocol;

use thiserror::Error;

use crate::protocol::ProtocolError;
use crate::qsim::QsimError;

pub use model::{ground_energy, Pauli, XZHamiltonian, DEFAULT_LOCALITY, MAX_DENSE_QUBITS};
pub use protocol::{
    comp_state, energy_decision, energy_test, round_value, sample_rho_comp, val_h, CompRecord, Decision, EnergyRound,
    EnergyTest, EnergyTestRecord, MAX_SAMPLED_QUBITS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamiltonianError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("term {term} has |gamma| = {gamma} > 1")]
    CoefficientTooLarge { term: usize, gamma: f64 },
    #[error("term {term} acts on {count} qubits, locality bound is {k}")]
    LocalityExceeded { term: usize, count: usize, k: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("term index {0} is out of range")]
    TermOutOfRange(usize),
    #[error("Hamiltonian has no terms")]
    Empty,
    #[error("{0} qubits is too many for a dense eigensolve")]
    TooLarge(usize),
    #[error("sampling needs {qubits} qubits, budget is {max}")]
    BudgetExceeded { qubits: usize, max: usize },
    #[error("bad thresholds: {0}")]
    BadThresholds(String),
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

pub type Result<T> = std::result::Result<T, HamiltonianError>;
