//! Test of a qubit: the four-state game, its optimal strategy, and the
//! operator and state diagnostics that turn a near-optimal score into
//! statements about the server's state.

mod game;
mod round;

use thiserror::Error;

use crate::protocol::ProtocolError;
use crate::qsim::QsimError;

pub use game::{
    anticommutator_trace, cap_search, closeness_to_plus_state, extract_isometry, fitted_diagnostic, game_value,
    observable, optimal_value, plus_projector, random_blind_instance, residual_blindness_check, rotated_instance,
    u_bit, AnticommutatorFit, CapSearch, Isometry, PlusCloseness, QubitGameInstance, ResidualBound, ResidualReport,
    THETAS,
};
pub use round::{qubit_test_round, translation_pipeline, QubitBackend, QubitTest};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QubitTestError {
    #[error("state for theta = {theta} is not positive semidefinite (eigenvalue {eigenvalue})")]
    NotPsd { theta: u8, eigenvalue: f64 },
    #[error("observable {0} does not square to the identity")]
    NotInvolution(&'static str),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("state is not of product form: {0}")]
    ShapeMismatch(String),
    #[error("observable eigenspaces have different dimensions ({plus} vs {minus})")]
    Unbalanced { plus: usize, minus: usize },
    #[error("delta {0} is outside the reachable range")]
    BadDelta(f64),
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

pub type Result<T> = std::result::Result<T, QubitTestError>;
