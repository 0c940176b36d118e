//! Ideal oracles (BB84 delivery, client-chosen delivery, ROAV) and a toy
//! trapdoor 2-to-1 function.

mod bb84;
mod ntcf;
mod roav;

use thiserror::Error;

use crate::protocol::ProtocolError;
use crate::qsim::QsimError;

pub use bb84::{bb84_family, ideal_bb84, ideal_rspv_chosen, plus_theta_family, Bb84Descriptor, IdealBb84, IdealChosen};
pub use ntcf::{toy_ntcf_chk, toy_ntcf_dec, toy_ntcf_eval, toy_ntcf_keygen, NtcfKeys, ToyFunction, MAX_TOY_KAPPA};
pub use roav::{ideal_roav, ideal_roav_apply, roav_apply_world, RoavSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalityError {
    #[error("incomplete POVM: {0}")]
    IncompletePovm(String),
    #[error("malformed key: {0}")]
    MalformedKey(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}
