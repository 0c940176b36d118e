//! Client/server protocol engine: rounds, transcripts, flag and score
//! registers, adversary hooks, exact and sampled execution.

mod adversary;
mod engine;
mod session;
mod world;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qsim::{Bits, QsimError};

pub use adversary::{honest, Adversary, HonestAdversary, HookCtx, KpJob, ServerView};
pub use engine::{
    apply_channel, combine_paths, compare_to_simulated, conform, enumerate_paths, merge, project_pass, run, run_exact,
    run_with, with_label, ExactOutcome, IdentitySimulator, ProtocolOutcome, RunOptions, Simulator, TargetState,
};
pub use session::{Chooser, Message, OutcomeSource, Rigging, Session, Transcript};
pub use world::{register_value, Owner, World};

/// Name of the flag record in final ensembles.
pub const FLAG: &str = "flag";
/// Name of the score record in final ensembles.
pub const SCORE: &str = "score";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error("unknown register {0}")]
    UnknownRegister(String),
    #[error("register {0} already exists")]
    DuplicateRegister(String),
    #[error("client register {0} is write-once")]
    ClientRegisterRewrite(String),
    #[error("adversary touched a register it does not hold: {0}")]
    AdversaryLocality(String),
    #[error("adversary {adversary} does not apply to protocol {protocol}")]
    InapplicableProtocol { adversary: String, protocol: String },
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("bad parameters: {0}")]
    BadParameters(String),
    #[error("register clash: {0}")]
    RegisterClash(String),
    #[error("simulator modified client registers")]
    SimulatorTouchesClientRegisters,
    #[error("state too large: {0}")]
    TooLarge(String),
    #[error("path enumeration exceeded {0} paths")]
    PathLimit(usize),
    #[error("all rounds drew test mode")]
    NoCompRound,
    #[error("internal: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlagValue {
    Pass,
    Fail,
}

impl FlagValue {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            FlagValue::Pass
        } else {
            FlagValue::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == FlagValue::Pass
    }

    pub fn and(self, other: FlagValue) -> FlagValue {
        FlagValue::from_pass(self.is_pass() && other.is_pass())
    }

    /// One-bit encoding: 0 = pass, 1 = fail.
    pub fn to_bits(self) -> Bits {
        Bits::from_bools(vec![self == FlagValue::Fail])
    }

    pub fn from_bits(b: &Bits) -> Option<Self> {
        match (b.len(), b.get(0)) {
            (1, false) => Some(FlagValue::Pass),
            (1, true) => Some(FlagValue::Fail),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreValue {
    Win,
    Lose,
    Bottom,
}

impl ScoreValue {
    /// Two-bit encoding: 00 = ⊥, 01 = win, 10 = lose.
    pub fn to_bits(self) -> Bits {
        match self {
            ScoreValue::Bottom => Bits::from_uint(0, 2),
            ScoreValue::Win => Bits::from_uint(1, 2),
            ScoreValue::Lose => Bits::from_uint(2, 2),
        }
    }

    pub fn from_bits(b: &Bits) -> Option<Self> {
        if b.len() != 2 {
            return None;
        }
        match b.to_uint() {
            0 => Some(ScoreValue::Bottom),
            1 => Some(ScoreValue::Win),
            2 => Some(ScoreValue::Lose),
            _ => None,
        }
    }

    pub fn from_win(win: bool) -> Self {
        if win {
            ScoreValue::Win
        } else {
            ScoreValue::Lose
        }
    }
}

/// What a protocol (or sub-protocol) hands back to its caller.
#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub flag: FlagValue,
    pub score: Option<ScoreValue>,
    /// Client registers holding output descriptions.
    pub descriptions: Vec<String>,
    /// Server-side output quantum registers.
    pub outputs: Vec<String>,
}

impl StepResult {
    pub fn new(flag: FlagValue) -> Self {
        Self { flag, score: None, descriptions: Vec::new(), outputs: Vec::new() }
    }

    pub fn pass() -> Self {
        Self::new(FlagValue::Pass)
    }
}

/// A client/server protocol under some set-up.
pub trait Protocol: Send + Sync {
    /// Registry identifier.
    fn id(&self) -> String;
    /// Feature tags used to decide which adversaries apply.
    fn features(&self) -> Vec<&'static str> {
        Vec::new()
    }
    fn scored(&self) -> bool {
        false
    }
    fn execute(&self, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Test,
    Comp,
}

/// A pair of protocols under one set-up. Implementations call
/// [`Session::mark_divergence`] where the two modes start to differ.
pub trait TwoModeProtocol: Send + Sync {
    fn id(&self) -> String;
    fn features(&self) -> Vec<&'static str> {
        Vec::new()
    }
    /// Whether the test mode records a score.
    fn scored(&self) -> bool {
        false
    }
    fn execute_mode(&self, mode: Mode, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult>;
}

impl<T: Protocol + ?Sized> Protocol for Box<T> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn features(&self) -> Vec<&'static str> {
        (**self).features()
    }
    fn scored(&self) -> bool {
        (**self).scored()
    }
    fn execute(&self, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult> {
        (**self).execute(s, adv)
    }
}

impl<T: TwoModeProtocol + ?Sized> TwoModeProtocol for Box<T> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn features(&self) -> Vec<&'static str> {
        (**self).features()
    }
    fn scored(&self) -> bool {
        (**self).scored()
    }
    fn execute_mode(&self, mode: Mode, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult> {
        (**self).execute_mode(mode, s, adv)
    }
}

/// One mode of a two-mode protocol viewed as a plain protocol.
pub struct ModeOf<'a, T: ?Sized> {
    pub inner: &'a T,
    pub mode: Mode,
}

impl<T: TwoModeProtocol + ?Sized> Protocol for ModeOf<'_, T> {
    fn id(&self) -> String {
        format!("{}:{}", self.inner.id(), if self.mode == Mode::Test { "test" } else { "comp" })
    }
    fn features(&self) -> Vec<&'static str> {
        self.inner.features()
    }
    fn scored(&self) -> bool {
        self.mode == Mode::Test && self.inner.scored()
    }
    fn execute(&self, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult> {
        self.inner.execute_mode(self.mode, s, adv)
    }
}

/// A protocol with no rounds: passes immediately.
pub struct EmptyProtocol;

impl Protocol for EmptyProtocol {
    fn id(&self) -> String {
        "empty".into()
    }
    fn execute(&self, _s: &mut Session, _adv: &dyn Adversary) -> Result<StepResult> {
        Ok(StepResult::pass())
    }
}

#[cfg(test)]
mod tests;
