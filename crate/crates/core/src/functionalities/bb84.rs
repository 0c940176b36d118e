use std::fmt;

use serde::{Deserialize, Serialize};

use crate::protocol::{
    Adversary, FlagValue, Message, Owner, Protocol, ProtocolError, Result, Session, StepResult, TargetState,
};
use crate::qsim::{gates, Bits, SparseState};

/// One of |0⟩, |1⟩, |+⟩, |−⟩.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bb84Descriptor {
    Zero,
    One,
    Plus,
    Minus,
}

impl Bb84Descriptor {
    pub const ALL: [Bb84Descriptor; 4] = [Self::Zero, Self::One, Self::Plus, Self::Minus];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Option<Self> {
        Self::ALL.get(i as usize).copied()
    }

    pub fn state(self) -> SparseState {
        let [a, b] = gates::plus_theta(0);
        match self {
            Self::Zero => SparseState::basis(1, 0),
            Self::One => SparseState::basis(1, 1),
            Self::Plus => SparseState::from_amplitudes(1, [(0, a), (1, b)]),
            Self::Minus => SparseState::from_amplitudes(1, [(0, a), (1, -b)]),
        }
    }

    /// Two-bit client record.
    pub fn to_bits(self) -> Bits {
        Bits::from_uint(self.index() as u64, 2)
    }

    pub fn from_bits(b: &Bits) -> Option<Self> {
        (b.len() == 2).then(|| Self::from_index(b.to_uint() as u8)).flatten()
    }

    pub fn symbol(self) -> char {
        match self {
            Self::Zero => '0',
            Self::One => '1',
            Self::Plus => '+',
            Self::Minus => '-',
        }
    }
}

impl fmt::Display for Bb84Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// The BB84 family with uniform weights.
pub fn bb84_family(description_reg: &str, quantum_reg: &str) -> TargetState {
    TargetState::uniform(
        "bb84",
        description_reg,
        quantum_reg,
        Bb84Descriptor::ALL.iter().map(|d| (d.to_bits(), d.state())).collect(),
    )
    .expect("bb84 family is well formed")
}

/// One call to the ideal BB84 functionality. Writes the descriptor to client
/// register `desc`, delivers the state into server register `out` unless the
/// server aborts, and returns (descriptor, flag).
pub fn ideal_bb84(s: &mut Session, adv: &dyn Adversary, desc: &str, out: &str) -> Result<(Bb84Descriptor, FlagValue)> {
    s.send(Message::new("bb84"));
    let d = match s.rig.bb84 {
        Some(i) => Bb84Descriptor::from_index(i).ok_or(ProtocolError::BadParameters("rigged descriptor".into()))?,
        None => Bb84Descriptor::ALL[s.client_uniform(4)],
    };
    s.set_client(desc, d.to_bits())?;
    let ctx = s.ctx("ideal-abort");
    let abort = adv.ideal_abort(&ctx, &mut s.view())?;
    s.reply(Message::new("bit").number(abort as u64));
    let out = s.reg(out);
    // the output register exists either way so layouts stay uniform
    if abort {
        s.world.alloc_zero(&out, 1, Owner::Server)?;
        return Ok((d, FlagValue::Fail));
    }
    s.world.alloc(&out, d.state(), Owner::Server)?;
    let ctx = s.ctx("delivery");
    adv.after_delivery(&ctx, &mut s.view(), std::slice::from_ref(&out))?;
    Ok((d, FlagValue::Pass))
}

/// A single ideal BB84 round as a protocol (outputs `d` and `q`).
#[derive(Clone, Copy, Debug, Default)]
pub struct IdealBb84;

impl Protocol for IdealBb84 {
    fn id(&self) -> String {
        "ideal_bb84".into()
    }
    fn features(&self) -> Vec<&'static str> {
        vec!["ideal"]
    }
    fn execute(&self, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult> {
        let (_, flag) = ideal_bb84(s, adv, "d", "q")?;
        Ok(StepResult { flag, score: None, descriptions: vec![s.reg("d")], outputs: vec![s.reg("q")] })
    }
}

/// Ideal RSPV with client-chosen inputs: the client picks `choice`, the
/// server picks the abort bit.
pub fn ideal_rspv_chosen(
    s: &mut Session,
    adv: &dyn Adversary,
    family: &TargetState,
    choice: usize,
    desc: &str,
    out: &str,
) -> Result<FlagValue> {
    let (_, d, st) = family.members.get(choice).ok_or(ProtocolError::Qsim(crate::qsim::QsimError::IndexOutOfRange {
        index: choice,
        width: family.members.len(),
    }))?;
    // the choice stays on the client side
    s.send(Message::new("chosen"));
    s.set_client(desc, d.clone())?;
    let ctx = s.ctx("ideal-abort");
    let abort = adv.ideal_abort(&ctx, &mut s.view())?;
    s.reply(Message::new("bit").number(abort as u64));
    if abort {
        return Ok(FlagValue::Fail);
    }
    let out = s.reg(out);
    s.world.alloc(&out, st.clone(), Owner::Server)?;
    let ctx = s.ctx("delivery");
    adv.after_delivery(&ctx, &mut s.view(), std::slice::from_ref(&out))?;
    Ok(FlagValue::Pass)
}

/// [`ideal_rspv_chosen`] with a fixed choice, as a protocol.
#[derive(Clone, Debug)]
pub struct IdealChosen {
    pub family: TargetState,
    pub choice: usize,
}

impl Protocol for IdealChosen {
    fn id(&self) -> String {
        format!("ideal_chosen:{}", self.family.family)
    }
    fn features(&self) -> Vec<&'static str> {
        vec!["ideal"]
    }
    fn execute(&self, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult> {
        let flag = ideal_rspv_chosen(s, adv, &self.family, self.choice, "d", "q")?;
        let outputs = if flag.is_pass() { vec![s.reg("q")] } else { Vec::new() };
        Ok(StepResult { flag, score: None, descriptions: vec![s.reg("d")], outputs })
    }
}

/// The family {|+_θ⟩} over the listed θ, description = 3-bit θ.
pub fn plus_theta_family(description_reg: &str, quantum_reg: &str, thetas: &[u8]) -> TargetState {
    TargetState::uniform(
        "plus_theta",
        description_reg,
        quantum_reg,
        thetas
            .iter()
            .map(|&t| {
                let [a, b] = gates::plus_theta(t as i64);
                (Bits::from_uint(t as u64, 3), SparseState::from_amplitudes(1, [(0, a), (1, b)]))
            })
            .collect(),
    )
    .expect("phase family is well formed")
}
