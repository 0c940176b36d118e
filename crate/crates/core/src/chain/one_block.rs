use crate::functionalities::{ideal_bb84, Bb84Descriptor};
use crate::protocol::{Adversary, FlagValue, Message, Owner, Protocol, ProtocolError, Result, Session, StepResult};
use crate::qsim::{Bits, SparseState, C64};

use super::KeyPair;

/// Basis index of a bit string (bit j on qubit j).
pub(crate) fn basis_key(b: &Bits) -> u128 {
    b.iter().enumerate().fold(0u128, |k, (j, v)| k | ((v as u128) << j))
}

/// (|a⟩ + |b⟩)/√2.
pub fn superposition(a: &Bits, b: &Bits) -> SparseState {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    SparseState::from_amplitudes(a.len(), [(basis_key(a), h), (basis_key(b), h)])
}

/// The client's pick of m rounds and the resulting keys.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selection {
    /// Round indices in output order.
    pub indices: Vec<usize>,
    pub keys: KeyPair,
}

fn take_random(s: &mut Session, v: &mut Vec<usize>) -> usize {
    let i = s.client_uniform(v.len());
    v.swap_remove(i)
}

/// Picks m distinct rounds with exactly one '+', no '−', and an even number
/// of '1's, then shuffles their order. An odd pick swaps one chosen '1' for
/// an unchosen '0' (or a chosen '0' for an unchosen '1'). None when no valid
/// pick exists.
pub fn select_indices(s: &mut Session, desc: &[Bb84Descriptor], m: usize) -> Option<Selection> {
    let of = |d: Bb84Descriptor| -> Vec<usize> { (0..desc.len()).filter(|&i| desc[i] == d).collect() };
    let plus = of(Bb84Descriptor::Plus);
    let mut pool: Vec<usize> = (0..desc.len()).filter(|&i| matches!(desc[i], Bb84Descriptor::Zero | Bb84Descriptor::One)).collect();
    if m == 0 || plus.is_empty() || pool.len() < m - 1 {
        return None;
    }
    let p = plus[s.client_uniform(plus.len())];
    s.client_shuffle(&mut pool);
    let mut rest = pool.split_off(m - 1);
    let mut chosen = pool;
    let is_one = |i: &usize| desc[*i] == Bb84Descriptor::One;
    if chosen.iter().filter(|i| is_one(i)).count() % 2 == 1 {
        let (mut c1, mut c0): (Vec<usize>, Vec<usize>) = chosen.iter().partition(|i| is_one(i));
        let (mut r1, mut r0): (Vec<usize>, Vec<usize>) = rest.iter().partition(|i| is_one(i));
        let (out, inn) = if !c1.is_empty() && !r0.is_empty() {
            (take_random(s, &mut c1), take_random(s, &mut r0))
        } else if !c0.is_empty() && !r1.is_empty() {
            (take_random(s, &mut c0), take_random(s, &mut r1))
        } else {
            return None;
        };
        chosen.retain(|&i| i != out);
        chosen.push(inn);
        rest.retain(|&i| i != inn);
    }
    chosen.push(p);
    s.client_shuffle(&mut chosen);
    let x0 = Bits::from_bools(chosen.iter().map(is_one).collect());
    let pos = chosen.iter().position(|&i| i == p).expect("plus round chosen");
    let x1 = x0.xor(&Bits::unit(m, pos));
    Some(Selection { indices: chosen, keys: KeyPair::new(x0, x1) })
}

/// Registers and keys of one block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockRun {
    pub flag: FlagValue,
    /// Server register holding the block.
    pub q: String,
    /// Client records of the key halves.
    pub x0: String,
    pub x1: String,
    pub keys: KeyPair,
}

/// Number of BB84 rounds, 4(m+κ).
pub fn one_block_rounds(m: usize, kappa: usize) -> usize {
    4 * (m + kappa)
}

/// One block inside a running session: 4(m+κ) ideal BB84 rounds, the
/// client's selection, and the server gathering the selected qubits into
/// register `q`. Keys go to records `x0`, `x1`.
pub fn one_block_in(s: &mut Session, adv: &dyn Adversary, m: usize, kappa: usize) -> Result<BlockRun> {
    if m < 2 {
        return Err(ProtocolError::BadParameters(format!("block width {m} must be at least 2")));
    }
    let l = one_block_rounds(m, kappa);
    let mut flag = FlagValue::Pass;
    let mut desc = Vec::with_capacity(l);
    let mut regs = Vec::with_capacity(l);
    for r in 0..l {
        let (d, f) = ideal_bb84(s, adv, &format!("d{r}"), &format!("q{r}"))?;
        flag = flag.and(f);
        desc.push(d);
        regs.push(s.reg(&format!("q{r}")));
    }
    let selection = select_indices(s, &desc, m);
    let q = s.reg("q");
    let keys = match &selection {
        Some(sel) => {
            let mut msg = Message::new("select");
            for &i in &sel.indices {
                msg = msg.number(i as u64);
            }
            s.send(msg);
            let parts: Vec<&str> = sel.indices.iter().map(|&i| regs[i].as_str()).collect();
            s.world.fuse(&q, &parts)?;
            sel.keys.clone()
        }
        None => {
            s.send(Message::new("abort"));
            flag = FlagValue::Fail;
            s.world.alloc_zero(&q, m, Owner::Server)?;
            KeyPair::new(Bits::zeros(m), Bits::zeros(m))
        }
    };
    let leftovers: Vec<String> = regs.into_iter().filter(|r| s.world.contains(r)).collect();
    crate::amplification::discard_outputs(s, &leftovers)?;
    let x0 = s.set_client("x0", keys.x0.clone())?;
    let x1 = s.set_client("x1", keys.x1.clone())?;
    Ok(BlockRun { flag, q, x0, x1, keys })
}

/// n blocks in sequence, block i in scope `blk{i}`.
pub fn one_block_tensor_in(s: &mut Session, adv: &dyn Adversary, m: usize, n: usize, kappa: usize) -> Result<Vec<BlockRun>> {
    if n == 0 {
        return Err(ProtocolError::BadParameters("at least one block is needed".into()));
    }
    (0..n).map(|i| s.scoped(&format!("blk{i}"), |s| one_block_in(s, adv, m, kappa))).collect()
}

/// Key pair with HW(x0⊕x1) = 1 and Parity(x0) = 0 from BB84 rounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OneBlock {
    pub m: usize,
    pub eps: f64,
    pub kappa: usize,
}

impl OneBlock {
    pub fn rounds(&self) -> usize {
        one_block_rounds(self.m, self.kappa)
    }

    /// Error budget of each BB84 round, ε/L.
    pub fn round_budget(&self) -> f64 {
        self.eps / self.rounds() as f64
    }
}

impl Protocol for OneBlock {
    fn id(&self) -> String {
        "one_block".into()
    }
    fn features(&self) -> Vec<&'static str> {
        vec!["bb84", "one_block"]
    }
    fn execute(&self, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult> {
        let b = one_block_in(s, adv, self.m, self.kappa)?;
        Ok(StepResult { flag: b.flag, score: None, descriptions: vec![b.x0, b.x1], outputs: vec![b.q] })
    }
}

/// n independent one-block runs; fails if any fails.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OneBlockTensor {
    pub m: usize,
    pub n: usize,
    pub eps: f64,
    pub kappa: usize,
}

impl OneBlockTensor {
    /// Error budget of each block, ε/n.
    pub fn block_budget(&self) -> f64 {
        self.eps / self.n as f64
    }
}

impl Protocol for OneBlockTensor {
    fn id(&self) -> String {
        "one_block_tensor".into()
    }
    fn features(&self) -> Vec<&'static str> {
        vec!["bb84", "one_block"]
    }
    fn execute(&self, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult> {
        let blocks = one_block_tensor_in(s, adv, self.m, self.n, self.kappa)?;
        let mut out = StepResult::pass();
        for b in blocks {
            out.flag = out.flag.and(b.flag);
            out.descriptions.push(b.x0);
            out.descriptions.push(b.x1);
            out.outputs.push(b.q);
        }
        Ok(out)
    }
}
