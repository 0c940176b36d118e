use nalgebra::DMatrix;

use crate::qsim::{gates, Basis, Bits, SparseState, C64};

use super::{Chooser, OutcomeSource, Owner, ProtocolError, Result, World};

/// Where in a protocol a hook is called.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HookCtx {
    pub protocol: String,
    pub step: &'static str,
    pub round: usize,
    pub scope: String,
}

/// Data the client reveals before the key-pair transformation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KpJob {
    /// Server registers holding the 2n blocks, in order.
    pub blocks: Vec<String>,
    /// Per pair i: x0 of block 2i−1 and x1 of block 2i.
    pub masks: Vec<(Bits, Bits)>,
    /// Per pair i: the trimmed u2b bits of the block 2i−1 and block 2i differences.
    pub tails: Vec<(Bits, Bits)>,
    /// Names the output registers must have.
    pub subs: String,
    pub key: String,
}

/// A server-side strategy. Each hook defaults to honest behaviour.
pub trait Adversary: Send + Sync {
    fn name(&self) -> String;

    /// Whether this strategy is meaningful for a protocol with these features.
    fn applies_to(&self, _features: &[&str]) -> bool {
        true
    }

    /// Server bit b of an ideal functionality call (true = abort).
    fn ideal_abort(&self, _ctx: &HookCtx, _view: &mut ServerView) -> Result<bool> {
        Ok(false)
    }

    /// Called after an ideal functionality delivers states into `regs`.
    fn after_delivery(&self, _ctx: &HookCtx, _view: &mut ServerView, _regs: &[String]) -> Result<()> {
        Ok(())
    }

    /// Reports xorparity(1, i) for i = 2..n.
    fn report_xor(&self, _ctx: &HookCtx, view: &mut ServerView, blocks: &[String]) -> Result<Vec<bool>> {
        honest::report_xor(view, blocks)
    }

    /// Reveals computational-basis measurements of every block.
    fn reveal_blocks(&self, _ctx: &HookCtx, view: &mut ServerView, blocks: &[String]) -> Result<Vec<Bits>> {
        honest::reveal_blocks(view, blocks)
    }

    /// Transforms the blocks into the (subs, key) registers.
    fn kp_transform(&self, _ctx: &HookCtx, view: &mut ServerView, job: &KpJob) -> Result<()> {
        honest::kp_transform(view, job)
    }

    /// Adds the key-dependent phases and Hadamard-measures the key register.
    fn qfac_phase_measure(&self, _ctx: &HookCtx, view: &mut ServerView, q: &str, key: &str) -> Result<Bits> {
        honest::qfac_phase_measure(view, q, key)
    }

    /// Measures `q` in the {|+_φ⟩, |+_{φ+4}⟩} basis.
    fn rotated_answer(&self, _ctx: &HookCtx, view: &mut ServerView, q: &str, phi: u8) -> Result<bool> {
        honest::rotated_answer(view, q, phi)
    }

    /// Prepares the witness register (initially |0…0⟩).
    fn prepare_witness(&self, _ctx: &HookCtx, view: &mut ServerView, w: &str, witness: &SparseState) -> Result<()> {
        view.replace_state(w, witness.clone())
    }

    /// Last server action on the output registers.
    fn finish(&self, _ctx: &HookCtx, _view: &mut ServerView, _outputs: &[String]) -> Result<()> {
        Ok(())
    }
}

/// The honest server.
#[derive(Clone, Copy, Debug, Default)]
pub struct HonestAdversary;

impl Adversary for HonestAdversary {
    fn name(&self) -> String {
        "honest".into()
    }
}

/// Server-side handle on the world: only server-held registers and the
/// server's own memory are reachable.
pub struct ServerView<'a> {
    world: &'a mut World,
    outcomes: &'a mut OutcomeSource,
}

impl<'a> ServerView<'a> {
    pub(crate) fn new(world: &'a mut World, outcomes: &'a mut OutcomeSource) -> Self {
        Self { world, outcomes }
    }

    fn check(&self, reg: &str) -> Result<()> {
        match self.world.owner(reg)? {
            Owner::Server => Ok(()),
            Owner::Environment => Err(ProtocolError::AdversaryLocality(reg.to_string())),
        }
    }

    fn check_all(&self, regs: &[&str]) -> Result<()> {
        regs.iter().try_for_each(|r| self.check(r))
    }

    /// Server-held quantum registers.
    pub fn registers(&self) -> Vec<String> {
        self.world
            .registers()
            .into_iter()
            .filter(|r| self.world.owner(r).ok() == Some(Owner::Server))
            .collect()
    }

    pub fn width(&self, reg: &str) -> Result<usize> {
        self.check(reg)?;
        self.world.width(reg)
    }

    pub fn apply_gate(&mut self, targets: &[(&str, usize)], gate: &DMatrix<C64>) -> Result<()> {
        self.check_all(&targets.iter().map(|t| t.0).collect::<Vec<_>>())?;
        self.world.apply_gate(targets, gate)
    }

    pub fn apply_each(&mut self, reg: &str, gate: &DMatrix<C64>) -> Result<()> {
        self.check(reg)?;
        self.world.apply_each(reg, gate)
    }

    pub fn apply_classical(&mut self, regs: &[&str], f: &dyn Fn(&mut [Bits])) -> Result<()> {
        self.check_all(regs)?;
        self.world.apply_classical(regs, f)
    }

    pub fn apply_phase(&mut self, regs: &[&str], f: &dyn Fn(&[Bits]) -> C64) -> Result<()> {
        self.check_all(regs)?;
        self.world.apply_phase(regs, f)
    }

    pub fn measure(&mut self, regs: &[&str], basis: Basis) -> Result<Bits> {
        self.check_all(regs)?;
        self.world.measure(regs, basis, self.outcomes)
    }

    pub fn measure_qubit(&mut self, reg: &str, i: usize, basis: Basis) -> Result<bool> {
        self.check(reg)?;
        self.world.measure_qubit(reg, i, basis, self.outcomes)
    }

    pub fn measure_parity(&mut self, regs: &[&str]) -> Result<bool> {
        self.check_all(regs)?;
        self.world.measure_parity(regs, self.outcomes)
    }

    /// Allocates a private register in |0…0⟩.
    pub fn alloc(&mut self, name: &str, width: usize) -> Result<()> {
        self.world.alloc_zero(name, width, Owner::Server)
    }

    pub fn alloc_state(&mut self, name: &str, state: SparseState) -> Result<()> {
        self.world.alloc(name, state, Owner::Server)
    }

    /// Throws away the register's content and puts `state` in its place.
    pub fn replace_state(&mut self, reg: &str, state: SparseState) -> Result<()> {
        self.check(reg)?;
        if state.num_qubits() != self.world.width(reg)? {
            return Err(ProtocolError::LayoutMismatch(format!("replacement width for {reg}")));
        }
        self.world.replace(reg, state, self.outcomes)
    }

    pub fn discard(&mut self, reg: &str) -> Result<()> {
        self.check(reg)?;
        self.world.discard(reg, self.outcomes)
    }

    pub fn rename(&mut self, old: &str, new: &str) -> Result<()> {
        self.check(old)?;
        self.world.rename(old, new)
    }

    pub fn fuse(&mut self, new: &str, parts: &[&str]) -> Result<()> {
        self.check_all(parts)?;
        self.world.fuse(new, parts)
    }

    pub fn split(&mut self, name: &str, pieces: &[(String, usize)]) -> Result<()> {
        self.check(name)?;
        self.world.split(name, pieces)
    }

    /// Private coin (enumerated in exact runs).
    pub fn coin(&mut self, p_true: f64) -> bool {
        if p_true >= 1.0 {
            return true;
        }
        if p_true <= 0.0 {
            return false;
        }
        self.outcomes.choose(&[1.0 - p_true, p_true]) == 1
    }

    /// Uniform choice among n options (enumerated in exact runs).
    pub fn uniform(&mut self, n: usize) -> usize {
        self.outcomes.choose(&vec![1.0; n])
    }

    /// Client registers are never readable by the server.
    pub fn read_client(&self, name: &str) -> Result<Bits> {
        Err(ProtocolError::AdversaryLocality(name.to_string()))
    }

    pub fn remember(&mut self, key: &str, v: Bits) {
        self.world.remember(key, v);
    }

    pub fn memory(&self, key: &str) -> Option<Bits> {
        self.world.server_memory(key).cloned()
    }
}

/// Honest server behaviour for every hook.
pub mod honest {
    use super::*;

    pub fn report_xor(view: &mut ServerView, blocks: &[String]) -> Result<Vec<bool>> {
        (1..blocks.len()).map(|i| view.measure_parity(&[&blocks[0], &blocks[i]])).collect()
    }

    pub fn reveal_blocks(view: &mut ServerView, blocks: &[String]) -> Result<Vec<Bits>> {
        blocks.iter().map(|b| view.measure(&[b], Basis::Computational)).collect()
    }

    /// Position of the single set bit, MSB-first binary of width log2(m).
    fn unary_pos(b: &Bits) -> Option<usize> {
        if b.weight() == 1 {
            b.iter().position(|x| x)
        } else {
            None
        }
    }

    pub fn kp_transform(view: &mut ServerView, job: &KpJob) -> Result<()> {
        let n = job.masks.len();
        if job.blocks.len() != 2 * n || n == 0 {
            return Err(ProtocolError::LayoutMismatch("kp job shape".into()));
        }
        let m = view.width(&job.blocks[0])?;
        let lg = m.trailing_zeros() as usize;
        if !m.is_power_of_two() || lg == 0 {
            return Err(ProtocolError::BadParameters(format!("block width {m} is not a power of two ≥ 2")));
        }
        // subs = parity of block 1
        view.alloc(&job.subs, 1)?;
        view.apply_classical(&[&job.blocks[0], &job.subs], &|v: &mut [Bits]| {
            let p = v[0].parity();
            v[1].set(0, v[1].get(0) ^ p);
        })?;
        let mut keys = Vec::new();
        for i in 0..n {
            let (b1, b2) = (&job.blocks[2 * i], &job.blocks[2 * i + 1]);
            let (mask1, mask2) = job.masks[i].clone();
            let (tail1, tail2) = job.tails[i].clone();
            let anc = format!("{}#{}", job.key, i);
            view.alloc(&anc, lg)?;
            view.apply_classical(&[&job.subs, b1, b2, &anc], &move |v: &mut [Bits]| {
                v[1] = v[1].xor(&mask1);
                v[2] = v[2].xor(&mask2);
                if v[0].get(0) {
                    v.swap(1, 2);
                }
                // anc ^= pos(B2) when B2 is unary, then B2 ^= e_anc
                if let Some(p) = unary_pos(&v[2]) {
                    v[3] = v[3].xor(&Bits::from_uint(p as u64, lg));
                }
                let a = v[3].to_uint() as usize;
                v[2] = v[2].xor(&Bits::unit(m, a));
                let t = if v[0].get(0) { &tail1 } else { &tail2 };
                for (k, bit) in t.iter().enumerate() {
                    v[3].set(k + 1, v[3].get(k + 1) ^ bit);
                }
            })?;
            view.discard(b1)?;
            view.discard(b2)?;
            let key_part = format!("{anc}.key");
            if lg > 1 {
                let parts: Vec<(String, usize)> = vec![(key_part.clone(), 1), (format!("{anc}.rest"), lg - 1)];
                view.split(&anc, &parts)?;
                view.discard(&parts[1].0)?;
            } else {
                view.rename(&anc, &key_part)?;
            }
            keys.push(key_part);
        }
        let refs: Vec<&str> = keys.iter().map(|s| s.as_str()).collect();
        view.fuse(&job.key, &refs)
    }

    pub fn qfac_phase_measure(view: &mut ServerView, _q: &str, key: &str) -> Result<Bits> {
        // e^{iπ(2b⁽¹⁾ + b⁽²⁾)/4} on each branch, from the first two key bits
        view.apply_gate(&[(key, 0)], &gates::phase(2))?;
        if view.width(key)? > 1 {
            view.apply_gate(&[(key, 1)], &gates::phase(1))?;
        }
        view.measure(&[key], Basis::Hadamard)
    }

    pub fn rotated_answer(view: &mut ServerView, q: &str, phi: u8) -> Result<bool> {
        view.measure_qubit(q, 0, Basis::Rotated(phi % 8))
    }
}
