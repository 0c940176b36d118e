use crate::amplification::{amplify_prersvp, AmplifierParams, Profile};
use crate::protocol::{
    Adversary, Chooser, FlagValue, KpJob, Message, Owner, Protocol, ProtocolError, Result, Session, StepResult, World,
};
use crate::qsim::{Bits, SparseState, C64};

use super::multi_block::MultiBlock;
use super::one_block::basis_key;
use super::{b2u, u2b, BlockKeys, KeyPair};

/// How the 2n blocks behind the key pair are produced.
#[derive(Clone, Debug, PartialEq)]
pub enum KpBackend {
    /// Cut-and-choose amplified multi-block protocol over 2n blocks of width `m0`.
    Chain { m0: usize, block_kappa: usize, amp: AmplifierParams },
    /// Ideal delivery of (|0⟩|x0⟩ + |1⟩|x1⟩)/√2 for uniform x0, x1.
    Ideal,
}

/// Key-pair protocol: output (|0⟩|x0⟩ + |1⟩|x1⟩)/√2 on registers (subs, key).
#[derive(Clone, Debug, PartialEq)]
pub struct Kp {
    pub n: usize,
    pub eps: f64,
    pub kappa: usize,
    pub backend: KpBackend,
}

/// What the client reveals for the transformation and what it keeps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KpReveal {
    pub masks: Vec<(Bits, Bits)>,
    pub tails: Vec<(Bits, Bits)>,
    pub keys: KeyPair,
}

/// Smallest power of two m0 with m0 > (12·2n/ε)².
pub fn paper_m0(n: usize, eps: f64) -> u128 {
    let bound = (12.0 * 2.0 * n as f64 / eps).powi(2);
    let mut m = 1u128;
    while (m as f64) <= bound {
        m <<= 1;
    }
    m
}

/// Masks, trimmed u2b tails and output keys for 2n one-hot-difference blocks.
pub fn kp_reveal(keys: &BlockKeys) -> std::result::Result<KpReveal, super::ChainError> {
    let n = keys.blocks.len() / 2;
    let (mut masks, mut tails) = (Vec::new(), Vec::new());
    let (mut o0, mut o1) = (Bits::zeros(0), Bits::zeros(0));
    for i in 0..n {
        let (k1, k2) = (&keys.blocks[2 * i], &keys.blocks[2 * i + 1]);
        masks.push((k1.x0.clone(), k2.x1.clone()));
        let (u1, u2) = (u2b(&k1.difference())?, u2b(&k2.difference())?);
        tails.push((u1.slice(1, u1.len()), u2.slice(1, u2.len())));
        o0.push(u2.get(0));
        o1.push(u1.get(0));
    }
    Ok(KpReveal { masks, tails, keys: KeyPair::new(o0, o1) })
}

/// (|0⟩|x0⟩ + |1⟩|x1⟩)/√2 with the control qubit first.
pub fn kp_state(keys: &KeyPair) -> SparseState {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let a = Bits::from_bools(vec![false]).concat(&keys.x0);
    let b = Bits::from_bools(vec![true]).concat(&keys.x1);
    SparseState::from_amplitudes(a.len(), [(basis_key(&a), h), (basis_key(&b), h)])
}

impl Kp {
    /// Number of blocks 2n.
    pub fn blocks(&self) -> usize {
        2 * self.n
    }

    /// Paper profile: m0 from the formula. Only feasible to execute for tiny n and large ε.
    pub fn paper_block_width(&self) -> u128 {
        paper_m0(self.n, self.eps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(ProtocolError::BadParameters("key width must be at least 1".into()));
        }
        if let KpBackend::Chain { m0, amp, .. } = &self.backend {
            if !m0.is_power_of_two() || *m0 < 2 {
                return Err(ProtocolError::BadParameters(format!("block width {m0} must be a power of two ≥ 2")));
            }
            if 2 * self.n * m0 > 120 {
                return Err(ProtocolError::TooLarge(format!("{} blocks of {m0} qubits", 2 * self.n)));
            }
            amp.validate()?;
        }
        Ok(())
    }

    fn multi_block(&self, m0: usize, block_kappa: usize, profile: Profile) -> MultiBlock {
        MultiBlock { m: m0, n: 2 * self.n, eps: self.eps, kappa: block_kappa, profile }
    }
}

/// Registers and keys after a key-pair run.
#[derive(Clone, Debug, PartialEq)]
pub struct KpRun {
    pub flag: FlagValue,
    pub subs: String,
    pub key: String,
    pub x0: String,
    pub x1: String,
    pub keys: KeyPair,
}

/// One key-pair run inside a session; outputs `subs` (1 qubit) and `key` (n qubits).
pub fn kp_in(s: &mut Session, adv: &dyn Adversary, p: &Kp) -> Result<KpRun> {
    p.validate()?;
    let (subs, key) = (s.reg("subs"), s.reg("key"));
    match &p.backend {
        KpBackend::Ideal => {
            s.send(Message::new("kp"));
            let keys = KeyPair::new(s.client_bits(p.n), s.client_bits(p.n));
            let x0 = s.set_client("x0", keys.x0.clone())?;
            let x1 = s.set_client("x1", keys.x1.clone())?;
            let ctx = s.ctx("ideal-abort");
            let abort = adv.ideal_abort(&ctx, &mut s.view())?;
            s.reply(Message::new("bit").number(abort as u64));
            let st = if abort { SparseState::zero(p.n + 1) } else { kp_state(&keys) };
            let joint = s.reg("kp");
            s.world.alloc(&joint, st, Owner::Server)?;
            s.world.split(&joint, &[(subs.clone(), 1), (key.clone(), p.n)])?;
            if !abort {
                let ctx = s.ctx("delivery");
                adv.after_delivery(&ctx, &mut s.view(), &[subs.clone(), key.clone()])?;
            }
            Ok(KpRun { flag: FlagValue::from_pass(!abort), subs, key, x0, x1, keys })
        }
        KpBackend::Chain { m0, block_kappa, amp } => {
            let mb = p.multi_block(*m0, *block_kappa, amp.profile);
            let r = s.scoped("mb", |s| amplify_prersvp(s, adv, &mb, amp))?;
            let mut flag = r.flag;
            let (q, xr0, xr1) = match (r.outputs.first(), r.descriptions.first(), r.descriptions.get(1)) {
                (Some(q), Some(a), Some(b)) => (q.clone(), a.clone(), b.clone()),
                _ => return Err(ProtocolError::Internal("multi-block comp round left no outputs".into())),
            };
            let (x0, x1) = (s.client(&xr0).unwrap_or_default(), s.client(&xr1).unwrap_or_default());
            let blocks = BlockKeys::from_records(&x0, &x1, *m0, &Bits::zeros(0));
            let reveal = match kp_reveal(&blocks) {
                Ok(rv) => rv,
                Err(_) => {
                    // only reachable on failed runs with placeholder keys
                    flag = FlagValue::Fail;
                    let z = Bits::zeros(*m0);
                    let mut fake = blocks.clone();
                    for k in &mut fake.blocks {
                        *k = KeyPair::new(z.clone(), b2u(&Bits::zeros(m0.trailing_zeros() as usize)));
                    }
                    kp_reveal(&fake).expect("placeholder keys are one-hot")
                }
            };
            let names: Vec<(String, usize)> = (0..p.blocks()).map(|i| (s.reg(&format!("blk{i}")), *m0)).collect();
            s.world.split(&q, &names)?;
            let mut msg = Message::new("kp-reveal");
            for (i, (a, b)) in reveal.masks.iter().enumerate() {
                msg = msg.bits(a).bits(b).bits(&reveal.tails[i].0).bits(&reveal.tails[i].1);
            }
            s.send(msg);
            let job = KpJob {
                blocks: names.into_iter().map(|x| x.0).collect(),
                masks: reveal.masks.clone(),
                tails: reveal.tails.clone(),
                subs: subs.clone(),
                key: key.clone(),
            };
            let ctx = s.ctx("kp-transform");
            adv.kp_transform(&ctx, &mut s.view(), &job)?;
            for (reg, w) in [(&subs, 1), (&key, p.n)] {
                if !s.world.contains(reg) {
                    s.world.alloc_zero(reg, w, Owner::Server)?;
                }
            }
            let keys = reveal.keys;
            let x0 = s.set_client("x0", keys.x0.clone())?;
            let x1 = s.set_client("x1", keys.x1.clone())?;
            Ok(KpRun { flag, subs, key, x0, x1, keys })
        }
    }
}

impl Protocol for Kp {
    fn id(&self) -> String {
        "kp".into()
    }
    fn features(&self) -> Vec<&'static str> {
        match self.backend {
            KpBackend::Ideal => vec!["ideal", "kp"],
            KpBackend::Chain { .. } => vec!["bb84", "one_block", "multi_block", "kp"],
        }
    }
    fn execute(&self, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult> {
        let r = kp_in(s, adv, self)?;
        Ok(StepResult { flag: r.flag, score: None, descriptions: vec![r.x0, r.x1], outputs: vec![r.subs, r.key] })
    }
}

/// Undoes the honest key-pair transformation: rebuilds the 2n blocks named in
/// `job` from the (subs, key) registers. Every step is a bijection on basis
/// states, so the pre-transformation state comes back exactly.
pub fn kp_inverse(world: &mut World, ch: &mut dyn Chooser, job: &KpJob, m: usize) -> Result<()> {
    let n = job.masks.len();
    let lg = m.trailing_zeros() as usize;
    let parts: Vec<(String, usize)> = (0..n).map(|i| (format!("{}#{}.key", job.key, i), 1)).collect();
    world.split(&job.key, &parts)?;
    for i in 0..n {
        let anc = format!("{}#{}", job.key, i);
        let rest = format!("{anc}.rest");
        if lg > 1 {
            world.alloc_zero(&rest, lg - 1, Owner::Server)?;
            world.fuse(&anc, &[&parts[i].0, &rest])?;
        } else {
            world.rename(&parts[i].0, &anc)?;
        }
        let (b1, b2) = (&job.blocks[2 * i], &job.blocks[2 * i + 1]);
        world.alloc_zero(b1, m, Owner::Server)?;
        world.alloc_zero(b2, m, Owner::Server)?;
        let (mask1, mask2) = job.masks[i].clone();
        let (tail1, tail2) = job.tails[i].clone();
        world.apply_classical(&[&job.subs, b1, b2, &anc], &move |v: &mut [Bits]| {
            let t = if v[0].get(0) { &tail1 } else { &tail2 };
            for (k, bit) in t.iter().enumerate() {
                v[3].set(k + 1, v[3].get(k + 1) ^ bit);
            }
            let a = v[3].to_uint() as usize;
            v[2] = v[2].xor(&Bits::unit(m, a));
            if v[2].weight() == 1 {
                let p = v[2].iter().position(|x| x).expect("one set bit");
                v[3] = v[3].xor(&Bits::from_uint(p as u64, lg));
            }
            if v[0].get(0) {
                v.swap(1, 2);
            }
            v[1] = v[1].xor(&mask1);
            v[2] = v[2].xor(&mask2);
        })?;
        world.discard(&anc, ch)?;
    }
    world.apply_classical(&[&job.blocks[0], &job.subs], &|v: &mut [Bits]| {
        let p = v[0].parity();
        v[1].set(0, v[1].get(0) ^ p);
    })?;
    world.discard(&job.subs, ch)
}
