//! Exact analysis of the multi-block test after the blocks are delivered:
//! the real flow against the simulator flow, and the hybrid steps that bound
//! their distance. Client keys are classical, so each key tuple is handled as
//! one pure branch; trace distances of rank-one terms use a 2×2 Gram form.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::protocol::{ProtocolError, Result};
use crate::qsim::{gates, SparseState, C64};

/// Largest sizes handled exactly.
pub const MAX_ITCORE_BLOCKS: usize = 3;
pub const MAX_ITCORE_WIDTH: usize = 16;

/// Server strategies for the xor-report step (first operator) and the step
/// after it (second operator, the identity for every member here).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItAdversary {
    /// Coherent parity computation.
    Honest,
    /// Copies block 1 into a private register, then reports honestly.
    MeasureFirst,
    /// Reports uniformly random bits.
    RandomXor,
    /// Flips qubit g of block 1, then reports honestly.
    GuessFlip(usize),
    /// Flips a uniformly superposed position of block 1, then reports honestly.
    CoherentGuess,
    /// Reports every xor bit negated.
    LiarFlip,
}

impl ItAdversary {
    /// The guess-attack family used for bound checks at width m.
    pub fn family(m: usize) -> Vec<ItAdversary> {
        let mut v = vec![ItAdversary::Honest, ItAdversary::MeasureFirst, ItAdversary::RandomXor, ItAdversary::CoherentGuess];
        v.extend((0..m).map(ItAdversary::GuessFlip));
        v.push(ItAdversary::LiarFlip);
        v
    }

    fn private_width(self, m: usize, n: usize) -> usize {
        match self {
            ItAdversary::MeasureFirst => m,
            ItAdversary::RandomXor => n.saturating_sub(1).max(1),
            ItAdversary::CoherentGuess => m.trailing_zeros() as usize,
            _ => 0,
        }
    }
}

/// Problem size, strategy, and the seed for the x0 halves of the keys.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItCoreSettings {
    pub m: usize,
    pub n: usize,
    pub adversary: ItAdversary,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItCoreReport {
    /// Trace distance between the projected real and simulated states.
    pub distance: f64,
    /// 4n/√m.
    pub bound: f64,
    /// Norm of the difference of consecutive hybrids, one entry per block.
    pub step_deviations: Vec<f64>,
    /// 2/√m.
    pub step_bound: f64,
    /// Norm of the difference between the first and last hybrid.
    pub lemma_deviation: f64,
    /// Weight of the projected real state (test pass probability).
    pub pass_probability: f64,
}

/// Qubit layout of the joint register.
#[derive(Clone, Copy, Debug)]
struct Layout {
    m: usize,
    n: usize,
    s_off: usize,
    s_w: usize,
    resp: usize,
    xor: usize,
    simxor: usize,
    total: usize,
}

impl Layout {
    fn new(m: usize, n: usize, s_w: usize) -> Self {
        let s_off = n * m;
        let resp = s_off + s_w;
        let xor = resp + n - 1;
        let simxor = xor + n - 1;
        Self { m, n, s_off, s_w, resp, xor, simxor, total: simxor + n - 1 }
    }

    fn block(&self, key: u128, i: usize) -> u128 {
        (key >> (i * self.m)) & ((1u128 << self.m) - 1)
    }

    fn field(&self, key: u128, off: usize, w: usize) -> u128 {
        if w == 0 {
            0
        } else {
            (key >> off) & ((1u128 << w) - 1)
        }
    }

    fn xor_field(&self, off: usize, v: u128) -> u128 {
        v << off
    }

    /// xorparity(1, i) for i = 2..n packed into n−1 bits.
    fn parities(&self, key: u128) -> u128 {
        let p0 = self.block(key, 0).count_ones() & 1;
        (1..self.n).fold(0u128, |acc, i| acc | ((((self.block(key, i).count_ones() & 1) ^ p0) as u128) << (i - 1)))
    }
}

/// One key tuple: per block (x0, x1) as basis values.
type KeyTuple = Vec<(u128, u128)>;

fn key_tuples(m: usize, n: usize, seed: u64) -> Vec<KeyTuple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x0s = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x: u128 = 0;
        for j in 0..m {
            if rng.random::<bool>() {
                x |= 1 << j;
            }
        }
        if x.count_ones() % 2 == 1 {
            x ^= 1;
        }
        x0s.push(x);
    }
    let total = m.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            (0..n)
                .map(|i| {
                    let pos = idx % m;
                    idx /= m;
                    (x0s[i], x0s[i] ^ (1u128 << pos))
                })
                .collect()
        })
        .collect()
}

fn initial(l: &Layout, keys: &KeyTuple) -> SparseState {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut terms = vec![(0u128, C64::new(1.0, 0.0))];
    for (i, &(x0, x1)) in keys.iter().enumerate() {
        terms = terms
            .into_iter()
            .flat_map(|(k, a)| [(k | (x0 << (i * l.m)), a * h), (k | (x1 << (i * l.m)), a * h)])
            .collect();
    }
    SparseState::from_amplitudes(l.total, terms)
}

fn classical(st: &mut SparseState, f: impl Fn(u128) -> u128) -> Result<()> {
    st.apply_classical(f).map_err(ProtocolError::from)
}

/// First adversary operator: writes its response into `resp`.
fn adv2(adv: ItAdversary, l: &Layout, st: &mut SparseState) -> Result<()> {
    let honest = |st: &mut SparseState| classical(st, |k| k ^ l.xor_field(l.resp, l.parities(k)));
    match adv {
        ItAdversary::Honest => honest(st),
        ItAdversary::MeasureFirst => {
            classical(st, |k| k ^ (l.block(k, 0) << l.s_off))?;
            honest(st)
        }
        ItAdversary::RandomXor => {
            for q in 0..l.s_w {
                st.apply_matrix(&[l.s_off + q], &gates::h())?;
            }
            let w = l.n - 1;
            classical(st, |k| k ^ l.xor_field(l.resp, l.field(k, l.s_off, w)))
        }
        ItAdversary::GuessFlip(g) => {
            if g >= l.m {
                return Err(ProtocolError::BadParameters(format!("guess position {g} outside block width {}", l.m)));
            }
            classical(st, |k| k ^ (1u128 << g))?;
            honest(st)
        }
        ItAdversary::CoherentGuess => {
            for q in 0..l.s_w {
                st.apply_matrix(&[l.s_off + q], &gates::h())?;
            }
            classical(st, |k| k ^ (1u128 << l.field(k, l.s_off, l.s_w)))?;
            honest(st)
        }
        ItAdversary::LiarFlip => {
            honest(st)?;
            let ones = (1u128 << (l.n - 1)) - 1;
            classical(st, |k| k ^ l.xor_field(l.resp, ones))
        }
    }
}

/// Second adversary operator (identity for the whole family).
fn adv3(_adv: ItAdversary, _l: &Layout, _st: &mut SparseState) -> Result<()> {
    Ok(())
}

fn in_keys(l: &Layout, keys: &KeyTuple, k: u128, from: usize) -> bool {
    keys.iter().enumerate().skip(from).all(|(i, &(x0, x1))| {
        let b = l.block(k, i);
        b == x0 || b == x1
    })
}

fn copy(st: &mut SparseState, l: &Layout, from: usize, to: usize) -> Result<()> {
    let w = l.n - 1;
    classical(st, |k| k ^ l.xor_field(to, l.field(k, from, w)))
}

/// Projected real state.
fn real_branch(adv: ItAdversary, l: &Layout, keys: &KeyTuple) -> Result<SparseState> {
    let mut st = initial(l, keys);
    adv2(adv, l, &mut st)?;
    copy(&mut st, l, l.resp, l.xor)?;
    adv3(adv, l, &mut st)?;
    Ok(st.project(|k| l.parities(k) == l.field(k, l.xor, l.n - 1) && in_keys(l, keys, k, 0)))
}

/// Projected simulated state with the copy register cleared.
fn sim_branch(adv: ItAdversary, l: &Layout, keys: &KeyTuple) -> Result<SparseState> {
    let mut st = initial(l, keys);
    classical(&mut st, |k| k ^ l.xor_field(l.xor, l.parities(k)))?;
    adv2(adv, l, &mut st)?;
    copy(&mut st, l, l.resp, l.simxor)?;
    adv3(adv, l, &mut st)?;
    let w = l.n - 1;
    let mut st = st.project(|k| l.field(k, l.xor, w) == l.field(k, l.simxor, w) && in_keys(l, keys, k, 0));
    let clear = if w == 0 { 0 } else { ((1u128 << w) - 1) << l.simxor };
    classical(&mut st, |k| k & !clear)?;
    Ok(st)
}

/// Splits a state by the value of the xor register.
fn by_label(st: &SparseState, l: &Layout) -> BTreeMap<u128, SparseState> {
    let mut out: BTreeMap<u128, Vec<(u128, C64)>> = BTreeMap::new();
    for (k, a) in st.iter() {
        out.entry(l.field(k, l.xor, l.n - 1)).or_default().push((k, a));
    }
    out.into_iter().map(|(v, t)| (v, SparseState::from_amplitudes(l.total, t))).collect()
}

/// ½‖|a⟩⟨a| − |b⟩⟨b|‖₁ for unnormalized vectors.
pub fn rank_one_distance(a: &SparseState, b: &SparseState) -> f64 {
    let (na, nb) = (a.norm_sqr(), b.norm_sqr());
    let ov = a.inner(b).norm_sqr();
    let half = (na - nb) / 2.0;
    let root = (((na + nb) / 2.0).powi(2) - ov).max(0.0).sqrt();
    0.5 * ((half + root).abs() + (half - root).abs())
}

fn difference_norm_sqr(a: &SparseState, b: &SparseState) -> f64 {
    a.norm_sqr() + b.norm_sqr() - 2.0 * a.inner(b).re
}

fn add(a: &SparseState, b: &SparseState, n: usize) -> SparseState {
    SparseState::from_amplitudes(n, a.iter().chain(b.iter()))
}

/// Operator O of the hybrid argument: report, copy, second step, parity check.
fn operator_o(adv: ItAdversary, l: &Layout, st: &SparseState) -> Result<SparseState> {
    let mut st = st.clone();
    adv2(adv, l, &mut st)?;
    copy(&mut st, l, l.resp, l.xor)?;
    adv3(adv, l, &mut st)?;
    Ok(st.project(|k| l.parities(k) == l.field(k, l.xor, l.n - 1)))
}

/// Hybrid t: Π_{∈K(>t)} Σ_{b∈{0,1}^t} Π_{x_b(≤t)} O Π_{x_b(≤t)} φ.
fn hybrid(adv: ItAdversary, l: &Layout, keys: &KeyTuple, phi: &SparseState, t: usize) -> Result<SparseState> {
    let mut acc = SparseState::from_amplitudes(l.total, std::iter::empty());
    for b in 0..(1usize << t) {
        let matches = |k: u128| {
            (0..t).all(|i| {
                let (x0, x1) = keys[i];
                l.block(k, i) == if (b >> i) & 1 == 1 { x1 } else { x0 }
            })
        };
        let inner = phi.project(matches);
        if inner.support_len() == 0 {
            continue;
        }
        let term = operator_o(adv, l, &inner)?.project(matches);
        acc = add(&acc, &term, l.total);
    }
    Ok(acc.project(|k| in_keys(l, keys, k, t)))
}

/// Exact real-vs-simulated distance and hybrid deviations, averaged over all
/// key tuples (every '+' position per block, seeded x0 halves).
pub fn itcore_distance(settings: &ItCoreSettings) -> Result<ItCoreReport> {
    let ItCoreSettings { m, n, adversary, seed } = *settings;
    if n == 0 || m < 2 {
        return Err(ProtocolError::BadParameters(format!("need m ≥ 2 and n ≥ 1, got m = {m}, n = {n}")));
    }
    if n > MAX_ITCORE_BLOCKS || m > MAX_ITCORE_WIDTH {
        return Err(ProtocolError::TooLarge(format!("n = {n}, m = {m} exceeds n ≤ 3, m ≤ 16")));
    }
    if adversary == ItAdversary::CoherentGuess && !m.is_power_of_two() {
        return Err(ProtocolError::BadParameters(format!("coherent guess needs a power-of-two width, got {m}")));
    }
    let l = Layout::new(m, n, adversary.private_width(m, n));
    let tuples = key_tuples(m, n, seed);
    let weight = 1.0 / tuples.len() as f64;
    let (mut distance, mut pass) = (0.0, 0.0);
    let mut steps = vec![0.0; n];
    let mut lemma = 0.0;
    for keys in &tuples {
        let real = real_branch(adversary, &l, keys)?;
        let sim = sim_branch(adversary, &l, keys)?;
        pass += weight * real.norm_sqr();
        let (rl, sl) = (by_label(&real, &l), by_label(&sim, &l));
        let empty = SparseState::from_amplitudes(l.total, std::iter::empty());
        let labels: std::collections::BTreeSet<u128> = rl.keys().chain(sl.keys()).copied().collect();
        for v in labels {
            distance += weight * rank_one_distance(rl.get(&v).unwrap_or(&empty), sl.get(&v).unwrap_or(&empty));
        }
        let phi = initial(&l, keys);
        let hs: Vec<SparseState> = (0..=n).map(|t| hybrid(adversary, &l, keys, &phi, t)).collect::<Result<_>>()?;
        for t in 1..=n {
            steps[t - 1] += weight * difference_norm_sqr(&hs[t - 1], &hs[t]);
        }
        lemma += weight * difference_norm_sqr(&hs[0], &hs[n]);
    }
    let rm = (m as f64).sqrt();
    Ok(ItCoreReport {
        distance,
        bound: 4.0 * n as f64 / rm,
        step_deviations: steps.into_iter().map(|x| x.max(0.0).sqrt()).collect(),
        step_bound: 2.0 / rm,
        lemma_deviation: lemma.max(0.0).sqrt(),
        pass_probability: pass,
    })
}
