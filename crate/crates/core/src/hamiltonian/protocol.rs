use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amplification::{discard_outputs, index_width};
use crate::functionalities::{ideal_roav, ideal_rspv_chosen, RoavSpec};
use crate::protocol::{
    run, Adversary, FlagValue, Mode, Owner, Protocol, ProtocolError, ProtocolOutcome, Result as PResult, Session,
    StepResult, TargetState, TwoModeProtocol,
};
use crate::qsim::{Bits, C64, CqEnsemble, Labels, PureBranch, RegisterLayout, SparseState, DEFAULT_MAX_QUANTUM_WIDTH};

use super::model::{Pauli, XZHamiltonian};
use super::{HamiltonianError, Result};

/// Largest n·K for an exact [`sample_rho_comp`] ensemble.
pub const MAX_SAMPLED_QUBITS: usize = 16;
/// Largest register for the energy test; the Bell POVM has 4^n outcomes.
const MAX_TEST_QUBITS: usize = 5;

/// Client side of one sampled round: term index and measurement bits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompRecord {
    pub j: usize,
    pub mr: Bits,
}

/// The qubit state left on Q after measuring the EPR partner of each qubit
/// in the basis of term j: |mr_t⟩ for Z and I letters, H|mr_t⟩ for X.
pub fn comp_state(h: &XZHamiltonian, j: usize, mr: &Bits) -> Result<SparseState> {
    let letters = &h.terms.get(j).ok_or(HamiltonianError::TermOutOfRange(j))?.1;
    if mr.len() != h.n {
        return Err(HamiltonianError::LengthMismatch { expected: h.n, got: mr.len() });
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut state = SparseState::zero(0);
    for (t, p) in letters.iter().enumerate() {
        let m = mr.get(t);
        let q = match p {
            Pauli::X => {
                let sign = if m { -s } else { s };
                SparseState::from_amplitudes(1, [(0, C64::new(s, 0.0)), (1, C64::new(sign, 0.0))])
            }
            _ => SparseState::basis(1, m as u128),
        };
        state = state.tensor(&q)?;
    }
    Ok(state)
}

/// γ_j (−1)^{⊕_t (mr_t ⊕ key_t)} over the non-identity letters, where the
/// key is a_t (0-based position 2t of the Bell record) for Z and b_t
/// (position 2t+1) for X.
pub fn round_value(h: &XZHamiltonian, j: usize, mr: &Bits, out: &Bits) -> Result<f64> {
    let (gamma, letters) = h.terms.get(j).ok_or(HamiltonianError::TermOutOfRange(j))?;
    if mr.len() != h.n {
        return Err(HamiltonianError::LengthMismatch { expected: h.n, got: mr.len() });
    }
    if out.len() != 2 * h.n {
        return Err(HamiltonianError::LengthMismatch { expected: 2 * h.n, got: out.len() });
    }
    let mut parity = false;
    for (t, p) in letters.iter().enumerate() {
        let key = match p {
            Pauli::I => continue,
            Pauli::Z => out.get(2 * t),
            Pauli::X => out.get(2 * t + 1),
        };
        parity ^= mr.get(t) ^ key;
    }
    Ok(if parity { -gamma } else { *gamma })
}

/// Mean of [`round_value`] over the rounds.
pub fn val_h(h: &XZHamiltonian, comp: &[CompRecord], out: &[Bits]) -> Result<f64> {
    if comp.len() != out.len() {
        return Err(HamiltonianError::LengthMismatch { expected: comp.len(), got: out.len() });
    }
    if comp.is_empty() {
        return Err(HamiltonianError::LengthMismatch { expected: 1, got: 0 });
    }
    let mut sum = 0.0;
    for (c, o) in comp.iter().zip(out) {
        sum += round_value(h, c.j, &c.mr, o)?;
    }
    Ok(sum / comp.len() as f64)
}

/// Energy-mode rule: accept iff val < (a+b)/2.
pub fn energy_decision(val: f64, a: f64, b: f64) -> bool {
    val < (a + b) / 2.0
}

/// The cq-state over (dcomp.index, dcomp.mr, qin) for K rounds: the term
/// indices are drawn from `seed`, the measurement bits are enumerated.
/// Round k occupies qubits k·n..(k+1)·n of qin and the same range of
/// dcomp.mr; dcomp.index holds K MSB-first indices.
pub fn sample_rho_comp(h: &XZHamiltonian, rounds: usize, seed: u64) -> Result<CqEnsemble> {
    let total = h.n * rounds;
    if total > MAX_SAMPLED_QUBITS {
        return Err(HamiltonianError::BudgetExceeded { qubits: total, max: MAX_SAMPLED_QUBITS });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let js: Vec<usize> = (0..rounds).map(|_| rng.random_range(0..h.m())).collect();
    let iw = index_width(h.m());
    let index = js.iter().fold(Bits::zeros(0), |acc, &j| acc.concat(&Bits::from_uint(j as u64, iw)));
    let layout = RegisterLayout::with_max(total.max(DEFAULT_MAX_QUANTUM_WIDTH))
        .quantum("qin", total)?
        .classical("dcomp.index", iw * rounds)?
        .classical("dcomp.mr", total)?;
    let weight = 0.5f64.powi(total as i32);
    let mut branches = Vec::with_capacity(1 << total);
    for v in 0..1u64 << total {
        let mr = Bits::from_uint(v, total);
        let mut state = SparseState::zero(0);
        for (k, &j) in js.iter().enumerate() {
            state = state.tensor(&comp_state(h, j, &mr.slice(k * h.n, (k + 1) * h.n))?)?;
        }
        let mut label = Labels::new();
        label.insert("dcomp.index".into(), index.clone());
        label.insert("dcomp.mr".into(), mr);
        branches.push(PureBranch { label, weight, state });
    }
    Ok(CqEnsemble::new(layout, branches)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

/// One energy-mode round as the client sees it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRound {
    pub j: usize,
    pub mr: Bits,
    /// Decode-key bit per qubit (a_t for Z and I letters, b_t for X).
    pub key: Bits,
    pub value: f64,
}

/// Client view of an energy-test run. `rounds` and `val` are empty in the
/// operator-test mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTestRecord {
    pub mode: Mode,
    pub rounds: Vec<EnergyRound>,
    pub val: Option<f64>,
    pub decision: Decision,
}

/// Two-mode energy test of an XZ Hamiltonian against thresholds a < b. The
/// test mode delivers random BB84 states and runs the Bell ROAV on them;
/// the comp mode delivers the sampled state, Bell-measures it against the
/// witness and accepts iff val < (a+b)/2. As a plain protocol the client
/// picks each mode with probability ½ and records it as `mode` (1 = energy).
#[derive(Clone, Debug)]
pub struct EnergyTest {
    pub h: XZHamiltonian,
    pub a: f64,
    pub b: f64,
    pub kappa: usize,
    /// Number of rounds K actually run.
    pub rounds: usize,
    pub witness: SparseState,
    bells: RoavSpec,
}

impl EnergyTest {
    /// `rounds = None` uses the full K = ⌈100κ²/(b−a)²⌉.
    pub fn new(h: XZHamiltonian, a: f64, b: f64, kappa: usize, rounds: Option<usize>, witness: SparseState) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(HamiltonianError::BadThresholds(format!("need a < b, got a = {a}, b = {b}")));
        }
        if h.n > MAX_TEST_QUBITS {
            return Err(HamiltonianError::TooLarge(h.n));
        }
        if witness.num_qubits() != h.n {
            return Err(HamiltonianError::LengthMismatch { expected: h.n, got: witness.num_qubits() });
        }
        if !witness.is_normalized(1e-9) {
            return Err(HamiltonianError::BadThresholds("witness is not normalized".into()));
        }
        let paper = paper_rounds(kappa, a, b);
        let rounds = rounds.unwrap_or(paper);
        if rounds == 0 {
            return Err(HamiltonianError::BadThresholds("K must be positive".into()));
        }
        let bells = RoavSpec::bells(h.n);
        Ok(Self { h, a, b, kappa, rounds, witness, bells })
    }

    /// K = ⌈100κ²/(b−a)²⌉, reported even when a smaller K is run.
    pub fn paper_rounds(&self) -> usize {
        paper_rounds(self.kappa, self.a, self.b)
    }

    pub fn threshold(&self) -> f64 {
        (self.a + self.b) / 2.0
    }

    fn deliver(&self, mode: Mode, s: &mut Session, adv: &dyn Adversary) -> PResult<(FlagValue, Option<CompRecord>)> {
        let n = self.h.n;
        let (desc, bits, state, comp) = match mode {
            Mode::Test => {
                // (basis, value) per qubit
                let d = s.client_bits(2 * n);
                let mut st = SparseState::zero(0);
                for t in 0..n {
                    let letter = if d.get(2 * t) { Pauli::X } else { Pauli::Z };
                    let one = XZHamiltonian { n: 1, k: 1, terms: vec![(1.0, vec![letter])] };
                    st = st.tensor(&comp_state(&one, 0, &Bits::from_bools(vec![d.get(2 * t + 1)])).map_err(internal)?)?;
                }
                ("din", d, st, None)
            }
            Mode::Comp => {
                let j = s.client_uniform(self.h.m());
                let mr = s.client_bits(n);
                let st = comp_state(&self.h, j, &mr).map_err(internal)?;
                let d = Bits::from_uint(j as u64, index_width(self.h.m())).concat(&mr);
                ("dcomp", d, st, Some(CompRecord { j, mr }))
            }
        };
        let family = TargetState::new("xz_round", desc, "qin", vec![(1.0, bits, state)])?;
        let flag = ideal_rspv_chosen(s, adv, &family, 0, desc, "qin")?;
        Ok((flag, comp))
    }

    /// One round: delivery, witness, Bell ROAV. Returns the flag and, in
    /// comp mode, the client record with the Bell outcome.
    fn round(&self, mode: Mode, s: &mut Session, adv: &dyn Adversary) -> PResult<(FlagValue, Option<(CompRecord, Bits)>)> {
        let n = self.h.n;
        let (f1, comp) = self.deliver(mode, s, adv)?;
        if !f1.is_pass() {
            return Ok((f1, None));
        }
        let (qin, w) = (s.reg("qin"), s.reg("w"));
        s.world.alloc_zero(&w, n, Owner::Server)?;
        let ctx = s.ctx("witness");
        adv.prepare_witness(&ctx, &mut s.view(), &w, &self.witness)?;
        let qs: Vec<(String, usize)> = (0..n).map(|t| (format!("{qin}.{t}"), 1)).collect();
        let ws: Vec<(String, usize)> = (0..n).map(|t| (format!("{w}.{t}"), 1)).collect();
        s.world.split(&qin, &qs)?;
        s.world.split(&w, &ws)?;
        let inputs: Vec<&str> = qs.iter().zip(&ws).flat_map(|(q, w)| [q.0.as_str(), w.0.as_str()]).collect();
        let f2 = ideal_roav(s, adv, &self.bells, &inputs, "qout", "dout")?;
        if !f2.is_pass() {
            let leftover: Vec<String> = qs.into_iter().chain(ws).map(|x| x.0).collect();
            discard_outputs(s, &leftover)?;
            return Ok((f2, None));
        }
        let out = s.client(&s.reg("dout")).ok_or_else(|| ProtocolError::Internal("missing Bell record".into()))?;
        Ok((FlagValue::Pass, comp.map(|c| (c, out))))
    }
}

fn internal(e: HamiltonianError) -> ProtocolError {
    match e {
        HamiltonianError::Protocol(p) => p,
        HamiltonianError::Qsim(q) => ProtocolError::Qsim(q),
        other => ProtocolError::Internal(other.to_string()),
    }
}

fn paper_rounds(kappa: usize, a: f64, b: f64) -> usize {
    (100.0 * (kappa * kappa) as f64 / ((b - a) * (b - a))).ceil() as usize
}

impl TwoModeProtocol for EnergyTest {
    fn id(&self) -> String {
        "energy_test".into()
    }
    fn features(&self) -> Vec<&'static str> {
        vec!["ideal", "roav", "energy_test"]
    }
    fn execute_mode(&self, mode: Mode, s: &mut Session, adv: &dyn Adversary) -> PResult<StepResult> {
        let mut flag = FlagValue::Pass;
        let mut comp = Vec::new();
        let mut outs = Vec::new();
        for k in 0..self.rounds {
            let (f, rec) = s.scoped(&format!("r{k}"), |s| self.round(mode, s, adv))?;
            flag = flag.and(f);
            if let Some((c, o)) = rec {
                comp.push(c);
                outs.push(o);
            }
        }
        s.mark_divergence();
        if mode == Mode::Comp && flag.is_pass() {
            let val = val_h(&self.h, &comp, &outs).map_err(internal)?;
            flag = FlagValue::from_pass(energy_decision(val, self.a, self.b));
        }
        Ok(StepResult::new(flag))
    }
}

impl Protocol for EnergyTest {
    fn id(&self) -> String {
        "energy_test".into()
    }
    fn features(&self) -> Vec<&'static str> {
        TwoModeProtocol::features(self)
    }
    fn execute(&self, s: &mut Session, adv: &dyn Adversary) -> PResult<StepResult> {
        let energy = s.client_uniform(2) == 1;
        s.set_client("mode", Bits::from_bools(vec![energy]))?;
        self.execute_mode(if energy { Mode::Comp } else { Mode::Test }, s, adv)
    }
}

impl EnergyTestRecord {
    /// Rebuilds the client view from a run of `test`, as a plain protocol or
    /// in one fixed mode.
    pub fn from_outcome(test: &EnergyTest, out: &ProtocolOutcome) -> Result<Self> {
        // a single-mode run has no mode record; its rounds tell the mode
        let energy = match out.record("mode") {
            Some(m) => m.get(0),
            None => out.record("r0/dcomp").is_some(),
        };
        let mode = if energy { Mode::Comp } else { Mode::Test };
        let decision = if out.flag.is_pass() { Decision::Accept } else { Decision::Reject };
        if mode == Mode::Test {
            return Ok(Self { mode, rounds: Vec::new(), val: None, decision });
        }
        let (n, iw) = (test.h.n, index_width(test.h.m()));
        let mut rounds = Vec::new();
        for k in 0..test.rounds {
            let (Some(d), Some(o)) = (out.record(&format!("r{k}/dcomp")), out.record(&format!("r{k}/dout"))) else {
                // the round was aborted
                return Ok(Self { mode, rounds, val: None, decision });
            };
            let j = d.slice(0, iw).to_uint() as usize;
            let mr = d.slice(iw, iw + n);
            let letters = &test.h.terms.get(j).ok_or(HamiltonianError::TermOutOfRange(j))?.1;
            let key = Bits::from_bools(
                letters.iter().enumerate().map(|(t, p)| if *p == Pauli::X { o.get(2 * t + 1) } else { o.get(2 * t) }).collect(),
            );
            let value = round_value(&test.h, j, &mr, o)?;
            rounds.push(EnergyRound { j, mr, key, value });
        }
        let val = rounds.iter().map(|r| r.value).sum::<f64>() / rounds.len() as f64;
        Ok(Self { mode, rounds, val: Some(val), decision })
    }
}

/// One run of the energy test (mode chosen by the client) under `adv`.
#[allow(clippy::too_many_arguments)]
pub fn energy_test(
    h: &XZHamiltonian,
    a: f64,
    b: f64,
    kappa: usize,
    rounds: Option<usize>,
    witness: &SparseState,
    adv: &dyn Adversary,
    seed: u64,
) -> Result<ProtocolOutcome> {
    let test = EnergyTest::new(h.clone(), a, b, kappa, rounds, witness.clone())?;
    Ok(run(&test, adv, &empty(), seed)?)
}

fn empty() -> CqEnsemble {
    CqEnsemble::pure(RegisterLayout::new(), SparseState::zero(0)).expect("empty ensemble")
}
