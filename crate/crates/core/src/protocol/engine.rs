use std::collections::BTreeMap;

use crate::qsim::{cq_trace_distance, Bits, CqEnsemble, Labels, PureBranch, RegKind, RegisterLayout, SparseState};

use super::{
    Adversary, Chooser, FlagValue, OutcomeSource, Owner, Protocol, ProtocolError, Result, Rigging, ScoreValue, Session,
    Transcript, World, FLAG, SCORE,
};

/// Knobs for a protocol run.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub rig: Rigging,
    /// Initial registers held by the environment rather than the server.
    pub environment: Vec<String>,
    /// Enumerate client randomness too in exact runs.
    pub enumerate_client: bool,
    pub max_paths: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { rig: Rigging::default(), environment: Vec::new(), enumerate_client: false, max_paths: 1 << 18 }
    }
}

/// Result of one protocol execution.
#[derive(Clone, Debug)]
pub struct ProtocolOutcome {
    pub flag: FlagValue,
    pub score: Option<ScoreValue>,
    /// Output description registers and their values.
    pub client_descriptions: BTreeMap<String, Bits>,
    /// Final world: every remaining quantum register, labelled by the
    /// descriptions, flag and (if scored) score.
    pub final_state: CqEnsemble,
    pub transcript: Transcript,
    /// Server-side output registers.
    pub outputs: Vec<String>,
    /// Everything the client wrote during the run, discarded intermediates included.
    pub client_records: BTreeMap<String, Bits>,
    /// Round index where the two modes diverge, if the protocol marked one.
    pub divergence: Option<usize>,
}

impl ProtocolOutcome {
    pub fn description(&self, name: &str) -> Option<&Bits> {
        self.client_descriptions.get(name)
    }

    pub fn record(&self, name: &str) -> Option<&Bits> {
        self.client_records.get(name)
    }

    /// The final state projected onto flag = pass.
    pub fn project_pass(&self) -> CqEnsemble {
        project_pass(&self.final_state)
    }
}

/// Drops flag = fail branches without renormalizing.
pub fn project_pass(ens: &CqEnsemble) -> CqEnsemble {
    ens.project(|l| l.get(FLAG).and_then(FlagValue::from_bits).is_none_or(FlagValue::is_pass))
}

fn owner_fn(env: &[String]) -> impl Fn(&str) -> Owner + '_ {
    move |n: &str| {
        if env.iter().any(|e| e == n) || n.starts_with("env") {
            Owner::Environment
        } else {
            Owner::Server
        }
    }
}

fn load_initial(s: &mut Session, initial: &CqEnsemble, env: &[String]) -> Result<()> {
    let br = initial.branches();
    if br.is_empty() {
        return Ok(());
    }
    let probs: Vec<f64> = br.iter().map(|b| b.weight).collect();
    let i = if br.len() == 1 { 0 } else { s.outcomes().choose(&probs) };
    let own = owner_fn(env);
    s.world.load(initial.layout(), &br[i], &own)
}

fn execute_once(
    protocol: &dyn Protocol,
    adv: &dyn Adversary,
    initial: &CqEnsemble,
    seed: u64,
    outcomes: OutcomeSource,
    opts: &RunOptions,
) -> Result<(ProtocolOutcome, OutcomeSource)> {
    if !adv.applies_to(&protocol.features()) {
        return Err(ProtocolError::InapplicableProtocol { adversary: adv.name(), protocol: protocol.id() });
    }
    let mut s = Session::new(seed, outcomes);
    s.rig = opts.rig.clone();
    s.set_enumerate_client(opts.enumerate_client);
    s.set_protocol(&protocol.id());
    load_initial(&mut s, initial, &opts.environment)?;
    let step = protocol.execute(&mut s, adv)?;
    let ctx = s.ctx("finish");
    adv.finish(&ctx, &mut s.view(), &step.outputs)?;
    let score = if protocol.scored() { Some(step.score.unwrap_or(ScoreValue::Bottom)) } else { None };
    let mut descriptions = BTreeMap::new();
    for d in &step.descriptions {
        let v = s.world.client(d).cloned().ok_or_else(|| ProtocolError::UnknownRegister(d.clone()))?;
        descriptions.insert(d.clone(), v);
    }
    let mut labels: Labels = descriptions.clone();
    labels.insert(FLAG.into(), step.flag.to_bits());
    if let Some(sc) = score {
        labels.insert(SCORE.into(), sc.to_bits());
    }
    let (layout, branch) = s.world.to_branch(&labels, 1.0)?;
    let client_records = s.world.client_records().clone();
    let (_, transcript, outcomes, divergence) = s.into_parts();
    let final_state = CqEnsemble::new(layout, vec![branch])?;
    Ok((
        ProtocolOutcome {
            flag: step.flag,
            score,
            client_descriptions: descriptions,
            final_state,
            transcript,
            outputs: step.outputs,
            client_records,
            divergence,
        },
        outcomes,
    ))
}

/// Runs a protocol once with Born-rule sampling. Deterministic in `seed`.
pub fn run(protocol: &dyn Protocol, adv: &dyn Adversary, initial: &CqEnsemble, seed: u64) -> Result<ProtocolOutcome> {
    run_with(protocol, adv, initial, seed, &RunOptions::default())
}

pub fn run_with(
    protocol: &dyn Protocol,
    adv: &dyn Adversary,
    initial: &CqEnsemble,
    seed: u64,
    opts: &RunOptions,
) -> Result<ProtocolOutcome> {
    execute_once(protocol, adv, initial, seed, OutcomeSource::sampled(seed), opts).map(|r| r.0)
}

/// Every measurement (and coin) path of a run with fixed client randomness.
#[derive(Clone, Debug)]
pub struct ExactOutcome {
    pub paths: Vec<(f64, ProtocolOutcome)>,
    pub ensemble: CqEnsemble,
}

impl ExactOutcome {
    pub fn pass_probability(&self) -> f64 {
        self.paths.iter().filter(|(_, o)| o.flag.is_pass()).map(|(p, _)| p).sum()
    }

    pub fn score_probability(&self, s: ScoreValue) -> f64 {
        self.paths.iter().filter(|(_, o)| o.score == Some(s)).map(|(p, _)| p).sum()
    }

    pub fn project_pass(&self) -> CqEnsemble {
        project_pass(&self.ensemble)
    }
}

/// Enumerates all paths depth-first over the choice tree.
pub fn enumerate_paths<T>(
    max_paths: usize,
    mut f: impl FnMut(OutcomeSource) -> Result<(T, OutcomeSource)>,
) -> Result<Vec<(f64, T)>> {
    let mut out = Vec::new();
    let mut forced: Vec<usize> = Vec::new();
    loop {
        if out.len() >= max_paths {
            return Err(ProtocolError::PathLimit(max_paths));
        }
        let (v, src) = f(OutcomeSource::scripted(forced.clone()))?;
        let OutcomeSource::Scripted { options, prob, .. } = src else {
            return Err(ProtocolError::Internal("outcome source changed kind".into()));
        };
        if prob >= crate::qsim::BRANCH_PRUNE {
            out.push((prob, v));
        }
        let taken: Vec<usize> = (0..options.len()).map(|i| forced.get(i).copied().unwrap_or(0)).collect();
        let Some(i) = (0..options.len()).rev().find(|&i| taken[i] + 1 < options[i]) else {
            return Ok(out);
        };
        forced = taken[..=i].to_vec();
        forced[i] += 1;
    }
}

/// Runs a protocol over every outcome path and combines them into one cq-state.
pub fn run_exact(
    protocol: &dyn Protocol,
    adv: &dyn Adversary,
    initial: &CqEnsemble,
    seed: u64,
    opts: &RunOptions,
) -> Result<ExactOutcome> {
    let paths = enumerate_paths(opts.max_paths, |src| execute_once(protocol, adv, initial, seed, src, opts))?;
    let ensemble = combine_paths(&paths)?;
    Ok(ExactOutcome { paths, ensemble })
}

fn quantum_entries(l: &RegisterLayout) -> Vec<(String, usize)> {
    l.entries().iter().filter(|e| e.kind == RegKind::Quantum).map(|e| (e.name.clone(), e.width)).collect()
}

/// Re-lays a branch state from layout `from` onto `to` (missing registers in |0⟩).
fn remap(state: &SparseState, from: &RegisterLayout, to: &RegisterLayout) -> Result<SparseState> {
    let mut moves: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for (name, _) in quantum_entries(from) {
        let dst = to.qubits_of(&name).map_err(|_| ProtocolError::LayoutMismatch(format!("register {name} has no place")))?;
        moves.push((from.qubits_of(&name)?, dst));
    }
    let n = to.quantum_width();
    Ok(SparseState::from_amplitudes(
        n,
        state.iter().map(|(k, a)| {
            let mut nk = 0u128;
            for (src, dst) in &moves {
                for (s, d) in src.iter().zip(dst) {
                    nk |= ((k >> s) & 1) << d;
                }
            }
            (nk, a)
        }),
    ))
}

/// Weighted union of ensembles over the union of their registers.
pub fn merge(parts: &[(f64, &CqEnsemble)]) -> Result<CqEnsemble> {
    let mut q: Vec<(String, usize)> = Vec::new();
    let mut c: BTreeMap<String, usize> = BTreeMap::new();
    for (_, e) in parts {
        for ent in e.layout().entries() {
            match ent.kind {
                RegKind::Quantum => match q.iter().find(|x| x.0 == ent.name) {
                    Some(x) if x.1 != ent.width => {
                        return Err(ProtocolError::LayoutMismatch(format!("register {} width differs", ent.name)))
                    }
                    Some(_) => {}
                    None => q.push((ent.name.clone(), ent.width)),
                },
                RegKind::Classical => {
                    if let Some(w) = c.insert(ent.name.clone(), ent.width) {
                        if w != ent.width {
                            return Err(ProtocolError::LayoutMismatch(format!("record {} width differs", ent.name)));
                        }
                    }
                }
            }
        }
    }
    let total: usize = q.iter().map(|x| x.1).sum();
    let mut layout = RegisterLayout::with_max(total.max(crate::qsim::DEFAULT_MAX_QUANTUM_WIDTH));
    for (n, w) in &q {
        layout.push(n, RegKind::Quantum, *w)?;
    }
    for (n, w) in &c {
        layout.push(n, RegKind::Classical, *w)?;
    }
    let mut branches = Vec::new();
    for (p, e) in parts {
        for b in e.branches() {
            let state = if e.layout() == &layout { b.state.clone() } else { remap(&b.state, e.layout(), &layout)? };
            branches.push(PureBranch { label: b.label.clone(), weight: p * b.weight, state });
        }
    }
    Ok(CqEnsemble::new(layout, branches)?)
}

/// Combines exact paths into one ensemble.
pub fn combine_paths(paths: &[(f64, ProtocolOutcome)]) -> Result<CqEnsemble> {
    let parts: Vec<(f64, &CqEnsemble)> = paths.iter().map(|(p, o)| (*p, &o.final_state)).collect();
    merge(&parts)
}

/// Re-lays an ensemble's quantum registers in the given order.
pub fn conform(ens: &CqEnsemble, order: &[(String, usize)]) -> Result<CqEnsemble> {
    let total: usize = order.iter().map(|x| x.1).sum();
    let mut layout = RegisterLayout::with_max(total.max(crate::qsim::DEFAULT_MAX_QUANTUM_WIDTH));
    for (n, w) in order {
        layout.push(n, RegKind::Quantum, *w)?;
    }
    for e in ens.layout().entries().iter().filter(|e| e.kind == RegKind::Classical) {
        layout.push(&e.name, RegKind::Classical, e.width)?;
    }
    let mut branches = Vec::new();
    for b in ens.branches() {
        branches.push(PureBranch { label: b.label.clone(), weight: b.weight, state: remap(&b.state, ens.layout(), &layout)? });
    }
    Ok(CqEnsemble::new(layout, branches)?)
}

/// Adds a classical label to every branch.
pub fn with_label(ens: &CqEnsemble, name: &str, value: &Bits) -> Result<CqEnsemble> {
    let mut layout = ens.layout().clone();
    if layout.entry(name).is_none() {
        layout.push(name, RegKind::Classical, value.len())?;
    }
    let branches = ens
        .branches()
        .iter()
        .map(|b| {
            let mut l = b.label.clone();
            l.insert(name.into(), value.clone());
            PureBranch { label: l, weight: b.weight, state: b.state.clone() }
        })
        .collect();
    Ok(CqEnsemble::new(layout, branches)?)
}

/// Applies a world-level channel to every branch, enumerating its outcomes.
/// Labels are loaded as client records and every record ends up a label.
pub fn apply_channel(
    ens: &CqEnsemble,
    environment: &[String],
    max_paths: usize,
    f: &dyn Fn(&mut World, &mut OutcomeSource) -> Result<()>,
) -> Result<CqEnsemble> {
    let own = owner_fn(environment);
    let mut outs: Vec<(f64, CqEnsemble)> = Vec::new();
    for b in ens.branches() {
        let paths = enumerate_paths(max_paths, |mut src| {
            let mut w = World::new();
            w.load(ens.layout(), b, &own)?;
            f(&mut w, &mut src)?;
            let labels = w.client_records().clone();
            let (layout, br) = w.to_branch(&labels, 1.0)?;
            Ok((CqEnsemble::new(layout, vec![br])?, src))
        })?;
        for (p, e) in paths {
            outs.push((p * b.weight, e));
        }
    }
    let parts: Vec<(f64, &CqEnsemble)> = outs.iter().map(|(p, e)| (*p, e)).collect();
    if parts.is_empty() {
        return Ok(CqEnsemble::empty(ens.layout().clone()));
    }
    merge(&parts)
}

/// A state family ρ_tar = Σ_i p_i |i⟩⟨i| ⊗ |φ_i⟩⟨φ_i|.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetState {
    pub family: String,
    pub description_reg: String,
    pub quantum_reg: String,
    pub members: Vec<(f64, Bits, SparseState)>,
}

impl TargetState {
    pub fn new(family: &str, description_reg: &str, quantum_reg: &str, members: Vec<(f64, Bits, SparseState)>) -> Result<Self> {
        let Some((_, d0, s0)) = members.first() else {
            return Err(ProtocolError::BadParameters("empty state family".into()));
        };
        let (dw, qw) = (d0.len(), s0.num_qubits());
        if members.iter().any(|(_, d, s)| d.len() != dw || s.num_qubits() != qw || !s.is_normalized(1e-10)) {
            return Err(ProtocolError::BadParameters("inconsistent family members".into()));
        }
        let total: f64 = members.iter().map(|m| m.0).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ProtocolError::BadParameters(format!("family weights sum to {total}")));
        }
        Ok(Self { family: family.into(), description_reg: description_reg.into(), quantum_reg: quantum_reg.into(), members })
    }

    /// Uniform weights 1/D.
    pub fn uniform(family: &str, description_reg: &str, quantum_reg: &str, states: Vec<(Bits, SparseState)>) -> Result<Self> {
        let d = states.len() as f64;
        Self::new(family, description_reg, quantum_reg, states.into_iter().map(|(b, s)| (1.0 / d, b, s)).collect())
    }

    pub fn width(&self) -> usize {
        self.members[0].2.num_qubits()
    }

    /// The ideal cq-state.
    pub fn ensemble(&self) -> Result<CqEnsemble> {
        let w = self.width();
        let layout = RegisterLayout::with_max(w.max(crate::qsim::DEFAULT_MAX_QUANTUM_WIDTH))
            .quantum(&self.quantum_reg, w)?
            .classical(&self.description_reg, self.members[0].1.len())?;
        let branches = self
            .members
            .iter()
            .map(|(p, d, s)| PureBranch { label: [(self.description_reg.clone(), d.clone())].into(), weight: *p, state: s.clone() })
            .collect();
        Ok(CqEnsemble::new(layout, branches)?)
    }

    /// The member state for a description.
    pub fn state_for(&self, d: &Bits) -> Option<&SparseState> {
        self.members.iter().find(|m| &m.1 == d).map(|m| &m.2)
    }
}

/// A server-side channel acting on the ideal target (and initial) state.
pub trait Simulator {
    fn name(&self) -> String;
    /// Maps ρ_tar ⊗ ρ0 to the simulated joint state; may set `flag` labels.
    fn simulate(&self, ideal: &CqEnsemble) -> Result<CqEnsemble>;
}

/// Does nothing; flag always pass.
pub struct IdentitySimulator;

impl Simulator for IdentitySimulator {
    fn name(&self) -> String {
        "identity".into()
    }
    fn simulate(&self, ideal: &CqEnsemble) -> Result<CqEnsemble> {
        with_label(ideal, FLAG, &FlagValue::Pass.to_bits())
    }
}

/// Trace distance between a real passing state and the simulated passing
/// state, over every register the distinguisher sees.
pub fn compare_to_simulated(
    real_pass: &CqEnsemble,
    target: &TargetState,
    simulator: &dyn Simulator,
    initial: &CqEnsemble,
) -> Result<f64> {
    let ideal = target.ensemble()?.tensor(initial)?;
    let sim = simulator.simulate(&ideal)?;
    for c in ideal.layout().classical_names() {
        let before = ideal.label_distribution(&c);
        for (v, p) in sim.label_distribution(&c) {
            if p > before.get(&v).copied().unwrap_or(0.0) + 1e-9 {
                return Err(ProtocolError::SimulatorTouchesClientRegisters);
            }
        }
        if sim.branches().iter().any(|b| !b.label.contains_key(&c)) {
            return Err(ProtocolError::SimulatorTouchesClientRegisters);
        }
    }
    let sim_pass = project_pass(&sim);
    let order = quantum_entries(real_pass.layout());
    let sim_pass = conform(&sim_pass, &order)?;
    Ok(cq_trace_distance(real_pass, &sim_pass)?)
}
