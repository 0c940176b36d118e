//! Sequential composition and the amplifiers: repeat-and-pick,
//! cut-and-choose over a two-mode protocol, scored-to-plain two-mode
//! amplification, and two-mode protocols built from an ROAV.

mod params;

use crate::functionalities::{ideal_rspv_chosen, ideal_roav, RoavSpec};
use crate::protocol::{
    Adversary, FlagValue, Message, Mode, Protocol, ProtocolError, Result, ScoreValue, Session, StepResult,
    TargetState, TwoModeProtocol,
};
use crate::qsim::Bits;

pub use params::{
    prersvp_length, repeat_pick_length, scored_delta, scored_gap, scored_length, scored_threshold, test_probability,
    AmplifierKind, AmplifierParams, Profile,
};

/// Width of a record holding an index in 0..n.
pub fn index_width(n: usize) -> usize {
    (usize::BITS - n.saturating_sub(1).leading_zeros()).max(1) as usize
}

/// Throws away server registers that are no longer outputs.
pub fn discard_outputs(s: &mut Session, outputs: &[String]) -> Result<()> {
    for r in outputs {
        if s.world.contains(r) {
            let (w, ch) = s.world_and_outcomes();
            w.discard(r, ch)?;
        }
    }
    Ok(())
}

fn all_pass(results: &[StepResult]) -> FlagValue {
    results.iter().fold(FlagValue::Pass, |f, r| f.and(r.flag))
}

fn round_scope(i: usize) -> String {
    format!("r{i}")
}

// ---- repeat and pick ----

/// Runs `sub` L times, picks a uniform round i and fails if any of rounds
/// 1..=i failed. The picked round's outputs are the outputs.
pub fn repeat_and_pick(s: &mut Session, adv: &dyn Adversary, sub: &dyn Protocol, rounds: usize) -> Result<StepResult> {
    if rounds == 0 {
        return Err(ProtocolError::BadParameters("at least one round is needed".into()));
    }
    let mut results = Vec::with_capacity(rounds);
    for i in 0..rounds {
        results.push(s.scoped(&round_scope(i), |s| sub.execute(s, adv))?);
    }
    let pick = s.client_uniform(rounds);
    s.set_client("pick", Bits::from_uint(pick as u64, index_width(rounds)))?;
    let flag = all_pass(&results[..=pick]);
    s.send(Message::new("pick").number(pick as u64));
    for (i, r) in results.iter().enumerate() {
        if i != pick {
            discard_outputs(s, &r.outputs)?;
        }
    }
    let chosen = results.swap_remove(pick);
    Ok(StepResult { flag, score: None, descriptions: chosen.descriptions, outputs: chosen.outputs })
}

/// [`repeat_and_pick`] as a protocol.
#[derive(Clone, Debug)]
pub struct RepeatPick<P> {
    pub sub: P,
    pub params: AmplifierParams,
}

impl<P: Protocol> RepeatPick<P> {
    pub fn new(sub: P, params: AmplifierParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { sub, params })
    }
}

impl<P: Protocol> Protocol for RepeatPick<P> {
    fn id(&self) -> String {
        format!("repeat_pick({})", self.sub.id())
    }
    fn features(&self) -> Vec<&'static str> {
        self.sub.features()
    }
    fn execute(&self, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult> {
        repeat_and_pick(s, adv, &self.sub, self.params.rounds)
    }
}

// ---- sequential composition ----

/// Runs named sub-protocols one after another, each in its own scope.
pub struct Sequential {
    parts: Vec<(String, Box<dyn Protocol>)>,
}

impl Sequential {
    /// Scope names must be distinct so output registers cannot collide.
    pub fn new(parts: Vec<(String, Box<dyn Protocol>)>) -> Result<Self> {
        for (i, (a, _)) in parts.iter().enumerate() {
            if parts[..i].iter().any(|(b, _)| b == a) {
                return Err(ProtocolError::RegisterClash(a.clone()));
            }
        }
        Ok(Self { parts })
    }
}

/// Runs `subs` in order in the current scope; flag = pass iff all pass.
/// A register created twice is a clash.
pub fn sequential_compose(s: &mut Session, adv: &dyn Adversary, subs: &[&dyn Protocol]) -> Result<StepResult> {
    let mut out = StepResult::pass();
    for sub in subs {
        let r = sub.execute(s, adv).map_err(|e| match e {
            ProtocolError::DuplicateRegister(r) | ProtocolError::ClientRegisterRewrite(r) => ProtocolError::RegisterClash(r),
            e => e,
        })?;
        out.flag = out.flag.and(r.flag);
        out.descriptions.extend(r.descriptions);
        out.outputs.extend(r.outputs);
    }
    Ok(out)
}

impl Protocol for Sequential {
    fn id(&self) -> String {
        let ids: Vec<String> = self.parts.iter().map(|p| p.1.id()).collect();
        format!("seq({})", ids.join(","))
    }
    fn features(&self) -> Vec<&'static str> {
        let mut f: Vec<&'static str> = self.parts.iter().flat_map(|p| p.1.features()).collect();
        f.sort();
        f.dedup();
        f
    }
    fn execute(&self, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult> {
        let mut out = StepResult::pass();
        for (name, p) in &self.parts {
            let r = s.scoped(name, |s| p.execute(s, adv))?;
            out.flag = out.flag.and(r.flag);
            out.descriptions.extend(r.descriptions);
            out.outputs.extend(r.outputs);
        }
        Ok(out)
    }
}

// ---- cut and choose ----

/// Cut-and-choose: L rounds, each test with probability p (hidden from the
/// server); fails if any round fails; outputs a uniform comp round, whose
/// index is announced. An all-test draw is redrawn.
pub fn amplify_prersvp(
    s: &mut Session,
    adv: &dyn Adversary,
    two: &dyn TwoModeProtocol,
    params: &AmplifierParams,
) -> Result<StepResult> {
    let l = params.rounds;
    if l == 0 {
        return Err(ProtocolError::BadParameters("at least one round is needed".into()));
    }
    if params.p >= 1.0 {
        return Err(ProtocolError::NoCompRound);
    }
    let modes: Vec<bool> = loop {
        let v: Vec<bool> = (0..l).map(|_| s.client_bernoulli(params.p)).collect();
        if v.iter().any(|t| !t) {
            break v;
        }
    };
    s.set_client("modes", Bits::from_bools(modes.clone()))?;
    let mut results = Vec::with_capacity(l);
    for (i, &test) in modes.iter().enumerate() {
        let mode = if test { Mode::Test } else { Mode::Comp };
        let r = s.scoped(&round_scope(i), |s| two.execute_mode(mode, s, adv))?;
        s.clear_divergence();
        results.push(r);
    }
    let comps: Vec<usize> = (0..l).filter(|&i| !modes[i]).collect();
    let pick = comps[s.client_uniform(comps.len())];
    s.set_client("pick", Bits::from_uint(pick as u64, index_width(l)))?;
    let flag = all_pass(&results);
    s.send(Message::new("pick").number(pick as u64));
    for (i, r) in results.iter().enumerate() {
        if i != pick {
            discard_outputs(s, &r.outputs)?;
        }
    }
    let chosen = results.swap_remove(pick);
    Ok(StepResult { flag, score: None, descriptions: chosen.descriptions, outputs: chosen.outputs })
}

/// [`amplify_prersvp`] as a protocol.
#[derive(Clone, Debug)]
pub struct Amplified<T> {
    pub inner: T,
    pub params: AmplifierParams,
}

impl<T: TwoModeProtocol> Amplified<T> {
    pub fn new(inner: T, params: AmplifierParams) -> Result<Self> {
        params.validate()?;
        if params.kind != AmplifierKind::PreRspv {
            return Err(ProtocolError::BadParameters("cut-and-choose needs pre-RSPV parameters".into()));
        }
        Ok(Self { inner, params })
    }
}

impl<T: TwoModeProtocol> Protocol for Amplified<T> {
    fn id(&self) -> String {
        format!("amplified({})", self.inner.id())
    }
    fn features(&self) -> Vec<&'static str> {
        self.inner.features()
    }
    fn execute(&self, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult> {
        amplify_prersvp(s, adv, &self.inner, &self.params)
    }
}

// ---- scored to plain ----

/// Scored two-mode protocol amplified to a plain two-mode protocol. Test:
/// L scored test rounds, fail on any failed flag or fewer wins than the
/// threshold. Comp: uniform stop index, that many minus one test rounds,
/// then one comp round.
#[derive(Clone, Debug)]
pub struct ScoredAmplifier<T> {
    pub inner: T,
    pub params: AmplifierParams,
}

impl<T: TwoModeProtocol> ScoredAmplifier<T> {
    pub fn new(inner: T, params: AmplifierParams) -> Result<Self> {
        params.validate()?;
        if params.kind != AmplifierKind::Scored {
            return Err(ProtocolError::BadParameters("scored amplification needs scored parameters".into()));
        }
        if !inner.scored() {
            return Err(ProtocolError::BadParameters(format!("{} records no score", inner.id())));
        }
        Ok(Self { inner, params })
    }

    fn test_round(&self, s: &mut Session, adv: &dyn Adversary, i: usize) -> Result<StepResult> {
        let r = s.scoped(&round_scope(i), |s| self.inner.execute_mode(Mode::Test, s, adv))?;
        s.clear_divergence();
        discard_outputs(s, &r.outputs)?;
        Ok(r)
    }
}

impl<T: TwoModeProtocol> TwoModeProtocol for ScoredAmplifier<T> {
    fn id(&self) -> String {
        format!("scored_amp({})", self.inner.id())
    }
    fn features(&self) -> Vec<&'static str> {
        self.inner.features()
    }
    fn execute_mode(&self, mode: Mode, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult> {
        let l = self.params.rounds;
        match mode {
            Mode::Test => {
                let mut flag = FlagValue::Pass;
                let mut wins = 0u64;
                for i in 0..l {
                    let r = self.test_round(s, adv, i)?;
                    flag = flag.and(r.flag);
                    wins += (r.score == Some(ScoreValue::Win)) as u64;
                }
                s.set_client("wins", Bits::from_uint(wins, index_width(l + 1)))?;
                if (wins as f64) < self.params.threshold {
                    flag = FlagValue::Fail;
                }
                Ok(StepResult::new(flag))
            }
            Mode::Comp => {
                let stop = s.client_uniform(l) + 1;
                s.set_client("stop", Bits::from_uint(stop as u64, index_width(l + 1)))?;
                let mut flag = FlagValue::Pass;
                for i in 0..stop - 1 {
                    flag = flag.and(self.test_round(s, adv, i)?.flag);
                }
                if !flag.is_pass() {
                    s.mark_divergence();
                    return Ok(StepResult::new(flag));
                }
                let r = s.scoped(&round_scope(stop - 1), |s| self.inner.execute_mode(Mode::Comp, s, adv))?;
                Ok(StepResult { flag: r.flag, score: None, descriptions: r.descriptions, outputs: r.outputs })
            }
        }
    }
}

// ---- two-mode protocols from an ROAV ----

/// Test mode: client-chosen RSPV of ρ_test, then the ROAV test. Comp mode:
/// client-chosen RSPV of ρ_comp, then the ROAV comp step, whose outcome and
/// output register carry E(ρ_comp). Both use the ideal ROAV.
#[derive(Clone, Debug)]
pub struct RoavComposition {
    pub test_family: TargetState,
    pub comp_family: TargetState,
    pub roav: RoavSpec,
    /// Extra server registers fed to the POVM after the delivered register.
    pub extra_inputs: Vec<String>,
}

impl RoavComposition {
    pub fn new(test_family: TargetState, comp_family: TargetState, roav: RoavSpec, extra_inputs: Vec<String>) -> Result<Self> {
        if test_family.width() != comp_family.width() {
            return Err(ProtocolError::LayoutMismatch("test and comp states live on different registers".into()));
        }
        Ok(Self { test_family, comp_family, roav, extra_inputs })
    }
}

/// Client-side sample from a family, then the ideal chosen-input RSPV.
pub fn rspv0(s: &mut Session, adv: &dyn Adversary, family: &TargetState, desc: &str, out: &str) -> Result<FlagValue> {
    let weights: Vec<f64> = family.members.iter().map(|m| m.0).collect();
    let choice = s.client_choice(&weights);
    ideal_rspv_chosen(s, adv, family, choice, desc, out)
}

impl TwoModeProtocol for RoavComposition {
    fn id(&self) -> String {
        format!("roav_rspv({}/{})", self.test_family.family, self.comp_family.family)
    }
    fn features(&self) -> Vec<&'static str> {
        vec!["ideal", "roav"]
    }
    fn execute_mode(&self, mode: Mode, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult> {
        let (family, desc) = match mode {
            Mode::Test => (&self.test_family, "din"),
            Mode::Comp => (&self.comp_family, "dcomp"),
        };
        let f1 = rspv0(s, adv, family, desc, "qin")?;
        let desc = s.reg(desc);
        if !f1.is_pass() {
            s.mark_divergence();
            return Ok(StepResult { flag: f1, score: None, descriptions: vec![desc], outputs: Vec::new() });
        }
        let qin = s.reg("qin");
        let mut inputs: Vec<&str> = vec![&qin];
        inputs.extend(self.extra_inputs.iter().map(|x| x.as_str()));
        let f2 = ideal_roav(s, adv, &self.roav, &inputs, "qout", "dout")?;
        s.mark_divergence();
        let flag = f1.and(f2);
        match mode {
            Mode::Test => {
                let outs = vec![s.reg("qout")];
                discard_outputs(s, &outs)?;
                Ok(StepResult::new(flag))
            }
            Mode::Comp => {
                let mut descriptions = vec![desc];
                if f2.is_pass() {
                    descriptions.push(s.reg("dout"));
                }
                let qout = s.reg("qout");
                let outputs = if s.world.contains(&qout) { vec![qout] } else { Vec::new() };
                Ok(StepResult { flag, score: None, descriptions, outputs })
            }
        }
    }
}
