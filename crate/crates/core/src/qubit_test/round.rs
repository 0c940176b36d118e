use crate::amplification::{discard_outputs, rspv0, AmplifierParams, ScoredAmplifier};
use crate::functionalities::{plus_theta_family, toy_ntcf_keygen, ToyFunction};
use crate::protocol::{
    run, Adversary, FlagValue, Message, Mode, ModeOf, Owner, ProtocolError, ProtocolOutcome, Result, ScoreValue,
    Session, StepResult, TwoModeProtocol,
};
use crate::qsim::{gates, Basis, Bits, CqEnsemble, RegisterLayout, SparseState};

use super::game::{optimal_value, u_bit, THETAS};

/// How the client gets the server to hold |+_θ⟩ for odd θ.
#[derive(Clone, Debug, PartialEq)]
pub enum QubitBackend {
    /// Ideal chosen-input delivery of |+_θ⟩, θ uniform over {1, 3, 5, 7}.
    Ideal,
    /// Correctness-only run over the toy 2-to-1 function with domain width κ.
    ToyNtcf { kappa: usize, mu: f64 },
}

/// One round of the qubit test. Test mode scores the answer to a challenge
/// c ∈ {0, 2}; comp mode keeps the qubit with description θ.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitTest {
    pub backend: QubitBackend,
}

fn functionality(e: crate::functionalities::FunctionalityError) -> ProtocolError {
    ProtocolError::BadParameters(e.to_string())
}

/// Toy delivery: the server evaluates the function on a uniform
/// superposition, measures the image y, adds the phase ω^{2x_p + x_j} and
/// Hadamard-measures every coordinate but the pivot j. The client decodes
/// both preimages of y and computes θ from the reported d.
fn toy_delivery(s: &mut Session, adv: &dyn Adversary, kappa: usize, mu: f64) -> Result<(FlagValue, u8)> {
    let seed = s.client_bits(32).to_uint();
    let keys = toy_ntcf_keygen(mu, kappa, seed).map_err(functionality)?;
    let f = ToyFunction::parse(&keys.public_key).map_err(functionality)?;
    let j = f.j;
    s.send(Message::new("ntcf-key").bits(&keys.public_key));
    let (x, y) = (s.reg("x"), s.reg("y"));
    s.world.alloc_zero(&x, kappa, Owner::Server)?;
    s.world.apply_each(&x, &gates::h())?;
    s.world.alloc_zero(&y, kappa + 1, Owner::Server)?;
    let g = f.clone();
    s.world.apply_classical(&[&x, &y], &move |v: &mut [Bits]| {
        let fx = g.eval(&v[0]);
        v[1] = v[1].xor(&fx);
    })?;
    let image = s.view().measure(&[&y], Basis::Computational)?;
    s.view().discard(&y)?;
    s.reply(Message::new("image").bits(&image));
    let pre0 = f.dec_uint(false, bits_le(&image));
    let pre1 = f.dec_uint(true, bits_le(&image));
    // pick the phase coordinate so that θ2 = s_p is a fresh uniform bit when possible
    let want = s.client_uniform(2) == 1;
    let others: Vec<usize> = (0..kappa).filter(|&i| i != j).collect();
    let matching: Vec<usize> = others.iter().copied().filter(|&i| ((f.s >> i) & 1 == 1) == want).collect();
    let pool = if matching.is_empty() { &others } else { &matching };
    let p = pool[s.client_uniform(pool.len())];
    s.send(Message::new("phase-position").number(p as u64));
    s.world.apply_phase(&[&x], &move |v: &[Bits]| gates::eighth_root(2 * v[0].get(p) as i64 + v[0].get(j) as i64))?;
    // move the pivot to the front, then split it off
    s.world.apply_classical(&[&x], &move |v: &mut [Bits]| {
        let mut b = Bits::from_bools(vec![v[0].get(j)]);
        for i in (0..kappa).filter(|&i| i != j) {
            b.push(v[0].get(i));
        }
        v[0] = b;
    })?;
    let (q, rest) = (s.reg("q"), s.reg("x.rest"));
    s.world.split(&x, &[(q.clone(), 1), (rest.clone(), kappa - 1)])?;
    let d = s.view().measure(&[&rest], Basis::Hadamard)?;
    s.view().discard(&rest)?;
    s.reply(Message::new("d").bits(&d));
    let (Some(x0), Some(x1)) = (pre0, pre1) else {
        return Ok((FlagValue::Fail, 1));
    };
    let phase = |x: u64| 2 * ((x >> p) & 1) as i64 + ((x >> j) & 1) as i64;
    let diff = x0 ^ x1;
    let dot = others.iter().enumerate().filter(|(k, &i)| d.get(*k) && (diff >> i) & 1 == 1).count() as i64;
    let theta = (4 * dot + phase(x1) - phase(x0)).rem_euclid(8) as u8;
    let ctx = s.ctx("delivery");
    adv.after_delivery(&ctx, &mut s.view(), std::slice::from_ref(&q))?;
    Ok((FlagValue::Pass, theta))
}

/// Little-endian integer of a bit string (bit i of the value is entry i).
fn bits_le(b: &Bits) -> u64 {
    b.iter().enumerate().fold(0, |a, (i, x)| a | (x as u64) << i)
}

impl QubitTest {
    pub fn ideal() -> Self {
        Self { backend: QubitBackend::Ideal }
    }

    pub fn validate(&self) -> Result<()> {
        if let QubitBackend::ToyNtcf { kappa, mu } = self.backend {
            if !(2..=crate::functionalities::MAX_TOY_KAPPA).contains(&kappa) || !(mu > 0.0 && mu < 1.0) {
                return Err(ProtocolError::BadParameters(format!("toy backend needs 2 ≤ κ ≤ 12 and µ ∈ (0, 1), got {kappa}, {mu}")));
            }
        }
        Ok(())
    }

    /// Phase A: returns the flag and the client-side θ; the qubit sits in `q`.
    fn deliver(&self, s: &mut Session, adv: &dyn Adversary) -> Result<FlagValue> {
        match self.backend {
            QubitBackend::Ideal => {
                let family = plus_theta_family("theta", "q", &THETAS);
                rspv0(s, adv, &family, "theta", "q")
            }
            QubitBackend::ToyNtcf { kappa, mu } => {
                let (flag, theta) = toy_delivery(s, adv, kappa, mu)?;
                s.set_client("theta", Bits::from_uint(theta as u64, 3))?;
                Ok(flag)
            }
        }
    }
}

impl TwoModeProtocol for QubitTest {
    fn id(&self) -> String {
        "qubit_test".into()
    }
    fn features(&self) -> Vec<&'static str> {
        match self.backend {
            QubitBackend::Ideal => vec!["ideal", "qubit_test"],
            QubitBackend::ToyNtcf { .. } => vec!["toy_ntcf", "qubit_test"],
        }
    }
    fn scored(&self) -> bool {
        true
    }
    fn execute_mode(&self, mode: Mode, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult> {
        self.validate()?;
        let flag = self.deliver(s, adv)?;
        let desc = s.reg("theta");
        let q = s.reg("q");
        s.mark_divergence();
        if !flag.is_pass() {
            if s.world.contains(&q) {
                discard_outputs(s, std::slice::from_ref(&q))?;
            }
            return Ok(StepResult { flag, score: Some(ScoreValue::Bottom), descriptions: vec![desc], outputs: Vec::new() });
        }
        let theta = s.client(&desc).map(|b| b.to_uint() as u8).unwrap_or(1);
        match mode {
            Mode::Comp => Ok(StepResult { flag, score: Some(ScoreValue::Bottom), descriptions: vec![desc], outputs: vec![q] }),
            Mode::Test => {
                let c = 2 * s.client_uniform(2) as u8;
                s.set_client("c", Bits::from_uint(c as u64, 2))?;
                s.send(Message::new("challenge").number(c as u64));
                let ctx = s.ctx("rotated-answer");
                let r = adv.rotated_answer(&ctx, &mut s.view(), &q, c)?;
                s.reply(Message::new("answer").number(r as u64));
                s.set_client("r", Bits::from_bools(vec![r]))?;
                discard_outputs(s, std::slice::from_ref(&q))?;
                Ok(StepResult {
                    flag,
                    score: Some(ScoreValue::from_win(r == u_bit(c, theta))),
                    descriptions: Vec::new(),
                    outputs: Vec::new(),
                })
            }
        }
    }
}

fn empty() -> CqEnsemble {
    CqEnsemble::pure(RegisterLayout::new(), SparseState::zero(0)).expect("empty ensemble")
}

/// One scored test round under `adv`, sampled with `seed`.
pub fn qubit_test_round(backend: QubitBackend, adv: &dyn Adversary, seed: u64) -> Result<ProtocolOutcome> {
    let p = QubitTest { backend };
    run(&ModeOf { inner: &p, mode: Mode::Test }, adv, &empty(), seed)
}

/// The qubit test amplified by score into a two-mode protocol whose comp
/// mode outputs |+_θ⟩ with θ odd.
pub fn translation_pipeline(backend: QubitBackend, rounds: usize, delta0: f64, lambda: f64, eps: f64, eps0: f64) -> Result<ScoredAmplifier<QubitTest>> {
    let params = AmplifierParams::scaled_scored(rounds, delta0, lambda, eps, eps0, optimal_value())?;
    ScoredAmplifier::new(QubitTest { backend }, params)
}
