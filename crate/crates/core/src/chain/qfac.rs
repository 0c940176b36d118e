//! Phase-state protocol with score: turns the key-pair state into |+_θ⟩ and
//! tests it with a rotated-basis measurement.

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::protocol::{
    Adversary, FlagValue, Message, Mode, ProtocolError, Result, ScoreValue, Session, StepResult, TwoModeProtocol,
};
use crate::qsim::{gates, Bits, DensityView, C64};

use super::kp::{kp_in, Kp};
use super::{KeyPair, ThetaRecord};

/// Circular distance between two angles in units of π/4, in 0..=4.
pub fn circular_distance(a: u8, b: u8) -> u8 {
    let d = (a as i16 - b as i16).rem_euclid(8) as u8;
    d.min(8 - d)
}

/// Test-step flag: when φ = θ the answer must be 0, when φ = θ+4 it must be 1.
pub fn flag_rule(theta: u8, phi: u8, r: bool) -> FlagValue {
    match (theta as i16 - phi as i16).rem_euclid(8) {
        0 => FlagValue::from_pass(!r),
        4 => FlagValue::from_pass(r),
        _ => FlagValue::Pass,
    }
}

/// Test-step score: near angles win on 0, far angles win on 1, orthogonal
/// angles always win.
pub fn score_rule(theta: u8, phi: u8, r: bool) -> ScoreValue {
    match circular_distance(theta, phi) {
        0 | 1 => ScoreValue::from_win(!r),
        2 => ScoreValue::Win,
        _ => ScoreValue::from_win(r),
    }
}

/// Honest win probability 1/2 + cos²(π/8)/2.
pub fn honest_win_probability() -> f64 {
    0.5 + 0.5 * (std::f64::consts::PI / 8.0).cos().powi(2)
}

/// Relative phase of the honest output after the key register is measured
/// with outcome d: 4(d·(x0⊕x1)) + 2(x1[0]−x0[0]) + (x1[1]−x0[1]) mod 8,
/// the last term only when the keys have two or more bits.
pub fn theta_of(keys: &KeyPair, d: &Bits) -> u8 {
    let z = keys.difference();
    let mut t = 4 * z.dot(d) as i16;
    t += 2 * (keys.x1.get(0) as i16 - keys.x0.get(0) as i16);
    if keys.width() > 1 {
        t += keys.x1.get(1) as i16 - keys.x0.get(1) as i16;
    }
    t.rem_euclid(8) as u8
}

/// The scored protocol over an inner key-pair protocol of width n.
#[derive(Clone, Debug, PartialEq)]
pub struct QFac {
    pub kp: Kp,
}

impl QFac {
    pub fn new(kp: Kp) -> Result<Self> {
        kp.validate()?;
        Ok(Self { kp })
    }

    pub fn n(&self) -> usize {
        self.kp.n
    }
}

impl TwoModeProtocol for QFac {
    fn id(&self) -> String {
        "qfac".into()
    }
    fn features(&self) -> Vec<&'static str> {
        let mut f = crate::protocol::Protocol::features(&self.kp);
        f.push("qfac");
        f
    }
    fn scored(&self) -> bool {
        true
    }
    fn execute_mode(&self, mode: Mode, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult> {
        let n = self.n();
        let kp = s.scoped("kp", |s| kp_in(s, adv, &self.kp))?;
        let mut flag = kp.flag;

        s.send(Message::new("phase"));
        let ctx = s.ctx("phase");
        let mut d = adv.qfac_phase_measure(&ctx, &mut s.view(), &kp.subs, &kp.key)?;
        s.reply(Message::new("phase").bits(&d));
        if d.len() != n {
            flag = FlagValue::Fail;
            d = Bits::zeros(n);
        }
        if d.is_zero() {
            flag = FlagValue::Fail;
        }
        let theta = theta_of(&kp.keys, &d);
        let theta_reg = s.set_client("theta", ThetaRecord::new(theta).to_bits())?;
        crate::amplification::discard_outputs(s, std::slice::from_ref(&kp.key))?;
        if !s.world.contains(&kp.subs) {
            s.world.alloc_zero(&kp.subs, 1, crate::protocol::Owner::Server)?;
        }
        let q = s.reg("q");
        s.world.rename(&kp.subs, &q)?;
        s.mark_divergence();

        match mode {
            Mode::Comp => Ok(StepResult {
                flag,
                score: Some(ScoreValue::Bottom),
                descriptions: vec![theta_reg],
                outputs: vec![q],
            }),
            Mode::Test => {
                let phi = s.client_uniform(8) as u8;
                s.set_client("phi", Bits::from_uint(phi as u64, 3))?;
                s.send(Message::new("rotate").number(phi as u64));
                let ctx = s.ctx("rotated-answer");
                let r = adv.rotated_answer(&ctx, &mut s.view(), &q, phi)?;
                s.reply(Message::new("answer").number(r as u64));
                s.set_client("r", Bits::from_bools(vec![r]))?;
                crate::amplification::discard_outputs(s, std::slice::from_ref(&q))?;
                Ok(StepResult {
                    flag: flag.and(flag_rule(theta, phi, r)),
                    score: Some(score_rule(theta, phi, r)),
                    descriptions: Vec::new(),
                    outputs: Vec::new(),
                })
            }
        }
    }
}

/// Distances of ½(ρ_t + ρ_{t+4}) from (1/8)Σ_θ ρ_θ for t = 0..4, where ρ_θ is
/// the honest server-side state (d, output qubit) on the passing branch with
/// phase θ, sub-normalized by its probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisBlindness {
    pub n: usize,
    pub distances: [f64; 4],
    /// Pr[θ1 = 0 | pass] for the most significant phase bit.
    pub theta1_zero: f64,
    /// Probability of the passing branch (d ≠ 0).
    pub pass_probability: f64,
}

impl BasisBlindness {
    pub fn max_distance(&self) -> f64 {
        self.distances.iter().cloned().fold(0.0, f64::max)
    }
}

fn plus_density(theta: u8) -> Matrix2<C64> {
    let a = gates::plus_theta(theta as i64);
    Matrix2::new(a[0] * a[0].conj(), a[0] * a[1].conj(), a[1] * a[0].conj(), a[1] * a[1].conj())
}

fn trace_norm_2x2(m: &Matrix2<C64>) -> f64 {
    let dense = DMatrix::from_fn(2, 2, |i, j| m[(i, j)]);
    DensityView::from_matrix(dense).map(|v| v.eigenvalues().iter().map(|e| e.abs()).sum()).unwrap_or(f64::NAN)
}

/// Exact basis-blindness check for the honest flow at key width n ≤ 20.
///
/// Only x0[0..2], x1[0..2] and, when d has support past the first two
/// positions, one uniform parity bit matter for θ; the enumeration is over
/// those and over every d, so the result is exact.
pub fn basis_blindness(n: usize) -> Result<BasisBlindness> {
    if n == 0 || n > 20 {
        return Err(ProtocolError::BadParameters(format!("key width {n} outside 1..=20")));
    }
    let head = n.min(2);
    let nd = 1u64 << n;
    let mut rho = vec![[Matrix2::<C64>::zeros(); 8]; nd as usize];
    let mut theta1_zero = 0.0;
    let mut pass = 0.0;
    for d in 1..nd {
        let dbits = Bits::from_uint(d, n);
        let tail_support = (head..n).any(|j| dbits.get(j));
        let p_d = 1.0 / nd as f64;
        for heads in 0..(1u64 << (2 * head)) {
            let hb = Bits::from_uint(heads, 2 * head);
            let (x0h, x1h) = (hb.slice(0, head), hb.slice(head, 2 * head));
            let p_h = 1.0 / (1u64 << (2 * head)) as f64;
            let tails: Vec<(bool, f64)> = if tail_support { vec![(false, 0.5), (true, 0.5)] } else { vec![(false, 1.0)] };
            for (tp, p_t) in tails {
                let keys = KeyPair::new(x0h.clone(), x1h.clone());
                let dh = dbits.slice(0, head);
                let theta = (theta_of(&keys, &dh) + 4 * tp as u8) % 8;
                let w = p_d * p_h * p_t;
                rho[d as usize][theta as usize] += plus_density(theta) * C64::new(w, 0.0);
                pass += w;
                if theta < 4 {
                    theta1_zero += w;
                }
            }
        }
    }
    let mut distances = [0.0; 4];
    for (t, out) in distances.iter_mut().enumerate() {
        let mut total = 0.0;
        for blocks in rho.iter().skip(1) {
            let avg: Matrix2<C64> = blocks.iter().fold(Matrix2::zeros(), |a, b| a + b) * C64::new(1.0 / 8.0, 0.0);
            let pair = (blocks[t] + blocks[t + 4]) * C64::new(0.5, 0.0);
            total += trace_norm_2x2(&(pair - avg));
        }
        *out = 0.5 * total;
    }
    Ok(BasisBlindness { n, distances, theta1_zero: theta1_zero / pass, pass_probability: pass })
}
