//! Eight-phase state preparation from key pairs: the honest server wins the
//! scored test with probability 1/2 + cos²(π/8)/2, and the comp mode leaves
//! |+_θ⟩ with θ known to the client.

use rspv_lab::chain::{honest_win_probability, Kp, KpBackend, QFac};
use rspv_lab::protocol::{run, HonestAdversary, Mode, ModeOf, ScoreValue};
use rspv_lab::qsim::{CqEnsemble, RegisterLayout, SparseState};
use rspv_lab::stats::estimate_probability;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let empty = CqEnsemble::pure(RegisterLayout::new(), SparseState::zero(0))?;
    let q = QFac::new(Kp { n: 4, eps: 0.1, kappa: 1, backend: KpBackend::Ideal })?;
    let test = ModeOf { inner: &q, mode: Mode::Test };
    let report = estimate_probability(
        "phase_states",
        |seed| {
            let out = run(&test, &HonestAdversary, &empty, seed).map_err(|e| e.to_string())?;
            Ok(out.score == Some(ScoreValue::Win))
        },
        5000,
        1,
        None,
    )?;
    println!("win rate {:.4} in [{:.4}, {:.4}], exact {:.6}", report.estimate, report.interval[0], report.interval[1], honest_win_probability());
    let out = run(&ModeOf { inner: &q, mode: Mode::Comp }, &HonestAdversary, &empty, 7)?;
    println!("comp mode: θ = {}", out.description("theta").unwrap().to_uint());
    Ok(())
}
