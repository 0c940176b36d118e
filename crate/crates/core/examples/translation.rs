//! Scored amplification of the qubit test: the honest server passes the
//! win-count threshold while a server with a 0.1 win-rate deficit fails.

use rspv_lab::adversaries::{make_adversary, Params};
use rspv_lab::protocol::{run, Adversary, Mode, ModeOf};
use rspv_lab::qsim::{CqEnsemble, RegisterLayout, SparseState};
use rspv_lab::qubit_test::{translation_pipeline, QubitBackend};
use rspv_lab::stats::estimate_probability;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let empty = CqEnsemble::pure(RegisterLayout::new(), SparseState::zero(0))?;
    let amp = translation_pipeline(QubitBackend::Ideal, 400, 0.75, 0.0, 0.9, 0.1)?;
    println!("L = {}, threshold {:.1} wins", amp.params.rounds, amp.params.threshold);
    let test = ModeOf { inner: &amp, mode: Mode::Test };
    let deficit = Params::from([("r".to_string(), "0".to_string()), ("p".to_string(), "0.282843".to_string())]);
    for (name, params) in [("honest", Params::new()), ("partial-constant", deficit)] {
        let adv = make_adversary(name, &params)?;
        let report = estimate_probability(
            name,
            |seed| run(&test, &adv as &dyn Adversary, &empty, seed).map(|o| o.flag.is_pass()).map_err(|e| e.to_string()),
            200,
            3,
            None,
        )?;
        println!("{name:16} pass rate {:.3}", report.estimate);
    }
    Ok(())
}
