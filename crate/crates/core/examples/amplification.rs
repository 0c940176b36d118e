//! The amplifiers: paper-profile lengths, and a cut-and-choose run over the
//! multi-block protocol with a hidden test fraction.

use rspv_lab::amplification::{AmplifierParams, Amplified, Profile};
use rspv_lab::chain::MultiBlock;
use rspv_lab::protocol::{run, HonestAdversary};
use rspv_lab::qsim::{CqEnsemble, RegisterLayout, SparseState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rp = AmplifierParams::paper_repeat_pick(0.5, 0.25)?;
    let cc = AmplifierParams::paper_prersvp(0.5, 0.5, 0.25)?;
    let sc = AmplifierParams::paper_scored(8, 0.6, 0.0, 0.5, 0.2, 0.85)?;
    println!("repeat-and-pick L = {}", rp.rounds);
    println!("cut-and-choose L = {}, p = {}", cc.rounds, cc.p);
    println!("scored L = {}, threshold = {:.1} wins", sc.rounds, sc.threshold);

    let empty = CqEnsemble::pure(RegisterLayout::new(), SparseState::zero(0))?;
    let mb = MultiBlock { m: 4, n: 2, eps: 0.5, kappa: 8, profile: Profile::Scaled };
    let amp = Amplified::new(mb, AmplifierParams::scaled_prersvp(0.5, 0.1, 4, 0.5)?)?;
    for seed in 0..4 {
        let out = run(&amp, &HonestAdversary, &empty, seed)?;
        println!("seed {seed}: modes {} (1 = test), picked round {}, flag {:?}", out.record("modes").unwrap(), out.record("pick").unwrap().to_uint(), out.flag);
    }
    Ok(())
}
