//! Multi-block key preparation with its parity check, against the honest
//! server and two cheating strategies.

use rspv_lab::adversaries::{make_adversary, Params};
use rspv_lab::amplification::Profile;
use rspv_lab::chain::MultiBlock;
use rspv_lab::protocol::{run, run_exact, Mode, ModeOf, RunOptions};
use rspv_lab::qsim::{CqEnsemble, RegisterLayout, SparseState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let empty = CqEnsemble::pure(RegisterLayout::new(), SparseState::zero(0))?;
    let mb = MultiBlock { m: 4, n: 2, eps: 0.5, kappa: 8, profile: Profile::Scaled };
    let test = ModeOf { inner: &mb, mode: Mode::Test };
    for name in ["honest", "parity-liar", "lazy-parity"] {
        let adv = make_adversary(name, &Params::new())?;
        let ex = run_exact(&test, &adv, &empty, 3, &RunOptions::default())?;
        println!("{name:12} exact test-mode pass probability {:.3}", ex.pass_probability() + 0.0);
    }
    let out = run(&ModeOf { inner: &mb, mode: Mode::Comp }, &make_adversary("honest", &Params::new())?, &empty, 3)?;
    println!("comp mode keys: {:?}", out.client_descriptions);
    Ok(())
}
