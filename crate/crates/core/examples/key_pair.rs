//! Key-pair preparation: the server ends with (|0⟩|x0⟩ + |1⟩|x1⟩)/√2 for a
//! uniformly random pair of n-bit keys known only to the client.

use rspv_lab::amplification::AmplifierParams;
use rspv_lab::chain::{kp_state, KeyPair, Kp, KpBackend};
use rspv_lab::protocol::{run, HonestAdversary};
use rspv_lab::qsim::{CqEnsemble, RegisterLayout, SparseState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let empty = CqEnsemble::pure(RegisterLayout::new(), SparseState::zero(0))?;
    let amp = AmplifierParams::scaled_prersvp(0.5, 0.1, 1, 0.0)?;
    let backends = [
        ("ideal", KpBackend::Ideal),
        ("block chain", KpBackend::Chain { m0: 4, block_kappa: 8, amp }),
    ];
    for (name, backend) in backends {
        let kp = Kp { n: 2, eps: 0.5, kappa: 1, backend };
        for seed in 0..3 {
            let out = run(&kp, &HonestAdversary, &empty, seed)?;
            let keys = KeyPair::new(out.description("x0").unwrap().clone(), out.description("x1").unwrap().clone());
            let rho = out.final_state.density_of(&["subs", "key"], None)?;
            let f = rho.expectation_pure(&kp_state(&keys))? / rho.trace();
            println!("{name:12} seed {seed}: x0 = {}, x1 = {}, fidelity {f:.12}", keys.x0, keys.x1);
        }
    }
    Ok(())
}
