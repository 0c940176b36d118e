//! One block of the key-pair chain: BB84 rounds are filtered into a key pair
//! (x0, x1) differing in one position with even-parity x0, and the server is
//! left holding (|x0⟩ + |x1⟩)/√2.

use rspv_lab::chain::{superposition, OneBlock, OneBlockTensor};
use rspv_lab::protocol::{run, HonestAdversary};
use rspv_lab::qsim::{CqEnsemble, RegisterLayout, SparseState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let empty = CqEnsemble::pure(RegisterLayout::new(), SparseState::zero(0))?;
    let p = OneBlock { m: 6, eps: 0.1, kappa: 4 };
    println!("{} BB84 rounds per block", p.rounds());
    for seed in 0..4 {
        let out = run(&p, &HonestAdversary, &empty, seed)?;
        let (x0, x1) = (out.description("x0").unwrap(), out.description("x1").unwrap());
        let rho = out.final_state.density_of(&["q"], None)?;
        let fidelity = rho.expectation_pure(&superposition(x0, x1))? / rho.trace();
        println!("seed {seed}: flag {:?}, x0 = {x0}, x1 = {x1}, fidelity {fidelity:.12}", out.flag);
    }
    let t = run(&OneBlockTensor { m: 4, n: 3, eps: 0.1, kappa: 4 }, &HonestAdversary, &empty, 9)?;
    println!("three blocks: {:?}", t.client_descriptions);
    Ok(())
}
