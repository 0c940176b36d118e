//! The ideal BB84 state-preparation functionality and its exact output
//! ensemble: four descriptions, each with weight 1/4 and its own state.

use rspv_lab::functionalities::IdealBb84;
use rspv_lab::protocol::{run_exact, HonestAdversary, RunOptions};
use rspv_lab::qsim::{CqEnsemble, RegisterLayout, SparseState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let empty = CqEnsemble::pure(RegisterLayout::new(), SparseState::zero(0))?;
    let opts = RunOptions { enumerate_client: true, ..RunOptions::default() };
    let ex = run_exact(&IdealBb84, &HonestAdversary, &empty, 0, &opts)?;
    println!("pass probability {:.3}", ex.pass_probability());
    for (w, o) in &ex.paths {
        let d = o.client_descriptions.values().next().map(|b| b.to_string()).unwrap_or_default();
        let rho = o.final_state.density_of(&[o.outputs[0].as_str()], None)?;
        println!("description {d} with weight {w:.3}: ρ = {:.3}", rho.to_dense());
    }
    Ok(())
}
