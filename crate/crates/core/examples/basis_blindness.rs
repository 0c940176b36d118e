//! Exact basis blindness of the phase-state construction: how far the
//! server's state given the hidden basis bits is from the overall average.

use rspv_lab::chain::basis_blindness;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for n in 1..=8 {
        let b = basis_blindness(n)?;
        println!(
            "n = {n}: max distance {:.3e}, pass probability {:.4}, Pr[θ1 = 0 | pass] = {:.4}",
            b.max_distance(),
            b.pass_probability,
            b.theta1_zero
        );
    }
    Ok(())
}
