//! The information-theoretic core of the parity check: exact trace distance
//! between real and simulated post-test states for a family of guessing
//! adversaries, against the 4n/√m and 2n/√m bounds.

use rspv_lab::chain::{itcore_distance, ItAdversary, ItCoreSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (n, m) in [(1, 4), (2, 8), (3, 16)] {
        for adversary in ItAdversary::family(m).into_iter().take(5) {
            let r = itcore_distance(&ItCoreSettings { m, n, adversary, seed: 1 })?;
            let step = r.step_deviations.iter().cloned().fold(0.0, f64::max);
            println!(
                "n={n} m={m:2} {adversary:?}: distance {:.4} ≤ {:.4}, max step {step:.4} ≤ {:.4}, pass {:.3}",
                r.distance, r.bound, r.step_bound, r.pass_probability
            );
        }
    }
    Ok(())
}
