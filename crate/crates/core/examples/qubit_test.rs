//! The test of a qubit: exact game values, a search for blind strategies
//! beating cos²(π/8), and sampled honest rounds.

use rspv_lab::protocol::{HonestAdversary, ScoreValue};
use rspv_lab::qubit_test::{cap_search, game_value, optimal_value, qubit_test_round, rotated_instance, QubitBackend, QubitGameInstance};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("cos²(π/8) = {:.9}", optimal_value());
    println!("optimal strategy value {:.9}", game_value(&QubitGameInstance::optimal())?);
    for alpha in [0.1, 0.3, 0.6] {
        println!("rotated observables (α = {alpha}): {:.6}", game_value(&rotated_instance(alpha))?);
    }
    let search = cap_search(50, 3, 200, 5)?;
    println!("best of 50 blind instances in dimension 3: {:.9}", search.max_value);
    let wins = (0..2000)
        .filter(|&s| qubit_test_round(QubitBackend::Ideal, &HonestAdversary, s).map(|o| o.score == Some(ScoreValue::Win)).unwrap_or(false))
        .count();
    println!("honest rounds won: {wins}/2000");
    Ok(())
}
