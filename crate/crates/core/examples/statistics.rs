//! Seeded, parallel Monte Carlo estimation with Hoeffding intervals, and the
//! tail bounds used in the analysis.

use rspv_lab::stats::{chernoff_bound, estimate_probability, hoeffding_half_width, Tail};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let coin = |seed: u64| Ok(seed % 10 < 3);
    let one = estimate_probability("coin", coin, 20_000, 42, Some(1))?;
    let many = estimate_probability("coin", coin, 20_000, 42, Some(8))?;
    println!("estimate {:.4} in [{:.4}, {:.4}] ({})", one.estimate, one.interval[0], one.interval[1], one.interval_method);
    println!("same counts on 1 and 8 workers: {}", one.successes == many.successes);
    println!("Hoeffding half-width at N = 20000: {:.4}", hoeffding_half_width(20_000, 0.99));
    println!("Chernoff Pr[Σ ≥ 1.2·pK] at p = 0.3, K = 1000: {:.3e}", chernoff_bound(0.3, 1000, 0.2, Tail::Upper)?);
    Ok(())
}
