//! Running a checked-in experiment config programmatically, as the CLI does.

use rspv_lab::cli::{run_experiment, run_status, summary, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/multi_block_lazy_parity.toml");
    let mut cfg = ExperimentConfig::load(&path)?;
    cfg.experiment.trials = 2000;
    let report = run_experiment(&cfg)?;
    println!("{}", summary(&report, &cfg));
    println!("exit status would be {}", run_status(&report, &cfg).exit_code());
    println!("{}", serde_json::to_string_pretty(&report.parameters["adversary_name"])?);
    Ok(())
}
