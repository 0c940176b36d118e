use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rspv_lab::cli::{self, CliError, ExperimentConfig, Overrides, Status, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "rspv-lab", version, about = "Monte Carlo lab for verifiable remote state preparation")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config and write a JSON report.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Report path; defaults to the config's output, then $RSPV_OUT_DIR/<name>.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = OUT_DIR_ENV, hide_env_values = true)]
        out_dir: Option<PathBuf>,
    },
    /// List runnable protocols and their parameters.
    ListProtocols,
    /// List adversary strategies and their parameters.
    ListAdversaries,
    /// Re-run a report's embedded config and compare the counts.
    Replay {
        report: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn execute(args: Args) -> Result<Status, CliError> {
    match args.command {
        Command::Run { config, seed, trials, workers, out, out_dir } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            Overrides { seed, trials, workers }.apply(&mut cfg);
            let report = cli::run_experiment(&cfg)?;
            let path = cli::output_path(&cfg, out.as_deref(), out_dir.as_deref());
            cli::write_report(&report, &path)?;
            println!("{}", cli::summary(&report, &cfg));
            println!("report written to {}", path.display());
            Ok(cli::run_status(&report, &cfg))
        }
        Command::ListProtocols => {
            print!("{}", cli::list_protocols());
            Ok(Status::Ok)
        }
        Command::ListAdversaries => {
            print!("{}", cli::list_adversaries());
            Ok(Status::Ok)
        }
        Command::Replay { report, workers } => {
            let original = cli::read_report(&report)?;
            let r = cli::replay(&original, workers)?;
            if let Some(w) = &r.version_warning {
                eprintln!("warning: {w}");
            }
            let (a, b) = (&r.original, &r.rerun);
            println!("stored:   {}/{} = {}", a.successes, a.trials, a.estimate);
            println!("replayed: {}/{} = {}", b.successes, b.trials, b.estimate);
            println!("{}", if r.matches() { "replay matches" } else { "REPLAY MISMATCH" });
            Ok(r.status())
        }
    }
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
