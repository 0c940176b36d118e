//! Experiment configs, the protocol registry, report output and replay.
//! The binary is a thin clap wrapper over this module.

mod registry;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversaries::{make_adversary_for, registry as strategies, AdversaryError, Params, StrategyDescriptor};
use crate::hamiltonian::HamiltonianError;
use crate::protocol::{run, FlagValue, ProtocolError, ScoreValue};
use crate::qsim::{CqEnsemble, RegisterLayout, SparseState};
use crate::stats::{estimate_probability, ExperimentReport, StatsError};

pub use registry::{build_protocol, protocols, BuiltProtocol, ParamTable, ProtocolDescriptor};

/// Environment variable naming the default report directory.
pub const OUT_DIR_ENV: &str = "RSPV_OUT_DIR";

/// Version stamped into every report.
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error("unknown protocol {0:?}")]
    UnknownProtocol(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("report parse error: {0}")]
    ReportParse(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Which outcome of a run counts as a success.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Flag is pass.
    #[default]
    Pass,
    /// Flag is fail.
    Fail,
    /// Score is win.
    Win,
    /// Score is lose.
    Lose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub protocol: String,
    #[serde(default)]
    pub metric: Metric,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySection {
    pub name: String,
    #[serde(default)]
    pub params: ParamTable,
}

impl Default for AdversarySection {
    fn default() -> Self {
        Self { name: "honest".into(), params: ParamTable::new() }
    }
}

/// Bounds the estimate must respect; a violation exits with status 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl Expect {
    pub fn holds(&self, estimate: f64) -> bool {
        self.min.is_none_or(|m| estimate >= m) && self.max.is_none_or(|m| estimate <= m)
    }
}

/// One experiment: a protocol, an adversary, a metric and a trial budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub adversary: AdversarySection,
    #[serde(default)]
    pub expect: Expect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    #[serde(default)]
    pub params: ParamTable,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::ConfigParse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
        Self::parse(&text)
    }
}

/// Command-line overrides of the config.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub workers: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.experiment.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.experiment.trials = t;
        }
        if let Some(w) = self.workers {
            cfg.experiment.workers = Some(w);
        }
    }
}

/// Outcome of `run` or `replay`, mapped to the exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// The estimate broke an expected bound, or a replay disagreed.
    Violation,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Violation => 2,
        }
    }
}

fn empty() -> CqEnsemble {
    CqEnsemble::pure(RegisterLayout::new(), SparseState::zero(0)).expect("empty ensemble")
}

fn adversary_params(table: &ParamTable) -> Params {
    table
        .iter()
        .map(|(k, v)| {
            let s = match v {
                toml::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            (k.clone(), s)
        })
        .collect()
}

/// Runs the experiment and builds its report. Parallelism never changes the result.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let built = build_protocol(&cfg.experiment.protocol, &cfg.protocol.params)?;
    let protocol = built.protocol.as_ref();
    let adv = make_adversary_for(&cfg.adversary.name, &adversary_params(&cfg.adversary.params), protocol)?;
    let metric = cfg.experiment.metric;
    if matches!(metric, Metric::Win | Metric::Lose) && !protocol.scored() {
        return Err(CliError::BadParameter(format!("{} is not scored; use metric pass or fail", protocol.id())));
    }
    let initial = empty();
    let runner = |seed: u64| {
        let out = run(protocol, &adv, &initial, seed).map_err(|e| e.to_string())?;
        Ok(match metric {
            Metric::Pass => out.flag == FlagValue::Pass,
            Metric::Fail => out.flag == FlagValue::Fail,
            Metric::Win => out.score == Some(ScoreValue::Win),
            Metric::Lose => out.score == Some(ScoreValue::Lose),
        })
    };
    let e = &cfg.experiment;
    let mut report = estimate_probability(&e.name, runner, e.trials, e.seed, e.workers)?;
    let config = serde_json::to_value(cfg).map_err(|err| CliError::ConfigParse(err.to_string()))?;
    let holds = cfg.expect.holds(report.estimate);
    report = report
        .with_parameter("config", config)
        .with_parameter("protocol", protocol.id())
        .with_parameter("adversary", serde_json::to_value(adv.params()).unwrap_or_default())
        .with_parameter("adversary_name", cfg.adversary.name.clone())
        .with_parameter("metric", serde_json::to_value(metric).unwrap_or_default())
        .with_parameter("code_version", CODE_VERSION)
        .with_parameter("expect_holds", holds);
    for (k, v) in built.notes {
        report = report.with_parameter(&k, v);
    }
    Ok(report)
}

/// Report location: `--out`, then the config's output, then
/// `$RSPV_OUT_DIR/<name>.json`, then `./<name>.json`.
pub fn output_path(cfg: &ExperimentConfig, out: Option<&Path>, env_dir: Option<&Path>) -> PathBuf {
    if let Some(p) = out {
        return p.into();
    }
    if let Some(p) = &cfg.experiment.output {
        return p.into();
    }
    let file = format!("{}.json", cfg.experiment.name);
    match env_dir {
        Some(d) => d.join(file),
        None => PathBuf::from(file),
    }
}

pub fn write_report(report: &ExperimentReport, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.into(), source })?;
    }
    let text = serde_json::to_string_pretty(report).map_err(|e| CliError::ReportParse(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|source| CliError::Io { path: path.into(), source })
}

pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|e| CliError::ReportParse(e.to_string()))
}

/// One-line summary of a report.
pub fn summary(report: &ExperimentReport, cfg: &ExperimentConfig) -> String {
    let verdict = if cfg.expect.holds(report.estimate) { "ok" } else { "VIOLATION" };
    let bounds = match (cfg.expect.min, cfg.expect.max) {
        (None, None) => String::new(),
        (lo, hi) => format!(
            " expected [{}, {}]",
            lo.map_or("-".into(), |v| v.to_string()),
            hi.map_or("-".into(), |v| v.to_string())
        ),
    };
    format!(
        "{}: {}/{} = {:.4} ({}% CI [{:.4}, {:.4}]){} {}",
        report.experiment,
        report.successes,
        report.trials,
        report.estimate,
        report.confidence * 100.0,
        report.interval[0],
        report.interval[1],
        bounds,
        verdict
    )
}

/// Status of a finished run.
pub fn run_status(report: &ExperimentReport, cfg: &ExperimentConfig) -> Status {
    if cfg.expect.holds(report.estimate) {
        Status::Ok
    } else {
        Status::Violation
    }
}

/// Result of re-running a stored report.
#[derive(Clone, Debug, PartialEq)]
pub struct Replay {
    pub original: ExperimentReport,
    pub rerun: ExperimentReport,
    /// Set when the report came from another code version.
    pub version_warning: Option<String>,
}

impl Replay {
    /// Counts, estimate and interval agree. Parameters and wall time may differ.
    pub fn matches(&self) -> bool {
        let (a, b) = (&self.original, &self.rerun);
        a.seed == b.seed && a.trials == b.trials && a.successes == b.successes && a.estimate == b.estimate && a.interval == b.interval
    }

    pub fn status(&self) -> Status {
        if self.matches() {
            Status::Ok
        } else {
            Status::Violation
        }
    }
}

/// The config embedded in a report.
pub fn embedded_config(report: &ExperimentReport) -> Result<ExperimentConfig> {
    let value = report.parameters.get("config").ok_or_else(|| CliError::ReportParse("report has no embedded config".into()))?;
    serde_json::from_value(value.clone()).map_err(|e| CliError::ReportParse(format!("embedded config: {e}")))
}

/// Re-runs the embedded config with the report's seed and trial count.
pub fn replay(report: &ExperimentReport, workers: Option<usize>) -> Result<Replay> {
    let mut cfg = embedded_config(report)?;
    cfg.experiment.seed = report.seed;
    cfg.experiment.trials = report.trials;
    cfg.experiment.workers = workers;
    let rerun = run_experiment(&cfg)?;
    let version_warning = match report.parameters.get("code_version").and_then(|v| v.as_str()) {
        Some(v) if v == CODE_VERSION => None,
        Some(v) => Some(format!("report was produced by version {v}, replaying with {CODE_VERSION}")),
        None => Some(format!("report carries no code version, replaying with {CODE_VERSION}")),
    };
    Ok(Replay { original: report.clone(), rerun, version_warning })
}

fn format_params(out: &mut String, params: &[(&str, &str, &str)]) {
    for (name, meaning, default) in params {
        out.push_str(&format!("    {name} = {default}    {meaning}\n"));
    }
}

/// Listing of protocol entries, sorted by id.
pub fn format_protocols(entries: &[ProtocolDescriptor]) -> String {
    let mut sorted: Vec<_> = entries.iter().collect();
    sorted.sort_by_key(|d| d.id);
    let mut out = String::new();
    for d in sorted {
        out.push_str(&format!("{}: {}\n", d.id, d.summary));
        format_params(&mut out, d.params);
    }
    out
}

/// Listing of adversary strategies, sorted by name.
pub fn format_adversaries(entries: &[StrategyDescriptor]) -> String {
    let mut sorted: Vec<_> = entries.iter().collect();
    sorted.sort_by_key(|d| d.name);
    let mut out = String::new();
    for d in sorted {
        let scope = if d.features.is_empty() { "any protocol".to_string() } else { d.features.join(", ") };
        out.push_str(&format!("{}: {} [{}]\n", d.name, d.summary, scope));
        format_params(&mut out, d.params);
    }
    out
}

pub fn list_protocols() -> String {
    format_protocols(protocols())
}

pub fn list_adversaries() -> String {
    format_adversaries(strategies())
}

#[cfg(test)]
mod tests;
