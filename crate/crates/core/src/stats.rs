//! Seeded Monte Carlo harness, Hoeffding intervals and the Markov and
//! Chernoff tail bounds.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Two-sided confidence level of every reported interval.
pub const CONFIDENCE: f64 = 0.99;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("delta {delta} is outside the allowed range for the {side:?} tail")]
    BadDelta { delta: f64, side: Tail },
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("trial {trial} failed: {message}")]
    Trial { trial: u64, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Upper,
    Lower,
}

/// Seeded Bernoulli estimate with a distribution-free interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    pub trials: u64,
    pub successes: u64,
    pub estimate: f64,
    /// [lower, upper], clipped to [0, 1].
    pub interval: [f64; 2],
    pub confidence: f64,
    pub interval_method: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    /// Excluded from [`ExperimentReport::same_result`].
    pub wall_time_s: f64,
}

impl ExperimentReport {
    /// Builds a report from counts; the interval is estimate ± √(ln(2/0.01)/(2N)).
    pub fn from_counts(experiment: &str, seed: u64, trials: u64, successes: u64) -> Result<Self, StatsError> {
        if trials == 0 {
            return Err(StatsError::BadInput("at least one trial is needed".into()));
        }
        if successes > trials {
            return Err(StatsError::BadInput(format!("{successes} successes out of {trials} trials")));
        }
        let estimate = successes as f64 / trials as f64;
        let h = hoeffding_half_width(trials, CONFIDENCE);
        Ok(Self {
            experiment: experiment.into(),
            seed,
            trials,
            successes,
            estimate,
            interval: [(estimate - h).max(0.0), (estimate + h).min(1.0)],
            confidence: CONFIDENCE,
            interval_method: "hoeffding".into(),
            parameters: BTreeMap::new(),
            wall_time_s: 0.0,
        })
    }

    pub fn with_parameter(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.parameters.insert(key.into(), value.into());
        self
    }

    pub fn contains(&self, p: f64) -> bool {
        self.interval[0] <= p && p <= self.interval[1]
    }

    /// Equality of everything except the wall time.
    pub fn same_result(&self, other: &Self) -> bool {
        let mut a = self.clone();
        a.wall_time_s = other.wall_time_s;
        &a == other
    }
}

/// Half-width √(ln(2/(1−c))/(2N)) of the two-sided Hoeffding interval.
pub fn hoeffding_half_width(trials: u64, confidence: f64) -> f64 {
    ((2.0 / (1.0 - confidence)).ln() / (2.0 * trials as f64)).sqrt()
}

/// Seed of trial `index` within an experiment seeded by `seed`: the first
/// word of ChaCha8 stream `index`.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// Runs `runner` on N derived trial seeds (in parallel on `workers`
/// threads, or rayon's default pool) and reports the success rate. The
/// result does not depend on the worker count.
pub fn estimate_probability<F>(
    experiment: &str,
    runner: F,
    trials: u64,
    seed: u64,
    workers: Option<usize>,
) -> Result<ExperimentReport, StatsError>
where
    F: Fn(u64) -> Result<bool, String> + Sync,
{
    if trials == 0 {
        return Err(StatsError::BadInput("at least one trial is needed".into()));
    }
    let start = Instant::now();
    let count = || {
        (0..trials)
            .into_par_iter()
            .map(|i| runner(trial_seed(seed, i)).map(|ok| ok as u64).map_err(|message| StatsError::Trial { trial: i, message }))
            .try_reduce(|| 0, |a, b| Ok(a + b))
    };
    let successes = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| StatsError::BadInput(e.to_string()))?
            .install(count)?,
        None => count()?,
    };
    let mut report = ExperimentReport::from_counts(experiment, seed, trials, successes)?;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Upper tail: Pr[Σ ≥ (1+δ)pK] ≤ e^{−δ²pK/(2+δ)} for δ > 0.
/// Lower tail: Pr[Σ ≤ (1−δ)pK] ≤ e^{−δ²pK/2} for δ ∈ (0, 1).
pub fn chernoff_bound(p: f64, k: u64, delta: f64, side: Tail) -> Result<f64, StatsError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(StatsError::BadInput(format!("p = {p} is not a probability")));
    }
    let mu = p * k as f64;
    match side {
        Tail::Upper if delta > 0.0 && delta.is_finite() => Ok((-delta * delta * mu / (2.0 + delta)).exp()),
        Tail::Lower if delta > 0.0 && delta < 1.0 => Ok((-delta * delta * mu / 2.0).exp()),
        _ => Err(StatsError::BadDelta { delta, side }),
    }
}

/// Pr[X ≥ a] ≤ min(1, E[X]/a) for X ≥ 0.
pub fn markov_bound(mean: f64, a: f64) -> Result<f64, StatsError> {
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(StatsError::BadInput(format!("mean {mean} must be non-negative")));
    }
    if !(a > 0.0) {
        return Err(StatsError::BadInput(format!("threshold {a} must be positive")));
    }
    Ok((mean / a).min(1.0))
}
