use serde::{Deserialize, Serialize};

use crate::protocol::{ProtocolError, Result};

/// Where repetition counts come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Counts computed from the formulas.
    #[default]
    Paper,
    /// User-supplied counts; structural constraints still enforced.
    Scaled,
}

/// Which amplifier a parameter set is for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplifierKind {
    /// Repeat and pick one round.
    RepeatPick,
    /// Cut-and-choose over test and comp rounds.
    PreRspv,
    /// Scored test rounds with a win threshold.
    Scored,
}

/// Parameters of one amplifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplifierParams {
    pub kind: AmplifierKind,
    pub eps: f64,
    pub eps0: f64,
    pub delta0: f64,
    pub lambda: f64,
    pub delta: f64,
    /// Number of rounds L.
    pub rounds: usize,
    /// Probability of a test round.
    pub p: f64,
    /// Optimal winning probability of the scored sub-protocol.
    pub opt: f64,
    /// Minimum number of wins.
    pub threshold: f64,
    pub profile: Profile,
}

/// L = 216/(ε−ε0)³ before rounding up.
pub fn repeat_pick_length(eps: f64, eps0: f64) -> f64 {
    216.0 / (eps - eps0).powi(3)
}

/// L = 512/(δ(ε−ε0)³) before rounding up.
pub fn prersvp_length(delta: f64, eps: f64, eps0: f64) -> f64 {
    512.0 / (delta * (eps - eps0).powi(3))
}

/// p = (ε−ε0)/8.
pub fn test_probability(eps: f64, eps0: f64) -> f64 {
    (eps - eps0) / 8.0
}

/// The gap (1/6)δ0(ε−ε0) − λ.
pub fn scored_gap(delta0: f64, eps: f64, eps0: f64, lambda: f64) -> f64 {
    delta0 * (eps - eps0) / 6.0 - lambda
}

/// L = 4κ/(gap²(ε−ε0)) before rounding up.
pub fn scored_length(kappa: usize, delta0: f64, eps: f64, eps0: f64, lambda: f64) -> f64 {
    let g = scored_gap(delta0, eps, eps0, lambda);
    4.0 * kappa as f64 / (g * g * (eps - eps0))
}

/// threshold = (OPT − gap/2)·L.
pub fn scored_threshold(opt: f64, delta0: f64, eps: f64, eps0: f64, lambda: f64, rounds: usize) -> f64 {
    (opt - 0.5 * scored_gap(delta0, eps, eps0, lambda)) * rounds as f64
}

/// Soundness parameter δ = gap/2 of the scored amplifier's output.
pub fn scored_delta(delta0: f64, eps: f64, eps0: f64, lambda: f64) -> f64 {
    0.5 * scored_gap(delta0, eps, eps0, lambda)
}

fn rounds_of(x: f64) -> Result<usize> {
    if !x.is_finite() || x < 1.0 || x > 1e15 {
        return Err(ProtocolError::BadParameters(format!("round count {x} out of range")));
    }
    // a length that is an integer in exact arithmetic can land a few ulps above it
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * x {
        return Ok(nearest as usize);
    }
    Ok(x.ceil() as usize)
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(ProtocolError::BadParameters(format!("{name} = {v} must lie in (0, 1)")));
    }
    Ok(())
}

impl AmplifierParams {
    fn base(kind: AmplifierKind, eps: f64, eps0: f64, profile: Profile) -> Self {
        Self {
            kind,
            eps,
            eps0,
            delta0: 0.0,
            lambda: 0.0,
            delta: 0.0,
            rounds: 1,
            p: 0.0,
            opt: 0.0,
            threshold: 0.0,
            profile,
        }
    }

    /// Repeat-and-pick with L from the formula.
    pub fn paper_repeat_pick(eps: f64, eps0: f64) -> Result<Self> {
        let mut a = Self::base(AmplifierKind::RepeatPick, eps, eps0, Profile::Paper);
        a.check_eps()?;
        a.rounds = rounds_of(repeat_pick_length(eps, eps0))?;
        Ok(a)
    }

    pub fn scaled_repeat_pick(eps: f64, eps0: f64, rounds: usize) -> Result<Self> {
        let mut a = Self::base(AmplifierKind::RepeatPick, eps, eps0, Profile::Scaled);
        a.rounds = rounds;
        a.validate()?;
        Ok(a)
    }

    /// Cut-and-choose with L and p from the formulas.
    pub fn paper_prersvp(delta: f64, eps: f64, eps0: f64) -> Result<Self> {
        let mut a = Self::base(AmplifierKind::PreRspv, eps, eps0, Profile::Paper);
        a.delta = delta;
        a.check_eps()?;
        check_unit("delta", delta)?;
        a.rounds = rounds_of(prersvp_length(delta, eps, eps0))?;
        a.p = test_probability(eps, eps0);
        Ok(a)
    }

    pub fn scaled_prersvp(eps: f64, eps0: f64, rounds: usize, p: f64) -> Result<Self> {
        let mut a = Self::base(AmplifierKind::PreRspv, eps, eps0, Profile::Scaled);
        a.rounds = rounds;
        a.p = p;
        a.validate()?;
        Ok(a)
    }

    /// Scored amplifier with L and threshold from the formulas.
    pub fn paper_scored(kappa: usize, delta0: f64, lambda: f64, eps: f64, eps0: f64, opt: f64) -> Result<Self> {
        let mut a = Self::base(AmplifierKind::Scored, eps, eps0, Profile::Paper);
        a.delta0 = delta0;
        a.lambda = lambda;
        a.opt = opt;
        a.check_scored()?;
        a.rounds = rounds_of(scored_length(kappa, delta0, eps, eps0, lambda))?;
        a.threshold = scored_threshold(opt, delta0, eps, eps0, lambda, a.rounds);
        a.delta = scored_delta(delta0, eps, eps0, lambda);
        Ok(a)
    }

    /// Scored amplifier with a given L; the threshold still follows the formula.
    pub fn scaled_scored(rounds: usize, delta0: f64, lambda: f64, eps: f64, eps0: f64, opt: f64) -> Result<Self> {
        let mut a = Self::base(AmplifierKind::Scored, eps, eps0, Profile::Scaled);
        a.delta0 = delta0;
        a.lambda = lambda;
        a.opt = opt;
        a.rounds = rounds;
        a.threshold = scored_threshold(opt, delta0, eps, eps0, lambda, rounds);
        a.delta = scored_delta(delta0, eps, eps0, lambda);
        a.validate()?;
        Ok(a)
    }

    fn check_eps(&self) -> Result<()> {
        check_unit("eps", self.eps)?;
        if !(self.eps0 >= 0.0 && self.eps0 < 1.0) {
            return Err(ProtocolError::BadParameters(format!("eps0 = {} must lie in [0, 1)", self.eps0)));
        }
        if self.eps <= self.eps0 {
            return Err(ProtocolError::BadParameters(format!("eps = {} must exceed eps0 = {}", self.eps, self.eps0)));
        }
        Ok(())
    }

    fn check_scored(&self) -> Result<()> {
        self.check_eps()?;
        check_unit("delta0", self.delta0)?;
        if self.lambda < 0.0 {
            return Err(ProtocolError::BadParameters("lambda must be non-negative".into()));
        }
        if self.lambda >= self.delta0 * (self.eps - self.eps0) / 6.0 {
            return Err(ProtocolError::BadParameters(format!(
                "lambda = {} must be below delta0(eps - eps0)/6 = {}",
                self.lambda,
                self.delta0 * (self.eps - self.eps0) / 6.0
            )));
        }
        if !(self.opt > 0.0 && self.opt <= 1.0) {
            return Err(ProtocolError::BadParameters(format!("OPT = {} must lie in (0, 1]", self.opt)));
        }
        Ok(())
    }

    /// Checks the structural constraints of either profile.
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(ProtocolError::BadParameters("at least one round is needed".into()));
        }
        match self.kind {
            AmplifierKind::RepeatPick => self.check_eps(),
            AmplifierKind::PreRspv => {
                self.check_eps()?;
                if !(0.0..1.0).contains(&self.p) {
                    return Err(ProtocolError::BadParameters(format!("test probability {} must lie in [0, 1)", self.p)));
                }
                Ok(())
            }
            AmplifierKind::Scored => self.check_scored(),
        }
    }
}
