//! Registry of concrete server strategies. Every strategy draws its
//! randomness from the session's outcome source, so a run is a
//! deterministic function of the seed.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::protocol::{honest, Adversary, HookCtx, Protocol, ProtocolError, Result, ServerView};
use crate::qsim::{gates, Basis, Bits, SparseState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error("strategy {strategy}: bad parameter {param}: {message}")]
    BadParameter { strategy: String, param: String, message: String },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Strategy parameters as strings, e.g. {"k": "4"}.
pub type Params = BTreeMap<String, String>;

/// A registry entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategyDescriptor {
    pub name: &'static str,
    pub summary: &'static str,
    /// The strategy applies when the protocol has any of these features;
    /// empty means every protocol.
    pub features: &'static [&'static str],
    /// (parameter, meaning, default).
    pub params: &'static [(&'static str, &'static str, &'static str)],
}

const REGISTRY: &[StrategyDescriptor] = &[
    StrategyDescriptor {
        name: "always-abort",
        summary: "sets the abort bit in every ideal functionality call",
        features: &[],
        params: &[],
    },
    StrategyDescriptor {
        name: "constant-answer",
        summary: "answers every rotated-basis challenge with r without measuring",
        features: &["qfac", "qubit_test"],
        params: &[("r", "the fixed answer bit", "0")],
    },
    StrategyDescriptor {
        name: "discard-at-end",
        summary: "plays honestly, then resets every output register to |0…0⟩",
        features: &[],
        params: &[],
    },
    StrategyDescriptor { name: "honest", summary: "follows the protocol", features: &[], params: &[] },
    StrategyDescriptor {
        name: "lazy-parity",
        summary: "guesses the reported xor bits with fair coins instead of measuring",
        features: &["multi_block"],
        params: &[],
    },
    StrategyDescriptor {
        name: "measure-early",
        summary: "measures the key register in the computational basis before the phase step",
        features: &["qfac"],
        params: &[],
    },
    StrategyDescriptor {
        name: "parity-liar",
        summary: "measures the xor bits honestly and reports their complements",
        features: &["multi_block"],
        params: &[],
    },
    StrategyDescriptor {
        name: "partial-constant",
        summary: "answers rotated-basis challenges with r with probability p, honestly otherwise",
        features: &["qfac", "qubit_test"],
        params: &[("r", "the fixed answer bit", "0"), ("p", "probability of the fixed answer", "0.5")],
    },
    StrategyDescriptor {
        name: "phase-offset",
        summary: "rotates the phase qubit by k·π/4 before answering and before handing it over",
        features: &["qfac", "qubit_test"],
        params: &[("k", "offset in units of π/4", "4")],
    },
    StrategyDescriptor {
        name: "state-replacer",
        summary: "discards every delivered state and substitutes ψ on each qubit",
        features: &["ideal", "bb84", "toy_ntcf"],
        params: &[("state", "one-qubit state: 0, 1, +, - or +k for |+_k⟩", "+1")],
    },
    StrategyDescriptor {
        name: "witness-replacer",
        summary: "prepares ψ on every witness qubit instead of the honest witness",
        features: &["energy_test"],
        params: &[("state", "one-qubit state: 0, 1, +, - or +k for |+_k⟩", "+")],
    },
];

/// Every registered strategy, sorted by name.
pub fn registry() -> &'static [StrategyDescriptor] {
    REGISTRY
}

pub fn strategy_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|d| d.name).collect()
}

pub fn describe(name: &str) -> Option<&'static StrategyDescriptor> {
    REGISTRY.iter().find(|d| d.name == name)
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Honest,
    AlwaysAbort,
    DiscardAtEnd,
    ParityLiar,
    LazyParity,
    StateReplacer(SparseState),
    WitnessReplacer(SparseState),
    PhaseOffset(u8),
    ConstantAnswer(bool),
    PartialConstant { r: bool, p: f64 },
    MeasureEarly,
}

/// A registered strategy with its parameters bound.
#[derive(Clone, Debug, PartialEq)]
pub struct Strategy {
    descriptor: &'static StrategyDescriptor,
    params: Params,
    kind: Kind,
}

impl Strategy {
    pub fn descriptor(&self) -> &'static StrategyDescriptor {
        self.descriptor
    }

    /// Parameters after defaults were filled in.
    pub fn params(&self) -> &Params {
        &self.params
    }
}

/// Parses "0", "1", "+", "-" or "+k" (|+_k⟩, k in 0..8).
pub fn parse_qubit_state(text: &str) -> Option<SparseState> {
    let plus = |k: i64| {
        let [a, b] = gates::plus_theta(k);
        SparseState::from_amplitudes(1, [(0, a), (1, b)])
    };
    match text.trim() {
        "0" => Some(SparseState::basis(1, 0)),
        "1" => Some(SparseState::basis(1, 1)),
        "+" => Some(plus(0)),
        "-" => Some(plus(4)),
        t => t.strip_prefix('+').and_then(|k| k.parse::<u8>().ok()).filter(|k| *k < 8).map(|k| plus(k as i64)),
    }
}

fn power(psi: &SparseState, width: usize) -> Result<SparseState> {
    (0..width).try_fold(SparseState::zero(0), |acc, _| acc.tensor(psi).map_err(ProtocolError::from))
}

/// Builds a registered strategy. Unknown parameter names are rejected.
pub fn make_adversary(name: &str, params: &Params) -> std::result::Result<Strategy, AdversaryError> {
    let descriptor = describe(name).ok_or_else(|| AdversaryError::UnknownStrategy(name.into()))?;
    let bad = |param: &str, message: String| AdversaryError::BadParameter { strategy: name.into(), param: param.into(), message };
    for key in params.keys() {
        if !descriptor.params.iter().any(|p| p.0 == key) {
            return Err(bad(key, "not a parameter of this strategy".into()));
        }
    }
    let mut full = Params::new();
    for (p, _, default) in descriptor.params {
        full.insert(p.to_string(), params.get(*p).cloned().unwrap_or_else(|| default.to_string()));
    }
    let get = |p: &str| full[p].clone();
    let bit = |p: &str| match get(p).as_str() {
        "0" | "false" => Ok(false),
        "1" | "true" => Ok(true),
        other => Err(bad(p, format!("expected 0 or 1, got {other:?}"))),
    };
    let state = |p: &str| parse_qubit_state(&get(p)).ok_or_else(|| bad(p, format!("unknown state {:?}", get(p))));
    let kind = match name {
        "honest" => Kind::Honest,
        "always-abort" => Kind::AlwaysAbort,
        "discard-at-end" => Kind::DiscardAtEnd,
        "parity-liar" => Kind::ParityLiar,
        "lazy-parity" => Kind::LazyParity,
        "measure-early" => Kind::MeasureEarly,
        "state-replacer" => Kind::StateReplacer(state("state")?),
        "witness-replacer" => Kind::WitnessReplacer(state("state")?),
        "constant-answer" => Kind::ConstantAnswer(bit("r")?),
        "phase-offset" => {
            let k: u8 = get("k").parse().map_err(|_| bad("k", format!("expected 0..8, got {:?}", get("k"))))?;
            if k >= 8 {
                return Err(bad("k", format!("expected 0..8, got {k}")));
            }
            Kind::PhaseOffset(k)
        }
        "partial-constant" => {
            let p: f64 = get("p").parse().map_err(|_| bad("p", format!("not a number: {:?}", get("p"))))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(bad("p", format!("{p} is not a probability")));
            }
            Kind::PartialConstant { r: bit("r")?, p }
        }
        _ => unreachable!("registry and constructor disagree on {name}"),
    };
    Ok(Strategy { descriptor, params: full, kind })
}

/// [`make_adversary`] plus the applicability check against `protocol`.
pub fn make_adversary_for(name: &str, params: &Params, protocol: &dyn Protocol) -> std::result::Result<Strategy, AdversaryError> {
    let s = make_adversary(name, params)?;
    if !s.applies_to(&protocol.features()) {
        return Err(ProtocolError::InapplicableProtocol { adversary: name.into(), protocol: protocol.id() }.into());
    }
    Ok(s)
}

impl Adversary for Strategy {
    fn name(&self) -> String {
        self.descriptor.name.into()
    }

    fn applies_to(&self, features: &[&str]) -> bool {
        self.descriptor.features.is_empty() || self.descriptor.features.iter().any(|f| features.contains(f))
    }

    fn ideal_abort(&self, _ctx: &HookCtx, _view: &mut ServerView) -> Result<bool> {
        Ok(self.kind == Kind::AlwaysAbort)
    }

    fn after_delivery(&self, _ctx: &HookCtx, view: &mut ServerView, regs: &[String]) -> Result<()> {
        if let Kind::StateReplacer(psi) = &self.kind {
            for r in regs {
                let w = view.width(r)?;
                view.replace_state(r, power(psi, w)?)?;
            }
        }
        Ok(())
    }

    fn report_xor(&self, _ctx: &HookCtx, view: &mut ServerView, blocks: &[String]) -> Result<Vec<bool>> {
        match self.kind {
            Kind::ParityLiar => Ok(honest::report_xor(view, blocks)?.into_iter().map(|b| !b).collect()),
            Kind::LazyParity => Ok((1..blocks.len()).map(|_| view.coin(0.5)).collect()),
            _ => honest::report_xor(view, blocks),
        }
    }

    fn qfac_phase_measure(&self, _ctx: &HookCtx, view: &mut ServerView, q: &str, key: &str) -> Result<Bits> {
        if self.kind == Kind::MeasureEarly {
            view.measure(&[key], Basis::Computational)?;
        }
        honest::qfac_phase_measure(view, q, key)
    }

    fn rotated_answer(&self, _ctx: &HookCtx, view: &mut ServerView, q: &str, phi: u8) -> Result<bool> {
        match self.kind {
            Kind::ConstantAnswer(r) => Ok(r),
            Kind::PartialConstant { r, p } => {
                if view.coin(p) {
                    Ok(r)
                } else {
                    honest::rotated_answer(view, q, phi)
                }
            }
            Kind::PhaseOffset(k) => {
                view.apply_gate(&[(q, 0)], &gates::phase(k as i64))?;
                honest::rotated_answer(view, q, phi)
            }
            _ => honest::rotated_answer(view, q, phi),
        }
    }

    fn prepare_witness(&self, _ctx: &HookCtx, view: &mut ServerView, w: &str, witness: &SparseState) -> Result<()> {
        match &self.kind {
            Kind::WitnessReplacer(psi) => view.replace_state(w, power(psi, witness.num_qubits())?),
            _ => view.replace_state(w, witness.clone()),
        }
    }

    fn finish(&self, _ctx: &HookCtx, view: &mut ServerView, outputs: &[String]) -> Result<()> {
        match self.kind {
            Kind::DiscardAtEnd => {
                for r in outputs {
                    let w = view.width(r)?;
                    view.replace_state(r, SparseState::zero(w))?;
                }
            }
            Kind::PhaseOffset(k) => {
                for r in outputs {
                    if view.width(r)? == 1 {
                        view.apply_gate(&[(r, 0)], &gates::phase(k as i64))?;
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
