use std::collections::BTreeMap;

use crate::adversaries::parse_qubit_state;
use crate::amplification::{AmplifierParams, Profile};
use crate::chain::{Kp, KpBackend, MultiBlock, OneBlock, OneBlockTensor, QFac};
use crate::functionalities::IdealBb84;
use crate::hamiltonian::{EnergyTest, XZHamiltonian, DEFAULT_LOCALITY};
use crate::protocol::{Adversary, Mode, Protocol, Result as PResult, Session, StepResult, TwoModeProtocol};
use crate::qsim::SparseState;
use crate::qubit_test::{translation_pipeline, QubitBackend, QubitTest};

use super::{CliError, Result};

/// A runnable protocol entry: id, summary and (parameter, meaning, default).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolDescriptor {
    pub id: &'static str,
    pub summary: &'static str,
    pub params: &'static [(&'static str, &'static str, &'static str)],
}

const KP_PARAMS: &[(&str, &str, &str)] = &[
    ("n", "key width", "2"),
    ("eps", "target closeness", "0.1"),
    ("kappa", "security parameter", "1"),
    ("backend", "ideal or chain", "ideal"),
    ("m0", "block width of the chain backend", "2"),
    ("block_kappa", "one-block security parameter of the chain backend", "8"),
    ("rounds", "cut-and-choose rounds of the chain backend", "1"),
    ("eps0", "baseline closeness of the chain backend", "0.02"),
];

const MB_PARAMS: &[(&str, &str, &str)] = &[
    ("m", "block width", "4"),
    ("n", "number of blocks", "2"),
    ("eps", "target closeness", "0.5"),
    ("kappa", "security parameter", "1"),
    ("profile", "paper or scaled", "scaled"),
];

const QT_PARAMS: &[(&str, &str, &str)] = &[
    ("backend", "ideal or toy_ntcf", "ideal"),
    ("kappa", "toy function domain width", "4"),
    ("mu", "toy function noise parameter", "0.5"),
];

const REGISTRY: &[ProtocolDescriptor] = &[
    ProtocolDescriptor {
        id: "energy_test",
        summary: "two-mode energy test of an XZ Hamiltonian against thresholds a < b",
        params: &[
            ("hamiltonian", "terms \"<gamma> <letters>\" separated by newlines or ';'", "-1 ZZ"),
            ("a", "low energy threshold", "-1.0"),
            ("b", "high energy threshold", "-0.5"),
            ("kappa", "security parameter", "1"),
            ("rounds", "rounds K run (0 = full 100κ²/(b−a)²)", "200"),
            ("witness", "one state per qubit from 0, 1, +, -", "00"),
            ("mode", "both (client coin), test or comp", "both"),
        ],
    },
    ProtocolDescriptor { id: "ideal_bb84", summary: "ideal delivery of a uniform BB84 state", params: &[] },
    ProtocolDescriptor { id: "kp", summary: "key-pair state (|0⟩|x0⟩ + |1⟩|x1⟩)/√2", params: KP_PARAMS },
    ProtocolDescriptor { id: "multi_block_comp", summary: "multi-block protocol, comp mode", params: MB_PARAMS },
    ProtocolDescriptor { id: "multi_block_test", summary: "multi-block protocol, test mode", params: MB_PARAMS },
    ProtocolDescriptor {
        id: "one_block",
        summary: "one-block key pair from BB84 rounds",
        params: &[("m", "block width", "4"), ("eps", "target closeness", "0.1"), ("kappa", "security parameter", "1")],
    },
    ProtocolDescriptor {
        id: "one_block_tensor",
        summary: "n independent one-block runs",
        params: &[
            ("m", "block width", "4"),
            ("n", "number of blocks", "2"),
            ("eps", "target closeness", "0.1"),
            ("kappa", "security parameter", "1"),
        ],
    },
    ProtocolDescriptor { id: "qfac_comp", summary: "phase-state protocol, comp mode", params: KP_PARAMS },
    ProtocolDescriptor { id: "qfac_test", summary: "phase-state protocol, scored test mode", params: KP_PARAMS },
    ProtocolDescriptor { id: "qubit_test", summary: "one scored round of the test of a qubit", params: QT_PARAMS },
    ProtocolDescriptor {
        id: "qubit_translation",
        summary: "test of a qubit amplified by score, test mode",
        params: &[
            ("backend", "ideal or toy_ntcf", "ideal"),
            ("kappa", "toy function domain width", "4"),
            ("mu", "toy function noise parameter", "0.5"),
            ("rounds", "rounds L", "400"),
            ("delta0", "closeness target", "0.75"),
            ("lambda", "tolerated deficit slack", "0.0"),
            ("eps", "target closeness", "0.9"),
            ("eps0", "baseline closeness", "0.1"),
        ],
    },
];

/// Every runnable protocol, sorted by id.
pub fn protocols() -> &'static [ProtocolDescriptor] {
    REGISTRY
}

/// Parameters given as TOML values; missing keys take the defaults above.
pub type ParamTable = toml::Table;

struct Getter<'a> {
    id: &'static str,
    given: &'a ParamTable,
    schema: &'static [(&'static str, &'static str, &'static str)],
}

impl Getter<'_> {
    fn raw(&self, key: &str) -> String {
        match self.given.get(key) {
            Some(toml::Value::String(s)) => s.clone(),
            Some(v) => v.to_string(),
            None => self.schema.iter().find(|p| p.0 == key).map(|p| p.2.to_string()).unwrap_or_default(),
        }
    }

    fn bad(&self, key: &str, why: impl std::fmt::Display) -> CliError {
        CliError::BadParameter(format!("{}.{key}: {why}", self.id))
    }

    fn usize(&self, key: &str) -> Result<usize> {
        self.raw(key).parse().map_err(|e| self.bad(key, e))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        self.raw(key).parse().map_err(|e| self.bad(key, e))
    }

    fn profile(&self) -> Result<Profile> {
        match self.raw("profile").as_str() {
            "paper" => Ok(Profile::Paper),
            "scaled" => Ok(Profile::Scaled),
            other => Err(self.bad("profile", format!("expected paper or scaled, got {other:?}"))),
        }
    }
}

/// A protocol built from the registry, plus values worth echoing in reports.
pub struct BuiltProtocol {
    pub protocol: Box<dyn Protocol>,
    pub notes: BTreeMap<String, serde_json::Value>,
}

/// Owning counterpart of [`crate::protocol::ModeOf`].
struct Fixed<T> {
    inner: T,
    mode: Mode,
}

impl<T: TwoModeProtocol> Protocol for Fixed<T> {
    fn id(&self) -> String {
        format!("{}:{}", self.inner.id(), if self.mode == Mode::Test { "test" } else { "comp" })
    }
    fn features(&self) -> Vec<&'static str> {
        self.inner.features()
    }
    fn scored(&self) -> bool {
        self.mode == Mode::Test && self.inner.scored()
    }
    fn execute(&self, s: &mut Session, adv: &dyn Adversary) -> PResult<StepResult> {
        self.inner.execute_mode(self.mode, s, adv)
    }
}

fn fixed<T: TwoModeProtocol + 'static>(inner: T, mode: Mode) -> Box<dyn Protocol> {
    Box::new(Fixed { inner, mode })
}

fn kp(g: &Getter) -> Result<Kp> {
    let backend = match g.raw("backend").as_str() {
        "ideal" => KpBackend::Ideal,
        "chain" => {
            let amp = AmplifierParams::scaled_prersvp(g.f64("eps")?, g.f64("eps0")?, g.usize("rounds")?, 0.0)?;
            KpBackend::Chain { m0: g.usize("m0")?, block_kappa: g.usize("block_kappa")?, amp }
        }
        other => return Err(g.bad("backend", format!("expected ideal or chain, got {other:?}"))),
    };
    let kp = Kp { n: g.usize("n")?, eps: g.f64("eps")?, kappa: g.usize("kappa")?, backend };
    kp.validate()?;
    Ok(kp)
}

fn qubit_backend(g: &Getter) -> Result<QubitBackend> {
    match g.raw("backend").as_str() {
        "ideal" => Ok(QubitBackend::Ideal),
        "toy_ntcf" => Ok(QubitBackend::ToyNtcf { kappa: g.usize("kappa")?, mu: g.f64("mu")? }),
        other => Err(g.bad("backend", format!("expected ideal or toy_ntcf, got {other:?}"))),
    }
}

fn witness(g: &Getter, n: usize) -> Result<SparseState> {
    let text = g.raw("witness");
    let mut state = SparseState::zero(0);
    let mut count = 0;
    for ch in text.chars().filter(|c| !c.is_whitespace()) {
        let q = parse_qubit_state(&ch.to_string()).ok_or_else(|| g.bad("witness", format!("unknown state {ch:?}")))?;
        state = state.tensor(&q).map_err(|e| g.bad("witness", e))?;
        count += 1;
    }
    if count != n {
        return Err(g.bad("witness", format!("{count} qubits for a {n}-qubit Hamiltonian")));
    }
    Ok(state)
}

/// Builds protocol `id` from `params`. Unknown parameter names are errors.
pub fn build_protocol(id: &str, params: &ParamTable) -> Result<BuiltProtocol> {
    let d = REGISTRY.iter().find(|d| d.id == id).ok_or_else(|| CliError::UnknownProtocol(id.into()))?;
    for k in params.keys() {
        if !d.params.iter().any(|p| p.0 == k) {
            return Err(CliError::BadParameter(format!("{id}: unknown parameter {k:?}")));
        }
    }
    let g = Getter { id: d.id, given: params, schema: d.params };
    let mut notes = BTreeMap::new();
    let protocol: Box<dyn Protocol> = match d.id {
        "ideal_bb84" => Box::new(IdealBb84),
        "one_block" => Box::new(OneBlock { m: g.usize("m")?, eps: g.f64("eps")?, kappa: g.usize("kappa")? }),
        "one_block_tensor" => {
            Box::new(OneBlockTensor { m: g.usize("m")?, n: g.usize("n")?, eps: g.f64("eps")?, kappa: g.usize("kappa")? })
        }
        "multi_block_test" | "multi_block_comp" => {
            let mb = MultiBlock::new(g.usize("m")?, g.usize("n")?, g.f64("eps")?, g.usize("kappa")?, g.profile()?)?;
            fixed(mb, if d.id == "multi_block_test" { Mode::Test } else { Mode::Comp })
        }
        "kp" => Box::new(kp(&g)?),
        "qfac_test" | "qfac_comp" => {
            let q = QFac::new(kp(&g)?)?;
            fixed(q, if d.id == "qfac_test" { Mode::Test } else { Mode::Comp })
        }
        "qubit_test" => {
            let t = QubitTest { backend: qubit_backend(&g)? };
            t.validate()?;
            fixed(t, Mode::Test)
        }
        "qubit_translation" => {
            let backend = qubit_backend(&g)?;
            QubitTest { backend: backend.clone() }.validate()?;
            let amp = translation_pipeline(
                backend,
                g.usize("rounds")?,
                g.f64("delta0")?,
                g.f64("lambda")?,
                g.f64("eps")?,
                g.f64("eps0")?,
            )?;
            notes.insert("threshold".into(), amp.params.threshold.into());
            fixed(amp, Mode::Test)
        }
        "energy_test" => {
            let text = g.raw("hamiltonian").replace(';', "\n");
            let h = XZHamiltonian::parse(&text, DEFAULT_LOCALITY)?;
            let rounds = g.usize("rounds")?;
            let w = witness(&g, h.n)?;
            let t = EnergyTest::new(h, g.f64("a")?, g.f64("b")?, g.usize("kappa")?, (rounds > 0).then_some(rounds), w)?;
            notes.insert("paper_rounds".into(), t.paper_rounds().into());
            notes.insert("rounds".into(), t.rounds.into());
            notes.insert("threshold".into(), t.threshold().into());
            match g.raw("mode").as_str() {
                "both" => Box::new(t),
                "test" => fixed(t, Mode::Test),
                "comp" => fixed(t, Mode::Comp),
                other => return Err(g.bad("mode", format!("expected both, test or comp, got {other:?}"))),
            }
        }
        other => unreachable!("registry entry {other} has no builder"),
    };
    Ok(BuiltProtocol { protocol, notes })
}
