use super::*;
use crate::chain::{Kp, KpBackend, MultiBlock, OneBlock, QFac};
use crate::functionalities::{Bb84Descriptor, IdealBb84};
use crate::hamiltonian::{EnergyTest, XZHamiltonian};
use crate::protocol::{run, run_exact, HonestAdversary, Mode, ModeOf, RunOptions, ScoreValue};
use crate::qsim::{CqEnsemble, RegisterLayout};
use crate::qubit_test::{optimal_value, QubitBackend, QubitTest};

fn empty() -> CqEnsemble {
    CqEnsemble::pure(RegisterLayout::new(), SparseState::zero(0)).unwrap()
}

fn adv(name: &str, params: &[(&str, &str)]) -> Strategy {
    let p: Params = params.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    make_adversary(name, &p).unwrap()
}

fn hoeffding(trials: usize) -> f64 {
    ((2.0f64 / 1e-6).ln() / (2.0 * trials as f64)).sqrt()
}

fn pass_rate(p: &dyn Protocol, a: &dyn Adversary, trials: u64) -> f64 {
    (0..trials).filter(|&s| run(p, a, &empty(), s).unwrap().flag.is_pass()).count() as f64 / trials as f64
}

fn mb() -> MultiBlock {
    MultiBlock { m: 4, n: 2, eps: 0.5, kappa: 1, profile: crate::amplification::Profile::Scaled }
}

fn qfac() -> QFac {
    QFac::new(Kp { n: 2, eps: 0.1, kappa: 1, backend: KpBackend::Ideal }).unwrap()
}

#[test]
fn registry_is_sorted_unique_and_constructible() {
    let names = strategy_names();
    let mut sorted = names.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(names, sorted);
    for n in names {
        let s = make_adversary(n, &Params::new()).unwrap();
        assert_eq!(s.name(), n);
        assert_eq!(s.params().len(), describe(n).unwrap().params.len());
    }
}

#[test]
fn construction_errors() {
    assert_eq!(make_adversary("nope", &Params::new()), Err(AdversaryError::UnknownStrategy("nope".into())));
    let p = |k: &str, v: &str| Params::from([(k.to_string(), v.to_string())]);
    assert!(matches!(make_adversary("phase-offset", &p("k", "9")), Err(AdversaryError::BadParameter { .. })));
    assert!(matches!(make_adversary("phase-offset", &p("k", "x")), Err(AdversaryError::BadParameter { .. })));
    assert!(matches!(make_adversary("honest", &p("k", "1")), Err(AdversaryError::BadParameter { .. })));
    assert!(matches!(make_adversary("constant-answer", &p("r", "2")), Err(AdversaryError::BadParameter { .. })));
    assert!(matches!(make_adversary("partial-constant", &p("p", "1.5")), Err(AdversaryError::BadParameter { .. })));
    assert!(matches!(make_adversary("state-replacer", &p("state", "+9")), Err(AdversaryError::BadParameter { .. })));
    let e = make_adversary_for("parity-liar", &Params::new(), &IdealBb84);
    assert!(matches!(e, Err(AdversaryError::Protocol(ProtocolError::InapplicableProtocol { .. }))));
    let liar = adv("parity-liar", &[]);
    assert!(matches!(run(&IdealBb84, &liar, &empty(), 0), Err(ProtocolError::InapplicableProtocol { .. })));
    assert!(make_adversary_for("parity-liar", &Params::new(), &ModeOf { inner: &mb(), mode: Mode::Test }).is_ok());
}

#[test]
fn qubit_states_parse() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    assert_eq!(parse_qubit_state("1"), Some(SparseState::basis(1, 1)));
    let minus = parse_qubit_state("-").unwrap();
    assert!((minus.amplitude(1).re + s).abs() < 1e-12);
    assert!((parse_qubit_state("+2").unwrap().amplitude(1).im - s).abs() < 1e-12);
    assert_eq!(parse_qubit_state("+8"), None);
    assert_eq!(parse_qubit_state("y"), None);
}

#[test]
fn honest_strategy_matches_the_honest_server() {
    let h = adv("honest", &[]);
    let q = qfac();
    let p = ModeOf { inner: &q, mode: Mode::Test };
    for seed in 0..20 {
        let a = run(&p, &h, &empty(), seed).unwrap();
        let b = run(&p, &HonestAdversary, &empty(), seed).unwrap();
        assert_eq!(a.transcript, b.transcript);
        assert_eq!((a.flag, a.score), (b.flag, b.score));
    }
}

#[test]
fn parity_liar_always_fails_the_reveal() {
    let m = mb();
    let p = ModeOf { inner: &m, mode: Mode::Test };
    let liar = adv("parity-liar", &[]);
    for seed in 0..200 {
        assert!(!run(&p, &liar, &empty(), seed).unwrap().flag.is_pass());
    }
}

#[test]
fn lazy_parity_fails_half_the_time_with_two_blocks() {
    let m = mb();
    let p = ModeOf { inner: &m, mode: Mode::Test };
    let honest = pass_rate(&p, &HonestAdversary, 400);
    let lazy = pass_rate(&p, &adv("lazy-parity", &[]), 2000);
    // a guessed bit is right with probability ½, independently of the rest
    assert!((lazy - honest / 2.0).abs() <= hoeffding(2000) + hoeffding(400), "{lazy} vs {honest}");
}

#[test]
fn phase_offset_by_four_fails_on_aligned_challenges() {
    let q = qfac();
    let p = ModeOf { inner: &q, mode: Mode::Test };
    let trials = 3000;
    let rate = pass_rate(&p, &adv("phase-offset", &[("k", "4")]), trials);
    assert!(rate <= 0.75 + hoeffding(trials as usize), "{rate}");
    // a zero offset is the honest server
    assert!(pass_rate(&p, &adv("phase-offset", &[("k", "0")]), 300) >= pass_rate(&p, &HonestAdversary, 300) - 1e-12);
}

#[test]
fn phase_offset_rotates_the_output() {
    let t = QubitTest::ideal();
    let p = ModeOf { inner: &t, mode: Mode::Comp };
    for seed in 0..10 {
        let out = run(&p, &adv("phase-offset", &[("k", "2")]), &empty(), seed).unwrap();
        let theta = out.description("theta").unwrap().to_uint() as u8;
        let want = parse_qubit_state(&format!("+{}", (theta + 2) % 8)).unwrap();
        let rho = out.final_state.density_of(&["q"], None).unwrap();
        assert!((rho.expectation_pure(&want).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn constant_and_partial_answers_on_the_qubit_test() {
    let t = QubitTest::ideal();
    let p = ModeOf { inner: &t, mode: Mode::Test };
    let opts = RunOptions { enumerate_client: true, ..RunOptions::default() };
    let win = |a: &Strategy| run_exact(&p, a, &empty(), 0, &opts).unwrap().score_probability(ScoreValue::Win);
    assert!((win(&adv("constant-answer", &[("r", "1")])) - 0.5).abs() < 1e-12);
    assert!((win(&adv("partial-constant", &[("p", "1")])) - 0.5).abs() < 1e-12);
    assert!((win(&adv("partial-constant", &[("p", "0")])) - optimal_value()).abs() < 1e-9);
    let mixed = win(&adv("partial-constant", &[("p", "0.5")]));
    assert!((mixed - (0.5 + optimal_value()) / 2.0).abs() < 1e-9);
}

#[test]
fn state_replacer_on_the_qubit_test_wins_half() {
    let t = QubitTest::ideal();
    let p = ModeOf { inner: &t, mode: Mode::Test };
    let opts = RunOptions { enumerate_client: true, ..RunOptions::default() };
    let ex = run_exact(&p, &adv("state-replacer", &[("state", "+1")]), &empty(), 0, &opts).unwrap();
    // |⟨+_{c+4u}|+_1⟩|² averaged over θ and c is ½
    assert!((ex.score_probability(ScoreValue::Win) - 0.5).abs() < 1e-12);
}

#[test]
fn measure_early_halves_the_aligned_checks() {
    let q = qfac();
    let p = ModeOf { inner: &q, mode: Mode::Test };
    let trials = 3000;
    let honest = pass_rate(&p, &HonestAdversary, trials);
    let early = pass_rate(&p, &adv("measure-early", &[]), trials);
    // a collapsed qubit fails an aligned challenge with probability ½
    let want = honest * (1.0 - 0.25 * 0.5);
    assert!((early - want).abs() <= 2.0 * hoeffding(trials as usize), "{early} vs {want}");
}

#[test]
fn witness_replacer_is_caught_in_energy_mode() {
    let h = XZHamiltonian::parse("-1 ZZ", 5).unwrap();
    let t = EnergyTest::new(h, -1.0, -0.5, 1, Some(100), SparseState::basis(2, 0)).unwrap();
    let p = ModeOf { inner: &t, mode: Mode::Comp };
    assert_eq!(pass_rate(&p, &HonestAdversary, 20), 1.0);
    assert!(pass_rate(&p, &adv("witness-replacer", &[("state", "+")]), 50) <= 0.1);
    assert_eq!(pass_rate(&p, &adv("witness-replacer", &[("state", "1")]), 20), 1.0);
}

#[test]
fn discard_at_end_and_always_abort() {
    let out = run(&IdealBb84, &adv("discard-at-end", &[]), &empty(), 0).unwrap();
    assert!(out.flag.is_pass());
    let rho = out.final_state.density_of(&["q"], None).unwrap();
    assert!((rho.expectation_pure(&SparseState::basis(1, 0)).unwrap() - 1.0).abs() < 1e-12);
    // the client's description no longer matches unless it was |0⟩
    let d = Bb84Descriptor::from_bits(out.description("d").unwrap()).unwrap();
    let f = rho.expectation_pure(&d.state()).unwrap();
    assert!((f - d.state().amplitude(0).norm_sqr()).abs() < 1e-12);
    for seed in 0..5 {
        assert!(!run(&IdealBb84, &adv("always-abort", &[]), &empty(), seed).unwrap().flag.is_pass());
    }
}

#[test]
fn strategies_are_reproducible() {
    let m = mb();
    let p = ModeOf { inner: &m, mode: Mode::Test };
    let lazy = adv("lazy-parity", &[]);
    for seed in 0..10 {
        let a = run(&p, &lazy, &empty(), seed).unwrap();
        let b = run(&p, &lazy, &empty(), seed).unwrap();
        assert_eq!(a.transcript, b.transcript);
        assert_eq!(a.flag, b.flag);
    }
}

#[test]
fn every_strategy_runs_on_its_protocols() {
    let one = OneBlock { m: 4, eps: 0.1, kappa: 1 };
    let multi = mb();
    let kp = Kp { n: 2, eps: 0.1, kappa: 1, backend: KpBackend::Ideal };
    let qf = qfac();
    let qt = QubitTest::ideal();
    let toy = QubitTest { backend: QubitBackend::ToyNtcf { kappa: 3, mu: 0.5 } };
    let h = XZHamiltonian::parse("-1 ZZ\n0.5 XI", 5).unwrap();
    let et = EnergyTest::new(h, -1.0, -0.5, 1, Some(2), SparseState::basis(2, 0)).unwrap();
    let zoo: Vec<Box<dyn Protocol + '_>> = vec![
        Box::new(IdealBb84),
        Box::new(one),
        Box::new(ModeOf { inner: &multi, mode: Mode::Test }),
        Box::new(ModeOf { inner: &multi, mode: Mode::Comp }),
        Box::new(kp),
        Box::new(ModeOf { inner: &qf, mode: Mode::Test }),
        Box::new(ModeOf { inner: &qf, mode: Mode::Comp }),
        Box::new(ModeOf { inner: &qt, mode: Mode::Test }),
        Box::new(ModeOf { inner: &qt, mode: Mode::Comp }),
        Box::new(ModeOf { inner: &toy, mode: Mode::Test }),
        Box::new(et),
    ];
    for d in registry() {
        let s = make_adversary(d.name, &Params::new()).unwrap();
        let mut covered = 0;
        for p in &zoo {
            if !s.applies_to(&p.features()) {
                continue;
            }
            covered += 1;
            for seed in 0..100 {
                if let Err(e) = run(p.as_ref(), &s, &empty(), seed) {
                    panic!("{} on {} seed {seed}: {e}", d.name, p.id());
                }
            }
        }
        assert!(covered > 0, "{} applies to nothing in the zoo", d.name);
    }
}
