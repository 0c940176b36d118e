//! Structural invariants of the core types, checked on generated inputs.

mod common;

use common::*;
use proptest::prelude::*;
use rspv_lab::adversaries::{make_adversary, make_adversary_for, registry, Params};
use rspv_lab::amplification::{AmplifierParams, RepeatPick};
use rspv_lab::chain::{MultiBlock, OneBlock, QFac, Kp, KpBackend};
use rspv_lab::cli::{build_protocol, protocols, ParamTable};
use rspv_lab::functionalities::{bb84_family, toy_ntcf_dec, toy_ntcf_keygen, RoavSpec, ToyFunction};
use rspv_lab::hamiltonian::{round_value, val_h, CompRecord, Pauli, XZHamiltonian};
use rspv_lab::protocol::{
    run, FlagValue, HonestAdversary, Message, Mode, ModeOf, Owner, Protocol, Result as PResult, Session, StepResult,
};
use rspv_lab::qsim::{Basis, Bits, CqEnsemble, DensityView, RegisterLayout, DEFAULT_MAX_QUANTUM_WIDTH};
use rspv_lab::qubit_test::{random_blind_instance, QubitTest};
use rspv_lab::stats::estimate_probability;

#[derive(Clone, Debug)]
enum Op {
    Gate(usize, usize, u64),
    Measure(usize, u8),
    Parity(usize, usize),
}

fn ops(n: usize) -> impl Strategy<Value = Vec<Op>> {
    let op = prop_oneof![
        (0..n, 0..n, any::<u64>()).prop_map(|(a, b, s)| Op::Gate(a, b, s)),
        (0..n, 0u8..8).prop_map(|(q, t)| Op::Measure(q, t)),
        (0..n, 0..n).prop_map(|(a, b)| Op::Parity(a, b)),
    ];
    prop::collection::vec(op, 1..6)
}

fn apply(e: CqEnsemble, op: &Op, step: usize) -> CqEnsemble {
    let rec = format!("r{step}");
    match *op {
        Op::Gate(a, b, s) => {
            let qs = if a == b { vec![a] } else { vec![a, b] };
            e.apply_unitary(&qs, &random_unitary(1 << qs.len(), s)).unwrap()
        }
        Op::Measure(q, t) => e.with_record(&rec, 1).unwrap().measure_basis(&[q], Basis::Rotated(t), &rec).unwrap(),
        Op::Parity(a, b) => {
            let mut qs = vec![a];
            if a != b {
                qs.push(b);
            }
            e.with_record(&rec, 1).unwrap().measure_parity(&qs, &rec).unwrap()
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn layouts_reject_duplicates_empty_and_oversized(regs in prop::collection::vec((0u8..4, 0usize..12), 1..6)) {
        let mut layout = RegisterLayout::new();
        let mut names = Vec::new();
        let mut total = 0;
        for (name, width) in regs {
            let name = format!("r{name}");
            let ok = !names.contains(&name) && width >= 1 && total + width <= DEFAULT_MAX_QUANTUM_WIDTH;
            let res = layout.clone().quantum(&name, width);
            prop_assert_eq!(res.is_ok(), ok, "{} width {}", name, width);
            if let Ok(l) = res {
                layout = l;
                names.push(name);
                total += width;
            }
        }
        prop_assert_eq!(layout.quantum_width(), total);
    }

    #[test]
    fn branches_stay_normalized_and_weights_sum_to_one(n in 1usize..=4, seed in any::<u64>(), ops in ops(4)) {
        let layout = RegisterLayout::new().quantum("q", n).unwrap();
        let mut e = CqEnsemble::pure(layout, to_sparse(&random_vector(n, seed))).unwrap();
        for (i, op) in ops.iter().enumerate() {
            let op = match op.clone() {
                Op::Gate(a, b, s) => Op::Gate(a % n, b % n, s),
                Op::Measure(q, t) => Op::Measure(q % n, t),
                Op::Parity(a, b) => Op::Parity(a % n, b % n),
            };
            e = apply(e, &op, i);
        }
        let mut total = 0.0;
        for b in e.branches() {
            prop_assert!((b.state.norm_sqr().sqrt() - 1.0).abs() < 1e-10);
            prop_assert!((0.0..=1.0).contains(&b.weight));
            total += b.weight;
        }
        prop_assert!((total - 1.0).abs() < 1e-9);
        let sel: Vec<usize> = (0..n).rev().collect();
        let rho = DensityView::reduce(e.branches().iter().map(|b| (b.weight, &b.state)), &sel[..n.div_ceil(2)]);
        prop_assert!(rho.is_hermitian(1e-10));
        prop_assert!(rho.trace() <= 1.0 + 1e-9);
        prop_assert!(rho.eigenvalues().iter().all(|&v| v >= -1e-9));
        // projected ensembles are sub-normalized
        let some = e.project(|l| l.values().all(|b| !b.get(0)));
        prop_assert!(some.total_weight() <= 1.0 + 1e-9);
    }

    #[test]
    fn transcript_has_one_entry_per_round(rounds in 1usize..6, seed in any::<u64>()) {
        let p = RepeatPick::new(OneMessage, AmplifierParams::scaled_repeat_pick(0.5, 0.1, rounds).unwrap()).unwrap();
        let out = run(&p, &HonestAdversary, &empty(), seed).unwrap();
        // one message per sub-run plus the announced pick
        prop_assert_eq!(out.transcript.len(), rounds + 1);
    }

    #[test]
    fn scores_appear_exactly_for_scored_protocols(index in 0usize..64, seed in any::<u64>()) {
        let all = protocols();
        let d = &all[index % all.len()];
        let built = build_protocol(d.id, &ParamTable::new()).unwrap();
        let out = run(built.protocol.as_ref(), &HonestAdversary, &empty(), seed).unwrap();
        prop_assert_eq!(out.score.is_some(), built.protocol.scored(), "{}", d.id);
        prop_assert!(matches!(out.flag, FlagValue::Pass | FlagValue::Fail));
    }

    #[test]
    fn modes_share_messages_until_divergence(seed in any::<u64>()) {
        let qfac = QFac::new(Kp { n: 2, eps: 0.1, kappa: 1, backend: KpBackend::Ideal }).unwrap();
        let qubit = QubitTest::ideal();
        let mb = MultiBlock { m: 4, n: 2, eps: 0.5, kappa: 2, profile: rspv_lab::amplification::Profile::Scaled };
        for (t, c) in [
            (run(&ModeOf { inner: &qfac, mode: Mode::Test }, &HonestAdversary, &empty(), seed), run(&ModeOf { inner: &qfac, mode: Mode::Comp }, &HonestAdversary, &empty(), seed)),
            (run(&ModeOf { inner: &qubit, mode: Mode::Test }, &HonestAdversary, &empty(), seed), run(&ModeOf { inner: &qubit, mode: Mode::Comp }, &HonestAdversary, &empty(), seed)),
            (run(&ModeOf { inner: &mb, mode: Mode::Test }, &HonestAdversary, &empty(), seed), run(&ModeOf { inner: &mb, mode: Mode::Comp }, &HonestAdversary, &empty(), seed)),
        ] {
            let (t, c) = (t.unwrap(), c.unwrap());
            let d = t.divergence.expect("divergence marked");
            prop_assert_eq!(Some(d), c.divergence);
            prop_assert_eq!(&t.transcript.rounds[..d], &c.transcript.rounds[..d]);
        }
    }

    #[test]
    fn honest_blocks_keep_their_key_invariants(m in 2usize..=8, seed in any::<u64>()) {
        let out = run(&OneBlock { m, eps: 0.1, kappa: 4 }, &HonestAdversary, &empty(), seed).unwrap();
        if out.flag.is_pass() {
            let (x0, x1) = (out.description("x0").unwrap(), out.description("x1").unwrap());
            prop_assert_eq!(x0.xor(x1).weight(), 1);
            prop_assert!(!x0.parity());
        }
        let mb = MultiBlock { m: 4, n: 3, eps: 0.5, kappa: 4, profile: rspv_lab::amplification::Profile::Scaled };
        let out = run(&ModeOf { inner: &mb, mode: Mode::Comp }, &HonestAdversary, &empty(), seed).unwrap();
        if out.flag.is_pass() {
            prop_assert!(!out.description("x0").unwrap().slice(0, 4).parity());
        }
    }

    #[test]
    fn scaled_profiles_still_enforce_the_constraints(eps in 0.01f64..0.99, eps0 in 0.01f64..0.99, d0 in 0.05f64..1.0, lambda in 0.0f64..0.2) {
        let ok_eps = eps > eps0;
        prop_assert_eq!(AmplifierParams::scaled_repeat_pick(eps, eps0, 5).is_ok(), ok_eps);
        prop_assert_eq!(AmplifierParams::scaled_prersvp(eps, eps0, 5, 0.2).is_ok(), ok_eps);
        let gap = d0 * (eps - eps0) / 6.0;
        let scored = AmplifierParams::scaled_scored(50, d0.min(0.999), lambda, eps, eps0, 0.85);
        if !ok_eps || lambda >= gap {
            prop_assert!(scored.is_err());
        }
    }

    #[test]
    fn blind_instances_are_valid(dim in 2usize..=4, seed in any::<u64>()) {
        let inst = random_blind_instance(dim, seed);
        prop_assert!(inst.validate().is_ok());
        for phi in &inst.phi {
            prop_assert!(phi.clone().symmetric_eigenvalues().iter().all(|&v| v >= -1e-9));
        }
        for x in [&inst.x0, &inst.x2] {
            let sq = x * x - nalgebra::DMatrix::identity(dim, dim);
            prop_assert!(max_abs(&sq) < 1e-9);
        }
    }

    #[test]
    fn hamiltonians_bound_coefficients_and_locality(terms in prop::collection::vec((-1.5f64..1.5, prop::collection::vec(0u8..3, 3)), 1..4), k in 1usize..=3) {
        let terms: Vec<(f64, Vec<Pauli>)> = terms
            .into_iter()
            .map(|(g, l)| (g, l.into_iter().map(|p| [Pauli::I, Pauli::X, Pauli::Z][p as usize]).collect()))
            .collect();
        let ok = terms.iter().all(|(g, l)| g.abs() <= 1.0 && l.iter().filter(|&&p| p != Pauli::I).count() <= k);
        prop_assert_eq!(XZHamiltonian::new(3, k, terms).is_ok(), ok);
    }

    #[test]
    fn energy_values_are_signed_coefficients_and_val_is_their_mean(
        rounds in prop::collection::vec((0usize..2, 0usize..8, 0usize..64), 1..6)
    ) {
        let h = XZHamiltonian::new(3, 3, vec![(0.75, vec![Pauli::Z, Pauli::X, Pauli::I]), (-0.5, vec![Pauli::X, Pauli::X, Pauli::Z])]).unwrap();
        let mut comp = Vec::new();
        let mut outs = Vec::new();
        let mut sum = 0.0;
        for &(j, mr, out) in &rounds {
            let (mr, out) = (Bits::from_uint(mr as u64, 3), Bits::from_uint(out as u64, 6));
            let v = round_value(&h, j, &mr, &out).unwrap();
            prop_assert!(v == h.terms[j].0 || v == -h.terms[j].0);
            sum += v;
            comp.push(CompRecord { j, mr });
            outs.push(out);
        }
        let val = val_h(&h, &comp, &outs).unwrap();
        prop_assert!((val - sum / rounds.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn estimates_are_ratios_inside_their_intervals(p in 0.0f64..=1.0, trials in 1u64..400, seed in any::<u64>()) {
        let r = estimate_probability("t", |s| Ok((s % 1000) as f64 / 1000.0 < p), trials, seed, Some(2)).unwrap();
        prop_assert_eq!(r.estimate, r.successes as f64 / trials as f64);
        prop_assert!(r.contains(r.estimate));
        prop_assert!(r.interval_method.to_lowercase().contains("hoeffding"));
    }

    #[test]
    fn toy_trapdoor_inverts_both_preimages(kappa in 2usize..=8, seed in any::<u64>()) {
        let keys = toy_ntcf_keygen(0.5, kappa, seed).unwrap();
        let f = ToyFunction::parse(&keys.public_key).unwrap();
        for x in 0..1u64 << kappa {
            let xb = Bits::from_uint(x, kappa);
            let y = f.eval(&xb);
            for b in [false, true] {
                prop_assert!(toy_ntcf_dec(&keys.secret_key, b, &y).unwrap().is_some());
            }
        }
    }
}

/// Sends one message per run and outputs one qubit.
struct OneMessage;

impl Protocol for OneMessage {
    fn id(&self) -> String {
        "one_message".into()
    }
    fn execute(&self, s: &mut Session, _adv: &dyn rspv_lab::protocol::Adversary) -> PResult<StepResult> {
        let q = s.reg("q");
        s.world.alloc_zero(&q, 1, Owner::Server)?;
        s.send(Message::new("hello"));
        Ok(StepResult { flag: FlagValue::Pass, score: None, descriptions: Vec::new(), outputs: vec![q] })
    }
}

#[test]
fn uniform_target_families_weigh_each_description_equally() {
    let e = bb84_family("d", "q").ensemble().unwrap();
    assert_eq!(e.branches().len(), 4);
    for b in e.branches() {
        assert!((b.weight - 0.25).abs() < 1e-12);
    }
}

#[test]
fn roav_specs_must_be_complete() {
    for spec in [RoavSpec::computational(2), RoavSpec::bells(1)] {
        let d = 1usize << spec.input_width;
        let mut sum = nalgebra::DMatrix::<C>::zeros(d, d);
        for kraus in &spec.branches {
            for k in kraus {
                sum += k.adjoint() * k;
            }
        }
        assert!(max_abs(&(sum - nalgebra::DMatrix::identity(d, d))) < 1e-9);
    }
    let half = RoavSpec::computational(1).branches[..1].to_vec();
    assert!(RoavSpec::new(half, 1, 1).is_err());
}

#[test]
fn adversary_names_are_unique_and_applicability_is_enforced() {
    let names: Vec<&str> = registry().iter().map(|d| d.name).collect();
    let mut dedup = names.clone();
    dedup.sort();
    dedup.dedup();
    assert_eq!(dedup.len(), names.len());
    let one_block = OneBlock { m: 4, eps: 0.1, kappa: 2 };
    assert!(make_adversary("parity-liar", &Params::new()).is_ok());
    assert!(make_adversary_for("parity-liar", &Params::new(), &one_block).is_err());
    assert!(make_adversary_for("honest", &Params::new(), &one_block).is_ok());
}
