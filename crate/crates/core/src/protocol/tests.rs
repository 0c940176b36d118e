use super::*;
use crate::qsim::{gates, Basis, Bits, CqEnsemble, PureBranch, RegisterLayout, SparseState, C64};

fn plus() -> SparseState {
    let [a, b] = gates::plus_theta(0);
    SparseState::from_amplitudes(1, [(0, a), (1, b)])
}

fn empty_initial() -> CqEnsemble {
    CqEnsemble::pure(RegisterLayout::new(), SparseState::zero(0)).unwrap()
}

/// Delivers |+_θ⟩ and asks for a rotated measurement at φ.
struct Probe {
    theta: i64,
    phi: u8,
}

impl Protocol for Probe {
    fn id(&self) -> String {
        "probe".into()
    }
    fn execute(&self, s: &mut Session, adv: &dyn Adversary) -> Result<StepResult> {
        let q = s.reg("q");
        let [a, b] = gates::plus_theta(self.theta);
        s.world.alloc(&q, SparseState::from_amplitudes(1, [(0, a), (1, b)]), Owner::Server)?;
        s.set_client("theta", Bits::from_uint(self.theta as u64, 3))?;
        s.send(Message::new("phi").number(self.phi as u64));
        let ctx = s.ctx("answer");
        let r = adv.rotated_answer(&ctx, &mut s.view(), &q, self.phi)?;
        s.reply(Message::new("r").number(r as u64));
        Ok(StepResult {
            flag: FlagValue::from_pass(!r),
            score: None,
            descriptions: vec!["theta".into()],
            outputs: vec![q],
        })
    }
}

struct Snoop;

impl Adversary for Snoop {
    fn name(&self) -> String {
        "snoop".into()
    }
    fn rotated_answer(&self, _ctx: &HookCtx, view: &mut ServerView, _q: &str, _phi: u8) -> Result<bool> {
        view.read_client("theta").map(|b| b.get(0))
    }
}

#[test]
fn world_measure_splits_and_discard_is_exact() {
    let mut w = World::new();
    let mut src = OutcomeSource::sampled(3);
    w.alloc_zero("a", 1, Owner::Server).unwrap();
    w.alloc_zero("b", 1, Owner::Server).unwrap();
    w.apply_gate(&[("a", 0)], &gates::h()).unwrap();
    w.apply_gate(&[("a", 0), ("b", 0)], &gates::cnot()).unwrap();
    assert_eq!(w.largest_factor(), 2);
    let ra = w.measure(&["a"], Basis::Computational, &mut src).unwrap();
    assert_eq!(w.largest_factor(), 1);
    let sb = w.pure_state(&["b"]).unwrap().unwrap();
    assert!((sb.amplitude(ra.get(0) as u128).norm() - 1.0).abs() < 1e-12);
    w.discard("a", &mut src).unwrap();
    assert!(!w.contains("a"));
}

#[test]
fn discarding_entangled_half_leaves_mixed_state() {
    let mut w = World::new();
    let mut src = OutcomeSource::sampled(5);
    w.alloc_zero("a", 1, Owner::Server).unwrap();
    w.alloc_zero("b", 1, Owner::Server).unwrap();
    w.apply_gate(&[("a", 0)], &gates::h()).unwrap();
    w.apply_gate(&[("a", 0), ("b", 0)], &gates::cnot()).unwrap();
    let rho = w.density(&["b"]).unwrap();
    assert!((rho.entry(0, 0).re - 0.5).abs() < 1e-12 && rho.entry(0, 1).norm() < 1e-12);
    w.discard("a", &mut src).unwrap();
    assert_eq!(w.registers(), vec!["b".to_string()]);
}

#[test]
fn fuse_split_roundtrip() {
    let mut w = World::new();
    w.alloc("x", SparseState::basis(2, 0b01), Owner::Server).unwrap();
    w.alloc("y", SparseState::basis(1, 1), Owner::Server).unwrap();
    w.fuse("xy", &["x", "y"]).unwrap();
    let s = w.pure_state(&["xy"]).unwrap().unwrap();
    // x = "10" (qubit 0 set), y = "1"
    assert!((s.amplitude(0b101).norm() - 1.0).abs() < 1e-12);
    w.split("xy", &[("p".into(), 1), ("q".into(), 2)]).unwrap();
    let q = w.pure_state(&["q"]).unwrap().unwrap();
    assert!((q.amplitude(0b10).norm() - 1.0).abs() < 1e-12);
}

#[test]
fn client_registers_are_write_once() {
    let mut w = World::new();
    w.set_client("k", Bits::zeros(2)).unwrap();
    assert_eq!(w.set_client("k", Bits::zeros(2)), Err(ProtocolError::ClientRegisterRewrite("k".into())));
}

#[test]
fn world_bell_measure_reads_pauli_frame() {
    // X on the first qubit of |Φ⟩ gives (a, b) = (1, 0)
    let mut w = World::new();
    let mut src = OutcomeSource::sampled(1);
    w.alloc_zero("p", 1, Owner::Server).unwrap();
    w.alloc_zero("q", 1, Owner::Server).unwrap();
    w.apply_gate(&[("p", 0)], &gates::h()).unwrap();
    w.apply_gate(&[("p", 0), ("q", 0)], &gates::cnot()).unwrap();
    w.apply_gate(&[("p", 0)], &gates::x()).unwrap();
    assert_eq!(w.measure_bell(("p", 0), ("q", 0), &mut src).unwrap(), (true, false));
}

#[test]
fn zero_round_protocol_passes_with_empty_transcript() {
    let out = run(&EmptyProtocol, &HonestAdversary, &empty_initial(), 0).unwrap();
    assert!(out.flag.is_pass());
    assert!(out.transcript.is_empty());
    assert!((out.project_pass().total_weight() - 1.0).abs() < 1e-12);
}

#[test]
fn honest_probe_passes_and_is_deterministic() {
    let p = Probe { theta: 3, phi: 3 };
    let a = run(&p, &HonestAdversary, &empty_initial(), 11).unwrap();
    let b = run(&p, &HonestAdversary, &empty_initial(), 11).unwrap();
    assert!(a.flag.is_pass());
    assert_eq!(a.transcript, b.transcript);
    assert_eq!(a.final_state, b.final_state);
    assert_eq!(a.transcript.len(), 1);
}

#[test]
fn exact_run_enumerates_born_probabilities() {
    let p = Probe { theta: 1, phi: 0 };
    let ex = run_exact(&p, &HonestAdversary, &empty_initial(), 0, &RunOptions::default()).unwrap();
    assert_eq!(ex.paths.len(), 2);
    let c = (std::f64::consts::PI / 8.0).cos().powi(2);
    assert!((ex.pass_probability() - c).abs() < 1e-12);
    assert!((ex.project_pass().total_weight() - c).abs() < 1e-12);
}

#[test]
fn adversary_cannot_read_client_records() {
    let p = Probe { theta: 0, phi: 0 };
    let e = run(&p, &Snoop, &empty_initial(), 0).unwrap_err();
    assert!(matches!(e, ProtocolError::AdversaryLocality(_)));
}

#[test]
fn environment_registers_are_out_of_reach() {
    let mut w = World::new();
    let mut src = OutcomeSource::sampled(0);
    w.alloc_zero("env", 1, Owner::Environment).unwrap();
    let mut v = ServerView::new(&mut w, &mut src);
    assert!(matches!(v.measure(&["env"], Basis::Computational), Err(ProtocolError::AdversaryLocality(_))));
    assert!(v.registers().is_empty());
}

#[test]
fn project_pass_keeps_weight_of_passing_branches() {
    let layout = RegisterLayout::new().quantum("q", 1).unwrap().classical(FLAG, 1).unwrap();
    let br = |f: FlagValue, w: f64| PureBranch {
        label: [(FLAG.to_string(), f.to_bits())].into(),
        weight: w,
        state: SparseState::zero(1),
    };
    let half = CqEnsemble::new(layout.clone(), vec![br(FlagValue::Pass, 0.5), br(FlagValue::Fail, 0.5)]).unwrap();
    assert!((project_pass(&half).total_weight() - 0.5).abs() < 1e-12);
    let none = CqEnsemble::new(layout, vec![br(FlagValue::Fail, 1.0)]).unwrap();
    assert!(project_pass(&none).branches().is_empty());
}

#[test]
fn honest_run_matches_identity_simulation() {
    // Deliver a uniformly random |+_θ⟩ with θ ∈ {0, 4} and check nothing.
    struct Deliver;
    impl Protocol for Deliver {
        fn id(&self) -> String {
            "deliver".into()
        }
        fn execute(&self, s: &mut Session, _adv: &dyn Adversary) -> Result<StepResult> {
            let t = s.client_uniform(2) as i64 * 4;
            let [a, b] = gates::plus_theta(t);
            s.world.alloc("q", SparseState::from_amplitudes(1, [(0, a), (1, b)]), Owner::Server)?;
            s.set_client("d", Bits::from_uint(t as u64 / 4, 1))?;
            Ok(StepResult { flag: FlagValue::Pass, score: None, descriptions: vec!["d".into()], outputs: vec!["q".into()] })
        }
    }
    let opts = RunOptions { enumerate_client: true, ..RunOptions::default() };
    let ex = run_exact(&Deliver, &HonestAdversary, &empty_initial(), 0, &opts).unwrap();
    let minus = {
        let mut m = plus();
        m.apply_matrix(&[0], &gates::z()).unwrap();
        m
    };
    let target = TargetState::uniform("pm", "d", "q", vec![(Bits::from_uint(0, 1), plus()), (Bits::from_uint(1, 1), minus)]).unwrap();
    let d = compare_to_simulated(&ex.project_pass(), &target, &IdentitySimulator, &empty_initial()).unwrap();
    assert!(d < 1e-9, "{d}");
    // a simulator that rewrites descriptions is rejected
    struct Cheat;
    impl Simulator for Cheat {
        fn name(&self) -> String {
            "cheat".into()
        }
        fn simulate(&self, ideal: &CqEnsemble) -> Result<CqEnsemble> {
            with_label(ideal, "d", &Bits::from_uint(1, 1))
        }
    }
    assert_eq!(
        compare_to_simulated(&ex.project_pass(), &target, &Cheat, &empty_initial()),
        Err(ProtocolError::SimulatorTouchesClientRegisters)
    );
}

#[test]
fn message_fields_roundtrip() {
    let m = Message::new("tag").bits(&"0110".parse().unwrap()).number(7);
    let f = Message::fields(m.bytes()).unwrap();
    assert_eq!(f[0], b"tag");
    assert_eq!(f[1], b"0110");
    assert_eq!(u64::from_le_bytes(f[2].clone().try_into().unwrap()), 7);
    let _ = C64::new(0.0, 0.0);
}
