use nalgebra::DMatrix;

use crate::protocol::{Adversary, Chooser, FlagValue, Message, Result as PResult, Session, World};
use crate::qsim::{gates, Bits, CqEnsemble, PureBranch, RegKind, RegisterLayout, C64};

use super::FunctionalityError;

/// A POVM given by Kraus maps: outcome i applies one of `branches[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoavSpec {
    pub branches: Vec<Vec<DMatrix<C64>>>,
    pub input_width: usize,
    pub output_width: usize,
}

impl RoavSpec {
    /// Checks shapes and Σ K†K = I.
    pub fn new(branches: Vec<Vec<DMatrix<C64>>>, input_width: usize, output_width: usize) -> Result<Self, FunctionalityError> {
        let (din, dout) = (1usize << input_width, 1usize << output_width);
        let mut sum = DMatrix::<C64>::zeros(din, din);
        for b in &branches {
            for k in b {
                if k.nrows() != dout || k.ncols() != din {
                    return Err(FunctionalityError::IncompletePovm(format!(
                        "Kraus map is {}×{}, expected {dout}×{din}",
                        k.nrows(),
                        k.ncols()
                    )));
                }
                sum += k.adjoint() * k;
            }
        }
        let dev = (sum - DMatrix::<C64>::identity(din, din)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > 1e-9 {
            return Err(FunctionalityError::IncompletePovm(format!("Σ K†K deviates from identity by {dev:.3e}")));
        }
        Ok(Self { branches, input_width, output_width })
    }

    pub fn outcomes(&self) -> usize {
        self.branches.len()
    }

    /// Bits needed to record an outcome.
    pub fn record_width(&self) -> usize {
        (usize::BITS - (self.outcomes().max(2) - 1).leading_zeros()) as usize
    }

    /// Computational-basis measurement keeping the post-measurement state.
    pub fn computational(width: usize) -> Self {
        let d = 1usize << width;
        let branches = (0..d)
            .map(|i| {
                let mut p = DMatrix::<C64>::zeros(d, d);
                p[(i, i)] = C64::new(1.0, 0.0);
                vec![p]
            })
            .collect();
        Self::new(branches, width, width).expect("projective measurement is complete")
    }

    /// Bell-basis measurement of `pairs` qubit pairs; input order
    /// (p1, q1, p2, q2, …), outcome bits (a1, b1, a2, b2, …) MSB first for
    /// X^a Z^b |Φ⟩ with the Pauli on the first qubit of each pair.
    pub fn bells(pairs: usize) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = |a: usize, b: usize| {
            let mut v = DMatrix::<C64>::zeros(4, 1);
            v[(0, 0)] = C64::new(s, 0.0);
            v[(3, 0)] = C64::new(s, 0.0);
            let mut p = gates::identity(1);
            if b == 1 {
                p = gates::z() * p;
            }
            if a == 1 {
                p = gates::x() * p;
            }
            gates::kron(&p, &gates::identity(1)) * v
        };
        let mut branches = Vec::new();
        for i in 0..(1usize << (2 * pairs)) {
            let mut k = DMatrix::<C64>::from_element(1, 1, C64::new(1.0, 0.0));
            for t in 0..pairs {
                let a = (i >> (2 * (pairs - 1 - t) + 1)) & 1;
                let b = (i >> (2 * (pairs - 1 - t))) & 1;
                k = gates::kron(&k, &bell(a, b).adjoint());
            }
            branches.push(vec![k]);
        }
        Self::new(branches, 2 * pairs, 0).expect("Bell basis is complete")
    }
}

/// Applies the ideal ROAV to the `inputs` registers of every branch. The
/// outcome is written to client record `record`; inputs are replaced by an
/// `output` register of the spec's output width (none if zero).
pub fn ideal_roav_apply(
    spec: &RoavSpec,
    ens: &CqEnsemble,
    inputs: &[&str],
    output: &str,
    record: &str,
) -> Result<CqEnsemble, FunctionalityError> {
    let mut qubits = Vec::new();
    for r in inputs {
        qubits.extend(ens.qubits_of(r)?);
    }
    if qubits.len() != spec.input_width {
        return Err(FunctionalityError::WidthMismatch { expected: spec.input_width, got: qubits.len() });
    }
    let mut layout = RegisterLayout::with_max(ens.layout().max_quantum());
    for e in ens.layout().entries() {
        if e.kind == RegKind::Quantum && !inputs.contains(&e.name.as_str()) {
            layout.push(&e.name, RegKind::Quantum, e.width)?;
        }
    }
    if spec.output_width > 0 {
        layout.push(output, RegKind::Quantum, spec.output_width)?;
    }
    for e in ens.layout().entries() {
        if e.kind == RegKind::Classical {
            layout.push(&e.name, RegKind::Classical, e.width)?;
        }
    }
    let rw = spec.record_width();
    layout.push(record, RegKind::Classical, rw)?;
    let mut branches = Vec::new();
    for b in ens.branches() {
        for (i, ks) in spec.branches.iter().enumerate() {
            for k in ks {
                let mut st = b.state.apply_map(&qubits, spec.output_width, k)?;
                let p = st.norm_sqr();
                if p * b.weight < crate::qsim::BRANCH_PRUNE {
                    continue;
                }
                st.normalize();
                let mut label = b.label.clone();
                label.insert(record.into(), Bits::from_uint(i as u64, rw));
                branches.push(PureBranch { label, weight: b.weight * p, state: st });
            }
        }
    }
    Ok(CqEnsemble::new(layout, branches)?)
}

/// The ideal ROAV inside a running world; returns the outcome index.
pub fn roav_apply_world(
    world: &mut World,
    ch: &mut dyn Chooser,
    spec: &RoavSpec,
    inputs: &[&str],
    output: &str,
) -> PResult<usize> {
    // flatten Kraus lists, remembering which outcome each map belongs to
    let mut maps = Vec::new();
    let mut owner = Vec::new();
    for (i, ks) in spec.branches.iter().enumerate() {
        for k in ks {
            maps.push(k.clone());
            owner.push(i);
        }
    }
    let out = (spec.output_width > 0).then_some(output);
    let j = world.apply_instrument(inputs, out, spec.output_width, &maps, ch)?;
    Ok(owner[j])
}

/// One call to the ideal ROAV inside a session: the server may abort;
/// otherwise the POVM is applied to `inputs` and the outcome index is written
/// to client record `record`. Returns the flag.
pub fn ideal_roav(
    s: &mut Session,
    adv: &dyn Adversary,
    spec: &RoavSpec,
    inputs: &[&str],
    output: &str,
    record: &str,
) -> PResult<FlagValue> {
    s.send(Message::new("roav"));
    let ctx = s.ctx("ideal-abort");
    let abort = adv.ideal_abort(&ctx, &mut s.view())?;
    s.reply(Message::new("bit").number(abort as u64));
    if abort {
        return Ok(FlagValue::Fail);
    }
    let out = s.reg(output);
    let (w, ch) = s.world_and_outcomes();
    let i = roav_apply_world(w, ch, spec, inputs, &out)?;
    s.set_client(record, Bits::from_uint(i as u64, spec.record_width()))?;
    if spec.output_width > 0 {
        let ctx = s.ctx("delivery");
        adv.after_delivery(&ctx, &mut s.view(), std::slice::from_ref(&out))?;
    }
    Ok(FlagValue::Pass)
}
