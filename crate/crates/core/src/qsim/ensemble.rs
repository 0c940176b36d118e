use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::density::{trace_distance, DensityView};
use super::layout::{RegKind, RegisterLayout};
use super::state::{sub_index, SparseState};
use super::{gates, Bits, QsimError, C64};

/// Branches whose weight falls below this are dropped.
pub const BRANCH_PRUNE: f64 = 1e-12;

pub type Labels = BTreeMap<String, Bits>;

#[derive(Clone, Debug, PartialEq)]
pub struct PureBranch {
    pub label: Labels,
    pub weight: f64,
    pub state: SparseState,
}

/// Single-qubit measurement bases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    Computational,
    Hadamard,
    /// {|+_φ⟩, |+_{φ+4}⟩}, φ in units of π/4.
    Rotated(u8),
}

impl Basis {
    pub fn rotated(phi: i64) -> Basis {
        Basis::Rotated(phi.rem_euclid(8) as u8)
    }

    /// Accepts only multiples of π/4.
    pub fn rotated_angle(radians: f64) -> Result<Basis, QsimError> {
        let k = radians / (std::f64::consts::PI / 4.0);
        if (k - k.round()).abs() > 1e-9 {
            return Err(QsimError::BadAngle(radians));
        }
        Ok(Basis::rotated(k.round() as i64))
    }

    /// Unitary taking the basis to the computational basis, if any.
    fn to_computational(self) -> Option<DMatrix<C64>> {
        match self {
            Basis::Computational => None,
            Basis::Hadamard => Some(gates::h()),
            Basis::Rotated(phi) => Some(gates::rotated_to_computational(phi as i64)),
        }
    }
}

/// Classical-quantum state: weighted pure branches with classical labels.
#[derive(Clone, Debug, PartialEq)]
pub struct CqEnsemble {
    layout: RegisterLayout,
    branches: Vec<PureBranch>,
}

impl CqEnsemble {
    pub fn new(layout: RegisterLayout, branches: Vec<PureBranch>) -> Result<Self, QsimError> {
        let w = layout.quantum_width();
        let mut total = 0.0;
        for b in &branches {
            if b.state.num_qubits() != w {
                return Err(QsimError::DimensionMismatch { left: b.state.num_qubits(), right: w });
            }
            if !b.state.is_normalized(1e-10) {
                return Err(QsimError::BadLayout("branch state not normalized".into()));
            }
            if !(0.0..=1.0 + 1e-12).contains(&b.weight) {
                return Err(QsimError::BadLayout(format!("branch weight {} out of range", b.weight)));
            }
            for (name, v) in &b.label {
                match layout.entry(name) {
                    Some(e) if e.kind == RegKind::Classical && e.width == v.len() => {}
                    Some(e) => {
                        return Err(QsimError::WidthMismatch { register: name.clone(), expected: e.width, got: v.len() })
                    }
                    None => return Err(QsimError::UnknownRegister(name.clone())),
                }
            }
            total += b.weight;
        }
        if total > 1.0 + 1e-9 {
            return Err(QsimError::BadLayout(format!("total weight {total} exceeds 1")));
        }
        let mut e = CqEnsemble { layout, branches };
        e.canonicalize();
        Ok(e)
    }

    pub fn pure(layout: RegisterLayout, state: SparseState) -> Result<Self, QsimError> {
        Self::new(layout, vec![PureBranch { label: Labels::new(), weight: 1.0, state }])
    }

    pub fn empty(layout: RegisterLayout) -> Self {
        CqEnsemble { layout, branches: Vec::new() }
    }

    fn canonicalize(&mut self) {
        self.branches.retain(|b| b.weight >= BRANCH_PRUNE);
        for b in &mut self.branches {
            b.state.normalize_phase();
        }
    }

    /// Declares an (empty) classical record in the layout.
    pub fn with_record(mut self, name: &str, width: usize) -> Result<Self, QsimError> {
        self.layout.push(name, RegKind::Classical, width)?;
        Ok(self)
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn branches(&self) -> &[PureBranch] {
        &self.branches
    }

    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|b| b.weight).sum()
    }

    pub fn qubits_of(&self, reg: &str) -> Result<Vec<usize>, QsimError> {
        self.layout.qubits_of(reg)
    }

    /// Sub-ensemble of branches satisfying `keep`; weights are not renormalized.
    pub fn project(&self, keep: impl Fn(&Labels) -> bool) -> CqEnsemble {
        CqEnsemble {
            layout: self.layout.clone(),
            branches: self.branches.iter().filter(|b| keep(&b.label)).cloned().collect(),
        }
    }

    /// Probability of each value of a classical register (branches lacking it are skipped).
    pub fn label_distribution(&self, reg: &str) -> BTreeMap<Bits, f64> {
        let mut d = BTreeMap::new();
        for b in &self.branches {
            if let Some(v) = b.label.get(reg) {
                *d.entry(v.clone()).or_insert(0.0) += b.weight;
            }
        }
        d
    }

    /// Product ensemble; `other`'s registers follow this ensemble's.
    pub fn tensor(&self, other: &CqEnsemble) -> Result<CqEnsemble, QsimError> {
        let layout = self.layout.concat(&other.layout)?;
        let mut branches = Vec::new();
        for a in &self.branches {
            for b in &other.branches {
                let mut label = a.label.clone();
                label.extend(b.label.clone());
                branches.push(PureBranch { label, weight: a.weight * b.weight, state: a.state.tensor(&b.state)? });
            }
        }
        Ok(CqEnsemble { layout, branches })
    }

    fn check_record(&self, reg: &str, width: usize) -> Result<(), QsimError> {
        match self.layout.entry(reg) {
            Some(e) if e.kind == RegKind::Classical && e.width == width => {}
            Some(e) => return Err(QsimError::WidthMismatch { register: reg.into(), expected: e.width, got: width }),
            None => return Err(QsimError::UnknownRegister(reg.into())),
        }
        if self.branches.iter().any(|b| b.label.contains_key(reg)) {
            return Err(QsimError::AlreadyWritten(reg.into()));
        }
        Ok(())
    }

    fn check_indices(&self, qubits: &[usize]) -> Result<(), QsimError> {
        let w = self.layout.quantum_width();
        for &q in qubits {
            if q >= w {
                return Err(QsimError::IndexOutOfRange { index: q, width: w });
            }
        }
        Ok(())
    }

    pub fn apply_unitary(&self, qubits: &[usize], gate: &DMatrix<C64>) -> Result<CqEnsemble, QsimError> {
        if !gates::is_unitary(gate, 1e-10) {
            return Err(QsimError::NonUnitaryGate);
        }
        self.check_indices(qubits)?;
        let mut out = self.clone();
        for b in &mut out.branches {
            b.state.apply_matrix(qubits, gate)?;
        }
        out.canonicalize();
        Ok(out)
    }

    /// Generic projective measurement: rotate, read `outcome` of the basis
    /// index, project, rotate back.
    fn measure_generic(
        &self,
        rotations: &[(Vec<usize>, DMatrix<C64>)],
        outcome: impl Fn(u128) -> u64,
        record_into: &str,
        width: usize,
    ) -> Result<CqEnsemble, QsimError> {
        self.check_record(record_into, width)?;
        let mut branches = Vec::new();
        for b in &self.branches {
            let mut st = b.state.clone();
            for (q, u) in rotations {
                st.apply_matrix(q, u)?;
            }
            for (o, p) in st.distribution(&outcome) {
                let w = b.weight * p;
                if w < BRANCH_PRUNE {
                    continue;
                }
                let mut post = st.project(|k| outcome(k) == o);
                post.normalize();
                for (q, u) in rotations.iter().rev() {
                    post.apply_matrix(q, &u.adjoint())?;
                }
                let mut label = b.label.clone();
                label.insert(record_into.to_string(), Bits::from_uint(o, width));
                branches.push(PureBranch { label, weight: w, state: post });
            }
        }
        let mut out = CqEnsemble { layout: self.layout.clone(), branches };
        out.canonicalize();
        Ok(out)
    }

    /// Measures each listed qubit in `basis`; bit j of the record is qubit `qubits[j]`.
    pub fn measure_basis(&self, qubits: &[usize], basis: Basis, record_into: &str) -> Result<CqEnsemble, QsimError> {
        self.check_indices(qubits)?;
        let rot: Vec<(Vec<usize>, DMatrix<C64>)> = match basis.to_computational() {
            None => Vec::new(),
            Some(u) => qubits.iter().map(|&q| (vec![q], u.clone())).collect(),
        };
        let qs = qubits.to_vec();
        self.measure_generic(&rot, move |k| sub_index(k, &qs) as u64, record_into, qubits.len())
    }

    /// Bell measurement of each pair; pair t writes (a_t, b_t) at record
    /// positions 2t and 2t+1 (0-based) for outcome X^a Z^b |Φ⟩ with the
    /// Pauli acting on the first qubit of the pair.
    pub fn measure_bell(&self, pairs: &[(usize, usize)], record_into: &str) -> Result<CqEnsemble, QsimError> {
        let mut seen: Vec<usize> = Vec::new();
        for &(p, q) in pairs {
            if p == q || seen.contains(&p) || seen.contains(&q) {
                return Err(QsimError::OverlappingPairs);
            }
            seen.push(p);
            seen.push(q);
        }
        self.check_indices(&seen)?;
        let mut rot = Vec::new();
        let mut order = Vec::new();
        for &(p, q) in pairs {
            rot.push((vec![p, q], gates::cnot()));
            rot.push((vec![p], gates::h()));
            order.push(q);
            order.push(p);
        }
        self.measure_generic(&rot, move |k| sub_index(k, &order) as u64, record_into, 2 * pairs.len())
    }

    /// Projects onto even/odd parity of the listed qubits; one record bit.
    pub fn measure_parity(&self, qubits: &[usize], record_into: &str) -> Result<CqEnsemble, QsimError> {
        self.check_indices(qubits)?;
        let mask = qubits.iter().fold(0u128, |m, &q| m | 1u128 << q);
        self.measure_generic(&[], move |k| ((k & mask).count_ones() % 2) as u64, record_into, 1)
    }

    /// Reduced (sub-normalized when `condition` is given) density operator of
    /// the listed quantum registers.
    pub fn density_of(&self, registers: &[&str], condition: Option<&dyn Fn(&Labels) -> bool>) -> Result<DensityView, QsimError> {
        if registers.is_empty() {
            return Err(QsimError::EmptySelection);
        }
        let mut sel = Vec::new();
        for r in registers {
            sel.extend(self.layout.qubits_of(r)?);
        }
        let it = self
            .branches
            .iter()
            .filter(|b| condition.map_or(true, |c| c(&b.label)))
            .map(|b| (b.weight, &b.state));
        Ok(DensityView::reduce(it, &sel))
    }

    /// Density of all quantum registers restricted to branches carrying `labels`
    /// on the listed classical registers.
    fn block(&self, classical: &[String], key: &[Option<Bits>]) -> DensityView {
        let sel: Vec<usize> = (0..self.layout.quantum_width()).collect();
        let it = self
            .branches
            .iter()
            .filter(|b| classical.iter().zip(key).all(|(c, v)| b.label.get(c) == v.as_ref()))
            .map(|b| (b.weight, &b.state));
        DensityView::reduce(it, &sel)
    }

    fn label_keys(&self, classical: &[String]) -> Vec<Vec<Option<Bits>>> {
        let mut keys: Vec<Vec<Option<Bits>>> =
            self.branches.iter().map(|b| classical.iter().map(|c| b.label.get(c).cloned()).collect()).collect();
        keys.sort();
        keys.dedup();
        keys
    }
}

/// Trace distance between two cq-states over every register: classical labels
/// are orthogonal blocks, quantum registers must agree in layout.
pub fn cq_trace_distance(a: &CqEnsemble, b: &CqEnsemble) -> Result<f64, QsimError> {
    let qa: Vec<(String, usize)> =
        a.layout.entries().iter().filter(|e| e.kind == RegKind::Quantum).map(|e| (e.name.clone(), e.width)).collect();
    let qb: Vec<(String, usize)> =
        b.layout.entries().iter().filter(|e| e.kind == RegKind::Quantum).map(|e| (e.name.clone(), e.width)).collect();
    if qa != qb {
        return Err(QsimError::BadLayout("quantum registers differ between ensembles".into()));
    }
    let mut classical: Vec<String> = a.layout.classical_names();
    for c in b.layout.classical_names() {
        if !classical.contains(&c) {
            classical.push(c);
        }
    }
    let mut keys = a.label_keys(&classical);
    keys.extend(b.label_keys(&classical));
    keys.sort();
    keys.dedup();
    let mut total = 0.0;
    for k in keys {
        total += trace_distance(&a.block(&classical, &k), &b.block(&classical, &k))?;
    }
    Ok(total)
}
