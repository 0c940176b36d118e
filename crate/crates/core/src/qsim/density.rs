use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::DMatrix;

use super::state::{gather, sub_index, SparseState};
use super::{QsimError, C64};

/// Density operator on `width` qubits, stored on the span of `basis`
/// (indices in tensor order). Entries outside the span are zero.
#[derive(Clone, Debug)]
pub struct DensityView {
    width: usize,
    basis: Vec<u128>,
    matrix: DMatrix<C64>,
}

impl DensityView {
    /// Full dense matrix of dimension 2^width.
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self, QsimError> {
        let d = m.nrows();
        if d != m.ncols() || !d.is_power_of_two() {
            return Err(QsimError::DimensionMismatch { left: m.nrows(), right: m.ncols() });
        }
        Ok(DensityView { width: d.trailing_zeros() as usize, basis: (0..d as u128).collect(), matrix: m })
    }

    pub fn from_pure(state: &SparseState) -> Self {
        let sel: Vec<usize> = (0..state.num_qubits()).collect();
        Self::reduce([(1.0, state)], &sel)
    }

    /// Σ w |ψ⟩⟨ψ| traced down to `sel` (the first listed qubit is leftmost).
    pub fn reduce<'a>(branches: impl IntoIterator<Item = (f64, &'a SparseState)>, sel: &[usize]) -> Self {
        let mut groups: Vec<(f64, Vec<(u128, C64)>)> = Vec::new();
        let mut basis_set = BTreeSet::new();
        for (w, st) in branches {
            if w == 0.0 {
                continue;
            }
            let rest: Vec<usize> = (0..st.num_qubits()).filter(|q| !sel.contains(q)).collect();
            let mut by_env: BTreeMap<u128, Vec<(u128, C64)>> = BTreeMap::new();
            for (k, a) in st.iter() {
                let s = sub_index(k, sel) as u128;
                basis_set.insert(s);
                by_env.entry(gather(k, &rest)).or_default().push((s, a));
            }
            for (_, v) in by_env {
                groups.push((w, v));
            }
        }
        let basis: Vec<u128> = basis_set.into_iter().collect();
        let pos: HashMap<u128, usize> = basis.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let d = basis.len();
        let mut m = DMatrix::<C64>::zeros(d, d);
        for (w, v) in groups {
            for &(i, a) in &v {
                for &(j, b) in &v {
                    m[(pos[&i], pos[&j])] += a * b.conj() * w;
                }
            }
        }
        DensityView { width: sel.len(), basis, matrix: m }
    }

    pub fn zero(width: usize) -> Self {
        DensityView { width, basis: Vec::new(), matrix: DMatrix::zeros(0, 0) }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn basis(&self) -> &[u128] {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn entry(&self, i: u128, j: u128) -> C64 {
        match (self.basis.binary_search(&i), self.basis.binary_search(&j)) {
            (Ok(a), Ok(b)) => self.matrix[(a, b)],
            _ => C64::new(0.0, 0.0),
        }
    }

    /// Full 2^width matrix; only for small widths.
    pub fn to_dense(&self) -> DMatrix<C64> {
        assert!(self.width <= 12, "dense density limited to 12 qubits");
        self.embed(&(0..1u128 << self.width).collect::<Vec<_>>())
    }

    fn embed(&self, basis: &[u128]) -> DMatrix<C64> {
        let pos: HashMap<u128, usize> = basis.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let mut m = DMatrix::zeros(basis.len(), basis.len());
        for (a, &i) in self.basis.iter().enumerate() {
            for (b, &j) in self.basis.iter().enumerate() {
                m[(pos[&i], pos[&j])] = self.matrix[(a, b)];
            }
        }
        m
    }

    fn union_basis(&self, other: &DensityView) -> Vec<u128> {
        let s: BTreeSet<u128> = self.basis.iter().chain(&other.basis).copied().collect();
        s.into_iter().collect()
    }

    pub fn add(&self, other: &DensityView) -> Result<DensityView, QsimError> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &DensityView) -> Result<DensityView, QsimError> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &DensityView, sign: f64) -> Result<DensityView, QsimError> {
        if self.width != other.width {
            return Err(QsimError::DimensionMismatch { left: self.width, right: other.width });
        }
        let basis = self.union_basis(other);
        let m = self.embed(&basis) + other.embed(&basis) * C64::new(sign, 0.0);
        Ok(DensityView { width: self.width, basis, matrix: m })
    }

    pub fn scaled(&self, f: f64) -> DensityView {
        DensityView { width: self.width, basis: self.basis.clone(), matrix: &self.matrix * C64::new(f, 0.0) }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.basis.is_empty() {
            return Vec::new();
        }
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (&self.matrix - self.matrix.adjoint()).iter().all(|e| e.norm() <= tol)
    }

    /// Hermitian, PSD and trace ≤ 1 within the given tolerance.
    pub fn is_valid(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && self.trace() <= 1.0 + tol && self.eigenvalues().iter().all(|&e| e >= -tol)
    }

    /// ⟨ψ|ρ|ψ⟩.
    pub fn expectation_pure(&self, psi: &SparseState) -> Result<f64, QsimError> {
        if psi.num_qubits() != self.width {
            return Err(QsimError::DimensionMismatch { left: psi.num_qubits(), right: self.width });
        }
        let sel: Vec<usize> = (0..self.width).collect();
        let amp: HashMap<u128, C64> = psi.iter().map(|(k, a)| (sub_index(k, &sel) as u128, a)).collect();
        let mut s = C64::new(0.0, 0.0);
        for (a, i) in self.basis.iter().enumerate() {
            for (b, j) in self.basis.iter().enumerate() {
                if let (Some(x), Some(y)) = (amp.get(i), amp.get(j)) {
                    s += x.conj() * self.matrix[(a, b)] * y;
                }
            }
        }
        Ok(s.re)
    }
}

/// ½ Σ |eigenvalues(a − b)|.
pub fn trace_distance(a: &DensityView, b: &DensityView) -> Result<f64, QsimError> {
    let d = a.sub(b)?;
    Ok(0.5 * d.eigenvalues().iter().map(|e| e.abs()).sum::<f64>())
}
