use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{QsimError, C64};

/// Largest number of qubits a single sparse state can address.
pub const MAX_SPARSE_QUBITS: usize = 128;

/// Amplitudes below this magnitude are treated as exact zeros.
pub const AMP_EPS: f64 = 1e-12;

/// Pure state over `n` qubits stored as a sorted map from basis index to amplitude.
///
/// Bit `q` of a basis index is the value of qubit `q`. Dense vectors and matrices
/// use the opposite order (qubit 0 is the most significant, i.e. the leftmost
/// tensor factor); see [`SparseState::from_dense`] and [`SparseState::to_dense`].
#[derive(Clone, Debug, PartialEq)]
pub struct SparseState {
    n: usize,
    amps: BTreeMap<u128, C64>,
}

/// Value of qubits `qubits` read as an integer, `qubits[0]` most significant.
pub fn sub_index(key: u128, qubits: &[usize]) -> usize {
    let mut out = 0usize;
    for &q in qubits {
        out = (out << 1) | ((key >> q) & 1) as usize;
    }
    out
}

/// Writes `value` (most significant bit first) into the positions `qubits` of `key`.
pub fn deposit(key: u128, qubits: &[usize], value: usize) -> u128 {
    let k = qubits.len();
    let mut key = key;
    for (j, &q) in qubits.iter().enumerate() {
        let bit = (value >> (k - 1 - j)) & 1;
        key = (key & !(1u128 << q)) | ((bit as u128) << q);
    }
    key
}

/// Collects bit `positions[j]` of `key` into bit `j` of the result.
pub fn gather(key: u128, positions: &[usize]) -> u128 {
    let mut out = 0u128;
    for (j, &q) in positions.iter().enumerate() {
        out |= ((key >> q) & 1) << j;
    }
    out
}

fn mask_of(qubits: &[usize]) -> u128 {
    qubits.iter().fold(0u128, |m, &q| m | (1u128 << q))
}

impl SparseState {
    /// |0…0⟩ on `n` qubits.
    pub fn zero(n: usize) -> Self {
        Self::basis(n, 0)
    }

    pub fn basis(n: usize, key: u128) -> Self {
        assert!(n <= MAX_SPARSE_QUBITS, "too many qubits");
        let mut amps = BTreeMap::new();
        amps.insert(key, C64::new(1.0, 0.0));
        SparseState { n, amps }
    }

    /// Builds a state from amplitude pairs; the result is not normalized.
    pub fn from_amplitudes(n: usize, entries: impl IntoIterator<Item = (u128, C64)>) -> Self {
        let mut amps = BTreeMap::new();
        for (k, a) in entries {
            *amps.entry(k).or_insert(C64::new(0.0, 0.0)) += a;
        }
        let mut s = SparseState { n, amps };
        s.prune();
        s
    }

    /// Dense vector in tensor order (qubit 0 leftmost).
    pub fn from_dense(v: &[C64]) -> Result<Self, QsimError> {
        let n = v.len().trailing_zeros() as usize;
        if v.len() != 1usize << n {
            return Err(QsimError::DimensionMismatch { left: v.len(), right: 1 << n });
        }
        let qubits: Vec<usize> = (0..n).collect();
        let entries = v
            .iter()
            .enumerate()
            .map(|(i, &a)| (deposit(0, &qubits, i), a))
            .collect::<Vec<_>>();
        Ok(Self::from_amplitudes(n, entries))
    }

    /// Dense vector in tensor order (qubit 0 leftmost). Only for small states.
    pub fn to_dense(&self) -> Vec<C64> {
        assert!(self.n <= 24, "dense view limited to 24 qubits");
        let qubits: Vec<usize> = (0..self.n).collect();
        let mut v = vec![C64::new(0.0, 0.0); 1 << self.n];
        for (&k, &a) in &self.amps {
            v[sub_index(k, &qubits)] = a;
        }
        v
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn support_len(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitude(&self, key: u128) -> C64 {
        self.amps.get(&key).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (u128, C64)> + '_ {
        self.amps.iter().map(|(&k, &a)| (k, a))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            for a in self.amps.values_mut() {
                *a /= n;
            }
        }
    }

    pub fn scale(&mut self, c: C64) {
        for a in self.amps.values_mut() {
            *a *= c;
        }
        self.prune();
    }

    fn prune(&mut self) {
        self.amps.retain(|_, a| a.norm() > AMP_EPS);
    }

    /// Multiplies by a global phase so the first nonzero amplitude is real and positive.
    pub fn normalize_phase(&mut self) {
        if let Some(a) = self.amps.values().next().copied() {
            let ph = a.conj() / a.norm();
            for v in self.amps.values_mut() {
                *v *= ph;
            }
        }
    }

    fn check_qubits(&self, qubits: &[usize]) -> Result<(), QsimError> {
        for (i, &q) in qubits.iter().enumerate() {
            if q >= self.n {
                return Err(QsimError::IndexOutOfRange { index: q, width: self.n });
            }
            if qubits[..i].contains(&q) {
                return Err(QsimError::OverlappingPairs);
            }
        }
        Ok(())
    }

    /// Applies a 2^k × 2^k matrix to `qubits` (first listed qubit is the leftmost factor).
    /// The matrix need not be unitary; callers check unitarity where required.
    pub fn apply_matrix(&mut self, qubits: &[usize], u: &DMatrix<C64>) -> Result<(), QsimError> {
        self.check_qubits(qubits)?;
        let dim = 1usize << qubits.len();
        if u.nrows() != dim || u.ncols() != dim {
            return Err(QsimError::DimensionMismatch { left: u.nrows(), right: dim });
        }
        let mask = mask_of(qubits);
        let mut out: BTreeMap<u128, C64> = BTreeMap::new();
        for (&key, &amp) in &self.amps {
            let col = sub_index(key, qubits);
            let base = key & !mask;
            for row in 0..dim {
                let c = u[(row, col)];
                if c.re == 0.0 && c.im == 0.0 {
                    continue;
                }
                let nk = deposit(base, qubits, row);
                *out.entry(nk).or_insert(C64::new(0.0, 0.0)) += c * amp;
            }
        }
        self.amps = out;
        self.prune();
        Ok(())
    }

    /// Replaces `qubits` (in order) by an output register of `out_width` qubits
    /// through a 2^out × 2^in matrix. The output qubits are appended at the end
    /// and the input qubits removed; returns the new state.
    pub fn apply_map(&self, qubits: &[usize], out_width: usize, k: &DMatrix<C64>) -> Result<SparseState, QsimError> {
        self.check_qubits(qubits)?;
        let din = 1usize << qubits.len();
        let dout = 1usize << out_width;
        if k.ncols() != din || k.nrows() != dout {
            return Err(QsimError::DimensionMismatch { left: k.ncols(), right: din });
        }
        let rest: Vec<usize> = (0..self.n).filter(|q| !qubits.contains(q)).collect();
        let new_n = rest.len() + out_width;
        if new_n > MAX_SPARSE_QUBITS {
            return Err(QsimError::TooManyQubits { requested: new_n, max: MAX_SPARSE_QUBITS });
        }
        let out_pos: Vec<usize> = (rest.len()..new_n).collect();
        let mut out: BTreeMap<u128, C64> = BTreeMap::new();
        for (&key, &amp) in &self.amps {
            let col = sub_index(key, qubits);
            let base = gather(key, &rest);
            for row in 0..dout {
                let c = k[(row, col)];
                if c.re == 0.0 && c.im == 0.0 {
                    continue;
                }
                let nk = deposit(base, &out_pos, row);
                *out.entry(nk).or_insert(C64::new(0.0, 0.0)) += c * amp;
            }
        }
        let mut s = SparseState { n: new_n, amps: out };
        s.prune();
        Ok(s)
    }

    /// Applies a classical reversible map to basis indices. The map must be
    /// injective on the support.
    pub fn apply_classical(&mut self, f: impl Fn(u128) -> u128) -> Result<(), QsimError> {
        let mut out = BTreeMap::new();
        for (&k, &a) in &self.amps {
            let nk = f(k);
            if self.n < 128 && nk >> self.n != 0 {
                return Err(QsimError::IndexOutOfRange { index: 128 - nk.leading_zeros() as usize, width: self.n });
            }
            if out.insert(nk, a).is_some() {
                return Err(QsimError::NotInjective);
            }
        }
        self.amps = out;
        Ok(())
    }

    /// Multiplies each amplitude by a phase that depends on its basis index.
    pub fn apply_phase(&mut self, f: impl Fn(u128) -> C64) {
        for (&k, a) in self.amps.iter_mut() {
            *a *= f(k);
        }
    }

    /// Born-rule outcome distribution of the classical function `f` of the basis index.
    pub fn distribution(&self, f: impl Fn(u128) -> u64) -> Vec<(u64, f64)> {
        let mut d: BTreeMap<u64, f64> = BTreeMap::new();
        let total = self.norm_sqr();
        for (&k, a) in &self.amps {
            *d.entry(f(k)).or_insert(0.0) += a.norm_sqr() / total;
        }
        d.into_iter().collect()
    }

    /// Unnormalized projection onto basis indices where `keep` holds.
    pub fn project(&self, keep: impl Fn(u128) -> bool) -> SparseState {
        SparseState {
            n: self.n,
            amps: self.amps.iter().filter(|(k, _)| keep(**k)).map(|(&k, &a)| (k, a)).collect(),
        }
    }

    /// `self ⊗ other`; the qubits of `other` follow those of `self`.
    pub fn tensor(&self, other: &SparseState) -> Result<SparseState, QsimError> {
        let n = self.n + other.n;
        if n > MAX_SPARSE_QUBITS {
            return Err(QsimError::TooManyQubits { requested: n, max: MAX_SPARSE_QUBITS });
        }
        let mut amps = BTreeMap::new();
        for (&ka, &a) in &self.amps {
            for (&kb, &b) in &other.amps {
                amps.insert(ka | (kb << self.n), a * b);
            }
        }
        Ok(SparseState { n, amps })
    }

    pub fn inner(&self, other: &SparseState) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for (&k, &a) in &self.amps {
            if let Some(&b) = other.amps.get(&k) {
                s += a.conj() * b;
            }
        }
        s
    }

    /// |⟨a|b⟩|² for normalized inputs.
    pub fn fidelity(&self, other: &SparseState) -> f64 {
        if self.n != other.n {
            return 0.0;
        }
        self.inner(other).norm_sqr() / (self.norm_sqr() * other.norm_sqr())
    }

    /// Reorders qubits: new qubit `j` is old qubit `order[j]`.
    pub fn permute_qubits(&self, order: &[usize]) -> Result<SparseState, QsimError> {
        if order.len() != self.n {
            return Err(QsimError::DimensionMismatch { left: order.len(), right: self.n });
        }
        self.check_qubits(order)?;
        let amps = self.amps.iter().map(|(&k, &a)| (gather(k, order), a)).collect();
        Ok(SparseState { n: self.n, amps })
    }

    /// Splits off `sel` if the state is a product across `sel` and its complement.
    /// Returns (state of `sel` with qubit j = `sel[j]`, state of the rest in
    /// ascending original order). Both parts are normalized.
    pub fn try_factor(&self, sel: &[usize]) -> Option<(SparseState, SparseState)> {
        if self.check_qubits(sel).is_err() || self.amps.is_empty() {
            return None;
        }
        let rest: Vec<usize> = (0..self.n).filter(|q| !sel.contains(q)).collect();
        let split = |k: u128| (gather(k, sel), gather(k, &rest));
        let (&k0, &a0) = self.amps.iter().next()?;
        let (s0, r0) = split(k0);
        let mut left: BTreeMap<u128, C64> = BTreeMap::new();
        let mut right: BTreeMap<u128, C64> = BTreeMap::new();
        for (&k, &a) in &self.amps {
            let (s, r) = split(k);
            if r == r0 {
                left.insert(s, a);
            }
            if s == s0 {
                right.insert(r, a);
            }
        }
        if left.len() * right.len() != self.amps.len() {
            return None;
        }
        let scale = self.norm_sqr().sqrt();
        for (&k, &a) in &self.amps {
            let (s, r) = split(k);
            let (Some(&l), Some(&rr)) = (left.get(&s), right.get(&r)) else {
                return None;
            };
            if (a * a0 - l * rr).norm() > 1e-9 * scale * scale {
                return None;
            }
        }
        let mut ls = SparseState { n: sel.len(), amps: left };
        let mut rs = SparseState { n: rest.len(), amps: right };
        ls.normalize();
        rs.normalize();
        Some((ls, rs))
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }
}
