//! Small gate matrices. Multi-qubit gates list the leftmost qubit first.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;

use super::C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn mat(n: usize, entries: &[C64]) -> DMatrix<C64> {
    DMatrix::from_row_slice(n, n, entries)
}

pub fn identity(qubits: usize) -> DMatrix<C64> {
    DMatrix::identity(1 << qubits, 1 << qubits)
}

pub fn h() -> DMatrix<C64> {
    let r = FRAC_1_SQRT_2;
    mat(2, &[c(r, 0.0), c(r, 0.0), c(r, 0.0), c(-r, 0.0)])
}

pub fn x() -> DMatrix<C64> {
    mat(2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn y() -> DMatrix<C64> {
    mat(2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn z() -> DMatrix<C64> {
    mat(2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

/// e^{iπk/4}.
pub fn eighth_root(k: i64) -> C64 {
    let k = k.rem_euclid(8) as f64;
    C64::from_polar(1.0, PI * k / 4.0)
}

/// diag(1, e^{iπk/4}); k=1 is T, k=2 is S.
pub fn phase(k: i64) -> DMatrix<C64> {
    mat(2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), eighth_root(k)])
}

pub fn cnot() -> DMatrix<C64> {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    mat(4, &[l, o, o, o, o, l, o, o, o, o, o, l, o, o, l, o])
}

pub fn swap() -> DMatrix<C64> {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    mat(4, &[l, o, o, o, o, o, l, o, o, l, o, o, o, o, o, l])
}

/// Amplitudes of |+_θ⟩ = (|0⟩ + e^{iπθ/4}|1⟩)/√2.
pub fn plus_theta(theta: i64) -> [C64; 2] {
    [c(FRAC_1_SQRT_2, 0.0), eighth_root(theta) * FRAC_1_SQRT_2]
}

/// Unitary sending |+_φ⟩ to |0⟩ and |+_{φ+4}⟩ to |1⟩.
pub fn rotated_to_computational(phi: i64) -> DMatrix<C64> {
    h() * phase(-phi)
}

/// Projector onto |+_θ⟩ as a 2×2 matrix.
pub fn plus_projector(theta: i64) -> DMatrix<C64> {
    let v = plus_theta(theta);
    DMatrix::from_fn(2, 2, |i, j| v[i] * v[j].conj())
}

/// Kronecker product, `a` on the left.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

pub fn is_unitary(u: &DMatrix<C64>, tol: f64) -> bool {
    if u.nrows() != u.ncols() {
        return false;
    }
    let p = u.adjoint() * u;
    let id = DMatrix::<C64>::identity(u.nrows(), u.ncols());
    (p - id).iter().all(|e| e.norm() <= tol)
}
