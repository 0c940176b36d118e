//! Dense-matrix reference implementations shared by the integration tests.
//! Vectors are indexed by the basis key (bit q of the index is qubit q);
//! operators on a qubit list read the list most significant first.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rspv_lab::qsim::{CqEnsemble, RegisterLayout, SparseState};

pub type C = Complex<f64>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn empty() -> CqEnsemble {
    CqEnsemble::pure(RegisterLayout::new(), SparseState::zero(0)).unwrap()
}

/// Seeded Haar-ish random state on n qubits (Gaussian amplitudes, normalized).
pub fn random_vector(n: usize, seed: u64) -> DVector<C> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DVector::from_fn(1 << n, |_, _| {
        let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        c(a, b)
    });
    let norm = v.norm();
    v /= c(norm, 0.0);
    v
}

pub fn to_sparse(v: &DVector<C>) -> SparseState {
    let n = v.len().trailing_zeros() as usize;
    SparseState::from_amplitudes(n, v.iter().enumerate().map(|(k, a)| (k as u128, *a)))
}

pub fn to_dense(s: &SparseState) -> DVector<C> {
    DVector::from_fn(1 << s.num_qubits(), |k, _| s.amplitude(k as u128))
}

fn bit(k: usize, q: usize) -> usize {
    (k >> q) & 1
}

/// Embeds a 2^|qs| operator acting on `qs` (first listed = most significant)
/// into the full 2^n space.
pub fn embed(n: usize, qs: &[usize], op: &DMatrix<C>) -> DMatrix<C> {
    let d = 1 << n;
    let sub = |k: usize| qs.iter().fold(0usize, |acc, &q| (acc << 1) | bit(k, q));
    let rest = |k: usize| qs.iter().fold(k, |acc, &q| acc & !(1 << q));
    DMatrix::from_fn(d, d, |r, col| if rest(r) == rest(col) { op[(sub(r), sub(col))] } else { c(0.0, 0.0) })
}

pub fn ket_plus_theta(theta: u8) -> DVector<C> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let phase = C::from_polar(1.0, std::f64::consts::PI * theta as f64 / 4.0);
    DVector::from_vec(vec![c(s, 0.0), phase * s])
}

pub fn projector(v: &DVector<C>) -> DMatrix<C> {
    v * v.adjoint()
}

/// One-qubit outcome projectors: computational, Hadamard (as θ = 0) or rotated θ.
pub fn qubit_projector(basis: Option<u8>, outcome: bool) -> DMatrix<C> {
    match basis {
        None => {
            let mut m = DMatrix::zeros(2, 2);
            m[(outcome as usize, outcome as usize)] = c(1.0, 0.0);
            m
        }
        Some(theta) => projector(&ket_plus_theta(if outcome { theta + 4 } else { theta })),
    }
}

/// Projector for outcome `record` (record bit j is qubit qs[j]) of a product measurement.
pub fn product_projector(n: usize, qs: &[usize], basis: Option<u8>, record: &[bool]) -> DMatrix<C> {
    let mut full = DMatrix::identity(1 << n, 1 << n);
    for (&q, &o) in qs.iter().zip(record) {
        full = embed(n, &[q], &qubit_projector(basis, o)) * full;
    }
    full
}

/// X^a Z^b |Φ⟩ with the Pauli on the first qubit, as a two-qubit vector.
pub fn bell_vector(a: bool, b: bool) -> DVector<C> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // |Φ⟩ = (|00⟩ + |11⟩)/√2; index = 2·first + second
    let mut v = DVector::from_vec(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]);
    if b {
        v[2] = -v[2];
        v[3] = -v[3];
    }
    if a {
        v = DVector::from_vec(vec![v[2], v[3], v[0], v[1]]);
    }
    v
}

pub fn parity_projector(n: usize, qs: &[usize], odd: bool) -> DMatrix<C> {
    let d = 1 << n;
    DMatrix::from_fn(d, d, |r, col| {
        let p = qs.iter().map(|&q| bit(r, q)).sum::<usize>() % 2 == 1;
        if r == col && p == odd {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    })
}

/// Reduced density of `v` on `sel` (first listed = most significant).
pub fn reduced(v: &DVector<C>, sel: &[usize]) -> DMatrix<C> {
    let n = v.len().trailing_zeros() as usize;
    let rest: Vec<usize> = (0..n).filter(|q| !sel.contains(q)).collect();
    let d = 1 << sel.len();
    let mut m = DMatrix::zeros(d, d);
    for (i, a) in v.iter().enumerate() {
        for (j, b) in v.iter().enumerate() {
            if rest.iter().all(|&q| bit(i, q) == bit(j, q)) {
                let si = sel.iter().fold(0usize, |acc, &q| (acc << 1) | bit(i, q));
                let sj = sel.iter().fold(0usize, |acc, &q| (acc << 1) | bit(j, q));
                m[(si, sj)] += a * b.conj();
            }
        }
    }
    m
}

/// ½‖A − B‖₁ from singular values.
pub fn trace_distance(a: &DMatrix<C>, b: &DMatrix<C>) -> f64 {
    0.5 * (a - b).singular_values().iter().sum::<f64>()
}

pub fn max_abs(m: &DMatrix<C>) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Random unitary from the QR decomposition of a seeded complex matrix.
pub fn random_unitary(dim: usize, seed: u64) -> DMatrix<C> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(dim, dim, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    m.qr().q()
}

/// Every ordered selection of distinct qubits out of n, of every length ≥ 1.
pub fn ordered_selections(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn go(n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        for q in 0..n {
            if !cur.contains(&q) {
                cur.push(q);
                go(n, cur, out);
                cur.pop();
            }
        }
    }
    go(n, &mut Vec::new(), &mut out);
    out
}

/// Binary expansion of `value` over `len` bits, most significant first.
pub fn record_bits(value: usize, len: usize) -> Vec<bool> {
    (0..len).map(|j| (value >> (len - 1 - j)) & 1 == 1).collect()
}

pub fn path(p: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(p)
}

use rspv_lab::qsim::{trace_distance as sim_trace_distance, Basis, Bits};

const STATES_PER_WIDTH: u64 = 6;

fn layout(n: usize, record: usize) -> RegisterLayout {
    RegisterLayout::new().quantum("q", n).unwrap().classical("r", record).unwrap()
}

fn ensemble(v: &DVector<C>, record: usize) -> CqEnsemble {
    let n = v.len().trailing_zeros() as usize;
    CqEnsemble::pure(layout(n, record), to_sparse(v)).unwrap()
}

/// Largest deviation between a measured ensemble and the projector oracle:
/// outcome weights, post-measurement states and the post-measurement density.
fn compare_measurement(v: &DVector<C>, measured: &CqEnsemble, projectors: &[(Vec<bool>, DMatrix<C>)]) -> f64 {
    let n = v.len().trailing_zeros() as usize;
    let sel: Vec<usize> = (0..n).collect();
    let rho = v * v.adjoint();
    let mut err: f64 = 0.0;
    let mut mixed = DMatrix::zeros(1 << n, 1 << n);
    for (record, p) in projectors {
        let pv = p * v;
        let prob = pv.norm_squared();
        mixed += p * &rho * p.adjoint();
        let label = Bits::from_bools(record.clone());
        let hits: Vec<_> = measured.branches().iter().filter(|b| b.label.get("r") == Some(&label)).collect();
        let weight: f64 = hits.iter().map(|b| b.weight).sum();
        err = err.max((weight - prob).abs());
        if prob > 1e-9 {
            let expected = projector(&(&pv / c(prob.sqrt(), 0.0)));
            for b in hits {
                err = err.max(max_abs(&(projector(&to_dense(&b.state)) - &expected)));
            }
        }
    }
    let dens = measured.density_of(&["q"], None).unwrap().to_dense();
    let oracle = reduced_matrix(&mixed, &sel);
    err.max(max_abs(&(dens - oracle)))
}

/// Reorders a full density matrix so that qubit sel[0] is most significant.
fn reduced_matrix(m: &DMatrix<C>, sel: &[usize]) -> DMatrix<C> {
    let d = m.nrows();
    let idx = |k: usize| sel.iter().fold(0usize, |acc, &q| (acc << 1) | bit(k, q));
    let mut out = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            out[(idx(i), idx(j))] = m[(i, j)];
        }
    }
    out
}

/// Max error of single-qubit-basis measurements over all ≤3-qubit selections.
pub fn born_rule_error() -> f64 {
    let mut bases: Vec<(Basis, Option<u8>)> = vec![(Basis::Computational, None), (Basis::Hadamard, Some(0))];
    bases.extend((0..8u8).map(|t| (Basis::Rotated(t), Some(t))));
    let mut err: f64 = 0.0;
    for n in 1..=3 {
        for s in 0..STATES_PER_WIDTH {
            let v = random_vector(n, 1000 * n as u64 + s);
            for qs in ordered_selections(n) {
                for &(basis, oracle_basis) in &bases {
                    let measured = ensemble(&v, qs.len()).measure_basis(&qs, basis, "r").unwrap();
                    let projs: Vec<_> = (0..1usize << qs.len())
                        .map(|o| {
                            let rec = record_bits(o, qs.len());
                            let p = product_projector(n, &qs, oracle_basis, &rec);
                            (rec, p)
                        })
                        .collect();
                    err = err.max(compare_measurement(&v, &measured, &projs));
                }
            }
        }
    }
    err
}

/// Max error of Bell measurements on every ordered pair (and pair of pairs).
pub fn bell_error() -> f64 {
    let mut err: f64 = 0.0;
    for n in 2..=4 {
        let mut pair_sets: Vec<Vec<(usize, usize)>> = Vec::new();
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    pair_sets.push(vec![(p, q)]);
                    if n == 4 {
                        let rest: Vec<usize> = (0..n).filter(|x| *x != p && *x != q).collect();
                        pair_sets.push(vec![(p, q), (rest[0], rest[1])]);
                    }
                }
            }
        }
        for s in 0..STATES_PER_WIDTH {
            let v = random_vector(n, 2000 * n as u64 + s);
            for pairs in &pair_sets {
                let k = 2 * pairs.len();
                let measured = ensemble(&v, k).measure_bell(pairs, "r").unwrap();
                let projs: Vec<_> = (0..1usize << k)
                    .map(|o| {
                        let rec = record_bits(o, k);
                        let mut p = DMatrix::identity(1 << n, 1 << n);
                        for (t, &(a, b)) in pairs.iter().enumerate() {
                            p = embed(n, &[a, b], &projector(&bell_vector(rec[2 * t], rec[2 * t + 1]))) * p;
                        }
                        (rec, p)
                    })
                    .collect();
                err = err.max(compare_measurement(&v, &measured, &projs));
            }
        }
    }
    err
}

/// Max error of parity measurements over every ≤3-qubit subset.
pub fn parity_error() -> f64 {
    let mut err: f64 = 0.0;
    for n in 1..=3 {
        for s in 0..STATES_PER_WIDTH {
            let v = random_vector(n, 3000 * n as u64 + s);
            for mask in 1..(1usize << n) {
                let qs: Vec<usize> = (0..n).filter(|q| mask >> q & 1 == 1).collect();
                let measured = ensemble(&v, 1).measure_parity(&qs, "r").unwrap();
                let projs: Vec<_> = [false, true].iter().map(|&o| (vec![o], parity_projector(n, &qs, o))).collect();
                err = err.max(compare_measurement(&v, &measured, &projs));
            }
        }
    }
    err
}

/// Max error of reduced densities and trace distances between two-branch
/// mixtures, over every ordered qubit selection of ≤3-qubit states.
pub fn trace_distance_error() -> f64 {
    let mut err: f64 = 0.0;
    for n in 1..=3 {
        for s in 0..STATES_PER_WIDTH {
            let mix = |seed: u64, w: f64| {
                let (a, b) = (random_vector(n, seed), random_vector(n, seed + 7));
                let e = CqEnsemble::new(
                    RegisterLayout::new().quantum("q", n).unwrap(),
                    vec![
                        rspv_lab::qsim::PureBranch { label: Default::default(), weight: w, state: to_sparse(&a) },
                        rspv_lab::qsim::PureBranch { label: Default::default(), weight: 1.0 - w, state: to_sparse(&b) },
                    ],
                )
                .unwrap();
                (e, a, b, w)
            };
            let (e1, a1, b1, w1) = mix(4000 * n as u64 + s, 0.3);
            let (e2, a2, b2, w2) = mix(5000 * n as u64 + s, 0.8);
            for sel in ordered_selections(n) {
                let r1 = reduced(&a1, &sel) * c(w1, 0.0) + reduced(&b1, &sel) * c(1.0 - w1, 0.0);
                let r2 = reduced(&a2, &sel) * c(w2, 0.0) + reduced(&b2, &sel) * c(1.0 - w2, 0.0);
                let regs = ["q"];
                // density_of selects whole registers; use the full register and reorder for partial selections
                let full1 = e1.density_of(&regs, None).unwrap();
                let full2 = e2.density_of(&regs, None).unwrap();
                if sel.len() == n && sel.iter().enumerate().all(|(i, &q)| i == q) {
                    err = err.max(max_abs(&(full1.to_dense() - &r1)));
                    let sim = sim_trace_distance(&full1, &full2).unwrap();
                    err = err.max((sim - trace_distance(&r1, &r2)).abs());
                }
                let v1 = rspv_lab::qsim::DensityView::reduce(
                    e1.branches().iter().map(|b| (b.weight, &b.state)),
                    &sel,
                );
                let v2 = rspv_lab::qsim::DensityView::reduce(
                    e2.branches().iter().map(|b| (b.weight, &b.state)),
                    &sel,
                );
                err = err.max(max_abs(&(v1.to_dense() - &r1)));
                err = err.max((sim_trace_distance(&v1, &v2).unwrap() - trace_distance(&r1, &r2)).abs());
            }
        }
    }
    err
}
