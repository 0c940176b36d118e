use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::qsim::{gates, DensityView, C64};

use super::{QubitTestError, Result};

/// The four phases the client may prepare, in the order used by every array here.
pub const THETAS: [u8; 4] = [1, 3, 5, 7];

const TOL: f64 = 1e-9;

/// cos²(π/8), the optimal winning probability.
pub fn optimal_value() -> f64 {
    (std::f64::consts::PI / 8.0).cos().powi(2)
}

/// u_c(θ) for c ∈ {0, 2}: u_0(θ) = 0 iff θ ∈ {1, 7}, u_2(θ) = 0 iff θ ∈ {1, 3}.
pub fn u_bit(c: u8, theta: u8) -> bool {
    match c {
        0 => !matches!(theta, 1 | 7),
        _ => !matches!(theta, 1 | 3),
    }
}

/// Projector onto |+_θ⟩.
pub fn plus_projector(theta: u8) -> DMatrix<C64> {
    gates::plus_projector(theta as i64)
}

/// The ±1 observable with +1 on |+_c⟩ and −1 on |+_{c+4}⟩.
pub fn observable(c: u8) -> DMatrix<C64> {
    plus_projector(c) - plus_projector((c + 4) % 8)
}

fn sigma_x() -> DMatrix<C64> {
    observable(0)
}

fn sigma_y() -> DMatrix<C64> {
    observable(2)
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn eig(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let h = (m + m.adjoint()) * re(0.5);
    let e = SymmetricEigen::new(h);
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

/// f applied to the eigenvalues of a Hermitian matrix.
fn herm_fn(m: &DMatrix<C64>, f: impl Fn(f64) -> f64) -> DMatrix<C64> {
    let (vals, vecs) = eig(m);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(vals.len(), vals.iter().map(|&v| re(f(v)))));
    &vecs * d * vecs.adjoint()
}

fn trace(m: &DMatrix<C64>) -> f64 {
    m.trace().re
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// ½‖a − b‖₁ for Hermitian matrices.
fn trace_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    0.5 * eig(&(a - b)).0.iter().map(|e| e.abs()).sum::<f64>()
}

fn check_involution(x: &DMatrix<C64>, name: &'static str) -> Result<()> {
    let d = x.nrows();
    if x.ncols() != d {
        return Err(QubitTestError::DimensionMismatch { left: d, right: x.ncols() });
    }
    if max_abs(&(x - x.adjoint())) > TOL || max_abs(&(x * x - DMatrix::identity(d, d))) > TOL {
        return Err(QubitTestError::NotInvolution(name));
    }
    Ok(())
}

/// Four positive operators φ_θ (θ = 1, 3, 5, 7) and two ±1 observables.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitGameInstance {
    pub phi: [DMatrix<C64>; 4],
    pub x0: DMatrix<C64>,
    pub x2: DMatrix<C64>,
}

impl QubitGameInstance {
    pub fn new(phi: [DMatrix<C64>; 4], x0: DMatrix<C64>, x2: DMatrix<C64>) -> Result<Self> {
        let inst = Self { phi, x0, x2 };
        inst.validate()?;
        Ok(inst)
    }

    /// The optimal strategy: φ_θ = |+_θ⟩⟨+_θ|, X0 along |+_0⟩/|+_4⟩, X2 along |+_2⟩/|+_6⟩.
    pub fn optimal() -> Self {
        Self { phi: THETAS.map(plus_projector), x0: observable(0), x2: observable(2) }
    }

    pub fn dim(&self) -> usize {
        self.x0.nrows()
    }

    /// Shapes, involutions and positivity (eigenvalues ≥ −1e−9).
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        check_involution(&self.x0, "X0")?;
        check_involution(&self.x2, "X2")?;
        if self.x2.nrows() != d {
            return Err(QubitTestError::DimensionMismatch { left: d, right: self.x2.nrows() });
        }
        for (p, &theta) in self.phi.iter().zip(&THETAS) {
            if p.nrows() != d || p.ncols() != d {
                return Err(QubitTestError::DimensionMismatch { left: d, right: p.nrows() });
            }
            if max_abs(&(p - p.adjoint())) > TOL {
                return Err(QubitTestError::NotPsd { theta, eigenvalue: f64::NAN });
            }
            let min = eig(p).0.into_iter().fold(f64::INFINITY, f64::min);
            if min < -TOL {
                return Err(QubitTestError::NotPsd { theta, eigenvalue: min });
            }
        }
        Ok(())
    }

    /// N = tr(¼ Σ φ_θ).
    pub fn normalization(&self) -> f64 {
        self.phi.iter().map(trace).sum::<f64>() / 4.0
    }

    fn answer_projector(&self, c: u8, u: bool) -> DMatrix<C64> {
        let x = if c == 0 { &self.x0 } else { &self.x2 };
        let d = self.dim();
        let sign = if u { -1.0 } else { 1.0 };
        (DMatrix::identity(d, d) + x * re(sign)) * re(0.5)
    }
}

/// (1/4) Σ_θ (1/2) Σ_{c ∈ {0,2}} tr(X_c^{u_c(θ)} φ_θ), with X_c^u the
/// projector onto the (−1)^u eigenspace of X_c.
pub fn game_value(inst: &QubitGameInstance) -> Result<f64> {
    inst.validate()?;
    let mut v = 0.0;
    for (p, &theta) in inst.phi.iter().zip(&THETAS) {
        for c in [0u8, 2] {
            v += trace(&(inst.answer_projector(c, u_bit(c, theta)) * p)) / 8.0;
        }
    }
    Ok(v)
}

fn anticommutator(inst: &QubitGameInstance) -> DMatrix<C64> {
    &inst.x0 * &inst.x2 + &inst.x2 * &inst.x0
}

/// tr({X0, X2}² ρ).
pub fn anticommutator_trace(inst: &QubitGameInstance, rho: &DensityView) -> Result<f64> {
    let r = rho.to_dense();
    if r.nrows() != inst.dim() {
        return Err(QubitTestError::DimensionMismatch { left: inst.dim(), right: r.nrows() });
    }
    let a = anticommutator(inst);
    Ok(trace(&(&a * &a * r)))
}

/// Optimal states with X2 tilted by α towards X0: X2 = cos α·σ_Y + sin α·σ_X.
pub fn rotated_instance(alpha: f64) -> QubitGameInstance {
    let x2 = sigma_y() * re(alpha.cos()) + sigma_x() * re(alpha.sin());
    QubitGameInstance { phi: THETAS.map(plus_projector), x0: sigma_x(), x2 }
}

/// Anticommutator size against distance from the optimum, with a power-law fit C·δ^c.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnticommutatorFit {
    /// (δ, tilt α, Σ_θ tr({X0,X2}² φ_θ)) per requested δ.
    pub points: Vec<(f64, f64, f64)>,
    pub constant: f64,
    pub exponent: f64,
}

/// For each δ, tilts X2 until the game value is δ below the optimum and
/// records Σ_θ tr({X0, X2}² φ_θ); then fits C·δ^c through the first and
/// last points. A measured diagnostic, not a proven bound.
pub fn fitted_diagnostic(deltas: &[f64]) -> Result<AnticommutatorFit> {
    let gap = |a: f64| game_value(&rotated_instance(a)).map(|v| optimal_value() - v);
    let max_gap = gap(std::f64::consts::FRAC_PI_2)?;
    let mut points = Vec::new();
    for &delta in deltas {
        if !(delta > 0.0 && delta < max_gap) {
            return Err(QubitTestError::BadDelta(delta));
        }
        let (mut lo, mut hi) = (0.0, std::f64::consts::FRAC_PI_2);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if gap(mid)? < delta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let inst = rotated_instance(lo);
        let a = anticommutator(&inst);
        let total: f64 = inst.phi.iter().map(|p| trace(&(&a * &a * p))).sum();
        points.push((delta, lo, total));
    }
    let (constant, exponent) = match (points.first(), points.last()) {
        (Some(f), Some(l)) if points.len() > 1 && f.0 != l.0 => {
            let c = (l.2 / f.2).ln() / (l.0 / f.0).ln();
            (f.2 / f.0.powf(c), c)
        }
        (Some(f), _) => (f.2 / f.0, 1.0),
        _ => (0.0, 0.0),
    };
    Ok(AnticommutatorFit { points, constant, exponent })
}

/// How close a state is to |+_1⟩ on its first qubit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlusCloseness {
    /// s = ½(tr(|+_0⟩⟨+_0| ρ) + tr(|+_2⟩⟨+_2| ρ)) on the first qubit.
    pub s: f64,
    /// cos²(π/8) − s.
    pub defect: f64,
    /// Whether s ≤ cos²(π/8) + 1e−9.
    pub cap_holds: bool,
    /// Trace distance from |+_1⟩⟨+_1| ⊗ ψ for the best-fit ψ.
    pub distance: f64,
    /// √(√2·defect): the infidelity of the first qubit with |+_1⟩ is
    /// √2·defect, and gentle measurement turns that into this distance.
    pub bound: f64,
    pub within_bound: bool,
}

/// ⟨v| ⊗ I · m · |v⟩ ⊗ I for a one-qubit vector v on the first qubit.
fn contract_first(m: &DMatrix<C64>, v: [C64; 2]) -> DMatrix<C64> {
    let r = m.nrows() / 2;
    let mut out = DMatrix::zeros(r, r);
    for a in 0..2 {
        for b in 0..2 {
            out += m.view((a * r, b * r), (r, r)) * (v[a].conj() * v[b]);
        }
    }
    out
}

/// Score of a state in the two-observable test, and its distance from the
/// optimal product form |+_1⟩⟨+_1| ⊗ ψ. The first qubit of ρ is tested.
pub fn closeness_to_plus_state(rho: &DensityView) -> Result<PlusCloseness> {
    if rho.width() == 0 {
        return Err(QubitTestError::DimensionMismatch { left: 2, right: 1 });
    }
    let m = rho.to_dense();
    let t = trace(&m);
    let m = m * re(1.0 / t);
    let r = m.nrows() / 2;
    let id = DMatrix::<C64>::identity(r, r);
    let s = 0.5 * (trace(&(gates::kron(&plus_projector(0), &id) * &m)) + trace(&(gates::kron(&plus_projector(2), &id) * &m)));
    let defect = optimal_value() - s;
    let v = gates::plus_theta(1);
    let mut psi = contract_first(&m, v);
    let pt = trace(&psi);
    psi = if pt > TOL { psi * re(1.0 / pt) } else { id.clone() * re(1.0 / r as f64) };
    let distance = trace_distance(&m, &gates::kron(&plus_projector(1), &psi));
    let bound = (std::f64::consts::SQRT_2 * defect.max(0.0)).sqrt();
    Ok(PlusCloseness { s, defect, cap_holds: s <= optimal_value() + TOL, distance, bound, within_bound: distance <= bound + 1e-7 })
}

/// A configured polynomial bound C·δ^c on the residual distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualBound {
    pub delta: f64,
    pub constant: f64,
    pub exponent: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    /// ψ_θ = ⟨+_θ| ρ_θ |+_θ⟩ for θ = 1, 3, 5, 7.
    pub psi: Vec<DMatrix<C64>>,
    /// Largest trace distance between two ψ_θ.
    pub pairwise_max: f64,
    /// Trace distance between ½(ρ_1 + ρ_5) and ½(ρ_3 + ρ_7).
    pub hypothesis: f64,
    /// Some(pairwise_max ≤ C·δ^c) when the hypothesis distance is at most δ.
    pub within_bound: Option<bool>,
}

/// Extracts the residual states of product-form inputs ρ_θ = |+_θ⟩⟨+_θ| ⊗ ψ_θ
/// and reports how far apart they are.
pub fn residual_blindness_check(states: &[DMatrix<C64>; 4], bound: Option<ResidualBound>) -> Result<ResidualReport> {
    let d = states[0].nrows();
    if d < 2 || d % 2 != 0 {
        return Err(QubitTestError::DimensionMismatch { left: 2, right: d });
    }
    let mut psi = Vec::new();
    for (rho, &theta) in states.iter().zip(&THETAS) {
        if rho.nrows() != d || rho.ncols() != d {
            return Err(QubitTestError::DimensionMismatch { left: d, right: rho.nrows() });
        }
        let p = contract_first(rho, gates::plus_theta(theta as i64));
        let gap = trace_distance(rho, &gates::kron(&plus_projector(theta), &p));
        if gap > TOL {
            return Err(QubitTestError::ShapeMismatch(format!("theta = {theta} is {gap:.3e} from product form")));
        }
        psi.push(p);
    }
    let mut pairwise_max: f64 = 0.0;
    for i in 0..4 {
        for j in i + 1..4 {
            pairwise_max = pairwise_max.max(trace_distance(&psi[i], &psi[j]));
        }
    }
    let hypothesis = trace_distance(&((&states[0] + &states[2]) * re(0.5)), &((&states[1] + &states[3]) * re(0.5)));
    let within_bound =
        bound.filter(|b| hypothesis <= b.delta).map(|b| pairwise_max <= b.constant * b.delta.powf(b.exponent) + TOL);
    Ok(ResidualReport { psi, pairwise_max, hypothesis, within_bound })
}

/// An isometry V with V X0 V† ≈ σ_X ⊗ I and V X2 V† ≈ σ_Y ⊗ I.
#[derive(Clone, Debug, PartialEq)]
pub struct Isometry {
    /// Maps the input space onto qubit ⊗ rest (qubit first).
    pub v: DMatrix<C64>,
    /// Largest entry of V X0 V† − σ_X ⊗ I and V X2 V† − σ_Y ⊗ I.
    pub residual: f64,
}

impl Isometry {
    pub fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        &self.v * rho * self.v.adjoint()
    }
}

/// Builds the isometry from the pair (X0, X2): the +1 eigenvectors e_k of X0
/// go to |+_0⟩|k⟩ and the images of X2 e_k, polar-projected onto the −1
/// eigenspace, go to −i|+_4⟩|k⟩. Exact when X0 and X2 anticommute.
pub fn extract_isometry(x0: &DMatrix<C64>, x2: &DMatrix<C64>) -> Result<Isometry> {
    check_involution(x0, "X0")?;
    check_involution(x2, "X2")?;
    let d = x0.nrows();
    if x2.nrows() != d {
        return Err(QubitTestError::DimensionMismatch { left: d, right: x2.nrows() });
    }
    let (vals, vecs) = eig(x0);
    let plus: Vec<usize> = (0..d).filter(|&i| vals[i] > 0.0).collect();
    let minus: Vec<usize> = (0..d).filter(|&i| vals[i] <= 0.0).collect();
    if plus.len() != minus.len() {
        return Err(QubitTestError::Unbalanced { plus: plus.len(), minus: minus.len() });
    }
    let k = plus.len();
    let qp = DMatrix::from_fn(d, k, |i, j| vecs[(i, plus[j])]);
    let qm = DMatrix::from_fn(d, k, |i, j| vecs[(i, minus[j])]);
    let b = qm.adjoint() * x2 * &qp;
    let svd = b.svd(true, true);
    let (w, vt) = (svd.u.expect("left vectors"), svd.v_t.expect("right vectors"));
    let f = &qm * (w * vt);
    let a0 = DMatrix::from_column_slice(2, 1, &gates::plus_theta(0));
    let a4 = DMatrix::from_column_slice(2, 1, &gates::plus_theta(4)) * C64::new(0.0, -1.0);
    let v = gates::kron(&a0, &qp.adjoint()) + gates::kron(&a4, &f.adjoint());
    let id = DMatrix::<C64>::identity(k, k);
    let r0 = max_abs(&(&v * x0 * v.adjoint() - gates::kron(&sigma_x(), &id)));
    let r2 = max_abs(&(&v * x2 * v.adjoint() - gates::kron(&sigma_y(), &id)));
    Ok(Isometry { v, residual: r0.max(r2) })
}

// ---- randomized search over basis-blind instances ----

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<C64> {
    let g = DMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&g + g.adjoint()) * re(0.5)
}

/// Free parameters of a basis-blind instance.
#[derive(Clone, Debug)]
struct BlindParams {
    g: DMatrix<C64>,
    e: DMatrix<C64>,
    f: DMatrix<C64>,
    h0: DMatrix<C64>,
    h2: DMatrix<C64>,
}

impl BlindParams {
    fn random(rng: &mut ChaCha8Rng, d: usize) -> Self {
        Self {
            g: random_hermitian(rng, d) + random_hermitian(rng, d) * C64::new(0.0, 1.0),
            e: random_hermitian(rng, d) * re(3.0),
            f: random_hermitian(rng, d) * re(3.0),
            h0: random_hermitian(rng, d),
            h2: random_hermitian(rng, d),
        }
    }

    fn perturb(&self, rng: &mut ChaCha8Rng, step: f64) -> Self {
        let d = self.g.nrows();
        let mut bump = |m: &DMatrix<C64>| m + random_hermitian(rng, d) * re(step);
        Self { g: bump(&self.g), e: bump(&self.e), f: bump(&self.f), h0: bump(&self.h0), h2: bump(&self.h2) }
    }

    /// ρ = GG†/tr; φ_1, φ_5 = 2√ρ E√ρ, 2√ρ(I−E)√ρ and φ_3, φ_7 likewise with F,
    /// so φ_1 + φ_5 = φ_3 + φ_7 = 2ρ exactly.
    fn build(&self) -> QubitGameInstance {
        let d = self.g.nrows();
        let gg = &self.g * self.g.adjoint();
        let rho = &gg * re(1.0 / trace(&gg));
        let sq = herm_fn(&rho, |x| x.max(0.0).sqrt());
        let id = DMatrix::<C64>::identity(d, d);
        let pe = herm_fn(&self.e, |x| 0.5 * (1.0 + x.tanh()));
        let pf = herm_fn(&self.f, |x| 0.5 * (1.0 + x.tanh()));
        let half = |p: &DMatrix<C64>| &sq * p * &sq * re(2.0);
        let sign = |h: &DMatrix<C64>| herm_fn(h, |x| if x >= 0.0 { 1.0 } else { -1.0 });
        QubitGameInstance {
            phi: [half(&pe), half(&pf), half(&(&id - &pe)), half(&(&id - &pf))],
            x0: sign(&self.h0),
            x2: sign(&self.h2),
        }
    }
}

/// A seeded instance with φ_1 + φ_5 = φ_3 + φ_7 exactly and N = 1.
pub fn random_blind_instance(dim: usize, seed: u64) -> QubitGameInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BlindParams::random(&mut rng, dim).build()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapSearch {
    /// Best value found per instance.
    pub values: Vec<f64>,
    pub max_value: f64,
    /// Largest |φ_1 + φ_5 − φ_3 − φ_7| entry seen, to confirm blindness.
    pub max_blindness_gap: f64,
}

/// Hill-climbs the game value from `count` seeded basis-blind starting
/// points in dimension `dim`, keeping every candidate exactly blind.
pub fn cap_search(count: usize, dim: usize, steps: usize, seed: u64) -> Result<CapSearch> {
    let runs: Vec<Result<(f64, f64)>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64));
            let mut p = BlindParams::random(&mut rng, dim);
            let mut inst = p.build();
            let mut best = game_value(&inst)?;
            for k in 0..steps {
                let step = 0.5 * (1.0 - k as f64 / steps.max(1) as f64) + 0.01;
                let q = p.perturb(&mut rng, step);
                let cand = q.build();
                let v = game_value(&cand)?;
                if v > best {
                    (p, inst, best) = (q, cand, v);
                }
            }
            let gap = max_abs(&(&inst.phi[0] + &inst.phi[2] - &inst.phi[1] - &inst.phi[3]));
            Ok((best, gap))
        })
        .collect();
    let mut values = Vec::with_capacity(count);
    let mut max_blindness_gap: f64 = 0.0;
    for r in runs {
        let (v, g) = r?;
        values.push(v);
        max_blindness_gap = max_blindness_gap.max(g);
    }
    let max_value = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(CapSearch { values, max_value, max_blindness_gap })
}
