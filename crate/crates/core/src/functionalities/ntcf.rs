//! A deliberately insecure 2-to-1 function family with trapdoor, used only to
//! exercise correctness paths. f(x) = E · drop_j(x ⊕ x_j·s): the pair
//! (x, x ⊕ s) collides, and E is an injective linear map over GF(2).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::protocol::{apply_channel, Owner};
use crate::qsim::{Bits, CqEnsemble};

use super::FunctionalityError;

pub const MAX_TOY_KAPPA: usize = 12;

/// Opaque key material plus the public shape parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NtcfKeys {
    pub public_key: Bits,
    pub secret_key: Bits,
    /// Domain width κ.
    pub kappa: usize,
    /// Range width κ + 1.
    pub range_width: usize,
    /// Declared correctness error.
    pub mu: f64,
}

/// Parsed key: everything in one place (there is nothing secret about it).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToyFunction {
    pub kappa: usize,
    /// Pivot coordinate; the preimage bit b is x_j.
    pub j: usize,
    /// Claw difference, s_j = 1 and weight ≥ 2.
    pub s: u64,
    /// Rows of E, each over κ − 1 variables.
    pub rows: Vec<u64>,
}

fn to_bits(v: u64, w: usize) -> Bits {
    Bits::from_bools((0..w).map(|i| (v >> i) & 1 == 1).collect())
}

fn from_bits(b: &Bits) -> u64 {
    b.iter().enumerate().fold(0, |a, (i, x)| a | (x as u64) << i)
}

/// Solves rows · z = rhs over GF(2); None if inconsistent or underdetermined.
fn solve_gf2(rows: &[u64], rhs: u64, nvars: usize) -> Option<u64> {
    let mut eq: Vec<(u64, bool)> = rows.iter().enumerate().map(|(i, &r)| (r, (rhs >> i) & 1 == 1)).collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for c in 0..nvars {
        let Some(p) = (row..eq.len()).find(|&i| (eq[i].0 >> c) & 1 == 1) else {
            return None;
        };
        eq.swap(row, p);
        for i in 0..eq.len() {
            if i != row && (eq[i].0 >> c) & 1 == 1 {
                eq[i].0 ^= eq[row].0;
                eq[i].1 ^= eq[row].1;
            }
        }
        pivots.push(c);
        row += 1;
    }
    if eq[row..].iter().any(|e| e.1) {
        return None;
    }
    Some(pivots.iter().enumerate().fold(0, |z, (r, &c)| z | (eq[r].1 as u64) << c))
}

fn drop_bit(x: u64, j: usize) -> u64 {
    let low = x & ((1 << j) - 1);
    let high = x >> (j + 1);
    low | high << j
}

fn insert_zero(z: u64, j: usize) -> u64 {
    let low = z & ((1 << j) - 1);
    let high = z >> j;
    low | high << (j + 1)
}

impl ToyFunction {
    fn header_width() -> usize {
        8
    }

    fn encode(&self) -> Bits {
        let k = self.kappa;
        let mut b = to_bits(k as u64, 4).concat(&to_bits(self.j as u64, 4)).concat(&to_bits(self.s, k));
        for r in &self.rows {
            b = b.concat(&to_bits(*r, k - 1));
        }
        b
    }

    pub fn parse(key: &Bits) -> Result<Self, FunctionalityError> {
        let bad = |m: &str| FunctionalityError::MalformedKey(m.to_string());
        if key.len() < Self::header_width() {
            return Err(bad("key too short"));
        }
        let kappa = from_bits(&key.slice(0, 4)) as usize;
        let j = from_bits(&key.slice(4, 8)) as usize;
        if !(2..=MAX_TOY_KAPPA).contains(&kappa) || j >= kappa {
            return Err(bad("bad shape header"));
        }
        let want = 8 + kappa + (kappa + 1) * (kappa - 1);
        if key.len() != want {
            return Err(bad("wrong key length"));
        }
        let s = from_bits(&key.slice(8, 8 + kappa));
        if (s >> j) & 1 != 1 {
            return Err(bad("claw difference misses the pivot"));
        }
        let rows = (0..kappa + 1)
            .map(|r| {
                let off = 8 + kappa + r * (kappa - 1);
                from_bits(&key.slice(off, off + kappa - 1))
            })
            .collect();
        Ok(Self { kappa, j, s, rows })
    }

    /// Second coordinate where the two preimages differ.
    pub fn partner(&self) -> usize {
        (0..self.kappa).find(|&i| i != self.j && (self.s >> i) & 1 == 1).expect("weight ≥ 2")
    }

    pub fn eval_uint(&self, x: u64) -> u64 {
        let t = if (x >> self.j) & 1 == 1 { x ^ self.s } else { x };
        let z = drop_bit(t, self.j);
        self.rows.iter().enumerate().fold(0, |y, (i, r)| y | (((r & z).count_ones() & 1) as u64) << i)
    }

    pub fn eval(&self, x: &Bits) -> Bits {
        to_bits(self.eval_uint(from_bits(x)), self.kappa + 1)
    }

    pub fn dec_uint(&self, b: bool, y: u64) -> Option<u64> {
        let z = solve_gf2(&self.rows, y, self.kappa - 1)?;
        let x = insert_zero(z, self.j);
        Some(if b { x ^ self.s } else { x })
    }
}

/// Generates a toy key pair. κ ≤ 12, µ ∈ (0, 1).
pub fn toy_ntcf_keygen(mu: f64, kappa: usize, seed: u64) -> Result<NtcfKeys, FunctionalityError> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(FunctionalityError::BadParameter(format!("µ = {mu} outside (0, 1)")));
    }
    if !(2..=MAX_TOY_KAPPA).contains(&kappa) {
        return Err(FunctionalityError::BadParameter(format!("κ = {kappa} outside 2..={MAX_TOY_KAPPA}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j = rng.random_range(0..kappa);
    let s = loop {
        let s = rng.random_range(0..1u64 << kappa) | 1 << j;
        if s.count_ones() >= 2 {
            break s;
        }
    };
    let rows = loop {
        let rows: Vec<u64> = (0..kappa + 1).map(|_| rng.random_range(0..1u64 << (kappa - 1))).collect();
        if solve_gf2(&rows, 0, kappa - 1).is_some() {
            break rows;
        }
    };
    let f = ToyFunction { kappa, j, s, rows };
    let key = f.encode();
    Ok(NtcfKeys { public_key: key.clone(), secret_key: key, kappa, range_width: kappa + 1, mu })
}

/// Dec_sk(b, y): the preimage with x_j = b, or None (⊥) off the range.
pub fn toy_ntcf_dec(sk: &Bits, b: bool, y: &Bits) -> Result<Option<Bits>, FunctionalityError> {
    let f = ToyFunction::parse(sk)?;
    if y.len() != f.kappa + 1 {
        return Ok(None);
    }
    Ok(f.dec_uint(b, from_bits(y)).map(|x| to_bits(x, f.kappa)))
}

/// CHK_pk(b, x, y): f(x) = y and x_j = b.
pub fn toy_ntcf_chk(pk: &Bits, b: bool, x: &Bits, y: &Bits) -> Result<bool, FunctionalityError> {
    let f = ToyFunction::parse(pk)?;
    if x.len() != f.kappa || y.len() != f.kappa + 1 {
        return Ok(false);
    }
    Ok(f.eval(x) == *y && x.get(f.j) == b)
}

/// |x⟩ ↦ |x⟩|f(x)⟩ on register `x_reg`, writing the new register `y_reg`.
pub fn toy_ntcf_eval(pk: &Bits, ens: &CqEnsemble, x_reg: &str, y_reg: &str) -> Result<CqEnsemble, FunctionalityError> {
    let f = ToyFunction::parse(pk)?;
    let w = ens.layout().entry(x_reg).map(|e| e.width);
    if w != Some(f.kappa) {
        return Err(FunctionalityError::WidthMismatch { expected: f.kappa, got: w.unwrap_or(0) });
    }
    let kp1 = f.kappa + 1;
    let out = apply_channel(ens, &[], 1, &|w, _| {
        w.alloc_zero(y_reg, kp1, Owner::Server)?;
        let f = f.clone();
        w.apply_classical(&[x_reg, y_reg], &move |v| {
            let y = f.eval(&v[0]);
            v[1] = v[1].xor(&y);
        })
    })?;
    Ok(out)
}
