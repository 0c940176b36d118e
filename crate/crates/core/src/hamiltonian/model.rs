use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::qsim::SparseState;

use super::{HamiltonianError, Result};

/// Locality used when none is given.
pub const DEFAULT_LOCALITY: usize = 5;
/// Largest qubit count for [`ground_energy`].
pub const MAX_DENSE_QUBITS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Z,
}

impl Pauli {
    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Z => 'Z',
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// H = Σ_j γ_j H_j with |γ_j| ≤ 1 and each H_j a tensor product of X, Z and I
/// with at most `k` non-identity letters. Letter t acts on qubit t.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XZHamiltonian {
    pub n: usize,
    pub k: usize,
    pub terms: Vec<(f64, Vec<Pauli>)>,
}

impl XZHamiltonian {
    pub fn new(n: usize, k: usize, terms: Vec<(f64, Vec<Pauli>)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(HamiltonianError::Empty);
        }
        for (i, (g, letters)) in terms.iter().enumerate() {
            if !g.is_finite() || g.abs() > 1.0 {
                return Err(HamiltonianError::CoefficientTooLarge { term: i, gamma: *g });
            }
            if letters.len() != n {
                return Err(HamiltonianError::LengthMismatch { expected: n, got: letters.len() });
            }
            let count = letters.iter().filter(|&&p| p != Pauli::I).count();
            if count > k {
                return Err(HamiltonianError::LocalityExceeded { term: i, count, k });
            }
        }
        Ok(Self { n, k, terms })
    }

    /// Parses one term per line, "<gamma> <letters>"; `#` starts a comment.
    pub fn parse(text: &str, k: usize) -> Result<Self> {
        let mut terms = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| HamiltonianError::Parse { line: i + 1, message };
            let mut parts = line.split_whitespace();
            let (Some(g), Some(word), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err(format!("expected \"<gamma> <letters>\", got {line:?}")));
            };
            let gamma: f64 = g.parse().map_err(|_| err(format!("bad coefficient {g:?}")))?;
            let letters = word
                .chars()
                .map(|c| Pauli::from_char(c).ok_or_else(|| err(format!("bad letter {c:?}"))))
                .collect::<Result<Vec<_>>>()?;
            terms.push((gamma, letters));
        }
        let n = terms.first().map(|t| t.1.len()).ok_or(HamiltonianError::Empty)?;
        Self::new(n, k, terms)
    }

    pub fn m(&self) -> usize {
        self.terms.len()
    }

    /// (X mask, Z mask) of term j over qubit keys.
    pub fn masks(&self, j: usize) -> (u128, u128) {
        self.terms[j].1.iter().enumerate().fold((0, 0), |(x, z), (t, p)| match p {
            Pauli::X => (x | 1 << t, z),
            Pauli::Z => (x, z | 1 << t),
            Pauli::I => (x, z),
        })
    }

    /// ⟨ψ|H_j|ψ⟩ for one term, without the coefficient.
    pub fn term_expectation(&self, j: usize, psi: &SparseState) -> Result<f64> {
        if psi.num_qubits() != self.n {
            return Err(HamiltonianError::LengthMismatch { expected: self.n, got: psi.num_qubits() });
        }
        let (xm, zm) = self.masks(j);
        let mut acc = 0.0;
        for (key, a) in psi.iter() {
            let sign = if (key & zm).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            // H_j|key⟩ = (−1)^{z·key}|key ⊕ x⟩
            acc += (psi.amplitude(key ^ xm).conj() * a).re * sign;
        }
        Ok(acc)
    }

    /// ⟨ψ|H|ψ⟩.
    pub fn expectation(&self, psi: &SparseState) -> Result<f64> {
        let mut e = 0.0;
        for j in 0..self.m() {
            e += self.terms[j].0 * self.term_expectation(j, psi)?;
        }
        Ok(e)
    }

    /// Dense real matrix Σ γ_j H_j in the qubit-key basis.
    pub fn dense(&self) -> Result<DMatrix<f64>> {
        if self.n > MAX_DENSE_QUBITS {
            return Err(HamiltonianError::TooLarge(self.n));
        }
        let d = 1usize << self.n;
        let mut h = DMatrix::<f64>::zeros(d, d);
        for (j, (g, _)) in self.terms.iter().enumerate() {
            let (xm, zm) = self.masks(j);
            for key in 0..d {
                let sign = if (key as u128 & zm).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                h[((key as u128 ^ xm) as usize, key)] += g * sign;
            }
        }
        Ok(h)
    }
}

/// Smallest eigenvalue of H.
pub fn ground_energy(h: &XZHamiltonian) -> Result<f64> {
    let m = h.dense()?;
    Ok(SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

impl fmt::Display for XZHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (g, letters) in &self.terms {
            let word: String = letters.iter().map(|p| p.symbol()).collect();
            writeln!(f, "{g} {word}")?;
        }
        Ok(())
    }
}

impl FromStr for XZHamiltonian {
    type Err = HamiltonianError;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, DEFAULT_LOCALITY)
    }
}
