//! The reduction chain: one-block key pairs from BB84 rounds, tensored
//! blocks, the multi-block two-mode protocol and its information-theoretic
//! core, the key-pair protocol, and the scored phase-state protocol.

mod itcore;
mod kp;
mod multi_block;
mod one_block;
mod qfac;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qsim::Bits;

pub use itcore::{itcore_distance, rank_one_distance, ItAdversary, ItCoreReport, ItCoreSettings};
pub use kp::{kp_in, kp_inverse, kp_reveal, kp_state, paper_m0, Kp, KpBackend, KpReveal, KpRun};
pub use multi_block::{multi_block_in, MultiBlock, MultiBlockRun};
pub use one_block::{one_block_in, one_block_rounds, superposition, one_block_tensor_in, select_indices, BlockRun, OneBlock, OneBlockTensor, Selection};
pub use qfac::{basis_blindness, circular_distance, flag_rule, honest_win_probability, score_rule, theta_of, BasisBlindness, QFac};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("bit string {0} does not have exactly one set bit")]
    NotUnary(String),
    #[error("width {0} is not a power of two")]
    NotPowerOfTwo(usize),
}

/// A client-side key pair (x0, x1) of equal width.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeyPair {
    pub x0: Bits,
    pub x1: Bits,
}

impl KeyPair {
    pub fn new(x0: Bits, x1: Bits) -> Self {
        assert_eq!(x0.len(), x1.len(), "key halves differ in width");
        Self { x0, x1 }
    }

    pub fn width(&self) -> usize {
        self.x0.len()
    }

    pub fn get(&self, b: bool) -> &Bits {
        if b {
            &self.x1
        } else {
            &self.x0
        }
    }

    pub fn difference(&self) -> Bits {
        self.x0.xor(&self.x1)
    }

    /// HW(x0⊕x1) = 1 and Parity(x0) = 0.
    pub fn is_one_block(&self) -> bool {
        self.difference().weight() == 1 && !self.x0.parity()
    }

    /// The pair with halves swapped when `b` is set.
    pub fn relabel(&self, b: bool) -> KeyPair {
        if b {
            KeyPair::new(self.x1.clone(), self.x0.clone())
        } else {
            self.clone()
        }
    }
}

/// n blocks of key pairs plus the n−1 reported xor bits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockKeys {
    pub blocks: Vec<KeyPair>,
    pub xor_bits: Vec<bool>,
}

impl BlockKeys {
    /// Splits concatenated x0/x1 records into blocks of width m.
    pub fn from_records(x0: &Bits, x1: &Bits, m: usize, xor: &Bits) -> Self {
        let n = if m == 0 { 0 } else { x0.len() / m };
        let blocks = (0..n).map(|i| KeyPair::new(x0.slice(i * m, (i + 1) * m), x1.slice(i * m, (i + 1) * m))).collect();
        Self { blocks, xor_bits: xor.iter().collect() }
    }

    /// Concatenation x_b^(1)‖…‖x_b^(n).
    pub fn joint(&self, b: bool) -> Bits {
        self.blocks.iter().fold(Bits::zeros(0), |acc, k| acc.concat(k.get(b)))
    }

    /// The first block's x0 has even parity.
    pub fn is_well_formed(&self) -> bool {
        self.blocks.first().is_none_or(|k| !k.x0.parity()) && self.xor_bits.len() + 1 == self.blocks.len().max(1)
    }
}

/// θ ∈ 0..8 with θ = 4θ1 + 2θ2 + θ3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ThetaRecord {
    pub theta: u8,
}

impl ThetaRecord {
    pub fn new(theta: u8) -> Self {
        Self { theta: theta % 8 }
    }

    pub fn from_parts(t1: bool, t2: bool, t3: bool) -> Self {
        Self::new(4 * t1 as u8 + 2 * t2 as u8 + t3 as u8)
    }

    pub fn parts(self) -> (bool, bool, bool) {
        (self.theta & 4 != 0, self.theta & 2 != 0, self.theta & 1 != 0)
    }

    pub fn to_bits(self) -> Bits {
        Bits::from_uint(self.theta as u64, 3)
    }

    pub fn from_bits(b: &Bits) -> Option<Self> {
        (b.len() == 3).then(|| Self::new(b.to_uint() as u8))
    }
}

/// Position of the single set bit of `s`, MSB-first in log2(m) bits.
pub fn u2b(s: &Bits) -> Result<Bits, ChainError> {
    let m = s.len();
    if !m.is_power_of_two() {
        return Err(ChainError::NotPowerOfTwo(m));
    }
    if s.weight() != 1 {
        return Err(ChainError::NotUnary(s.to_string()));
    }
    let p = s.iter().position(|b| b).expect("one set bit");
    Ok(Bits::from_uint(p as u64, m.trailing_zeros() as usize))
}

/// Inverse of [`u2b`]: the unary string of width 2^len(b).
pub fn b2u(b: &Bits) -> Bits {
    Bits::unit(1 << b.len(), b.to_uint() as usize)
}
