use serde::{Deserialize, Serialize};

use super::QsimError;

pub const DEFAULT_MAX_QUANTUM_WIDTH: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegKind {
    Quantum,
    Classical,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegEntry {
    pub name: String,
    pub kind: RegKind,
    pub width: usize,
}

/// Ordered named registers. Quantum registers occupy consecutive qubits in
/// declaration order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    entries: Vec<RegEntry>,
    max_quantum: usize,
}

impl Default for RegisterLayout {
    fn default() -> Self {
        RegisterLayout { entries: Vec::new(), max_quantum: DEFAULT_MAX_QUANTUM_WIDTH }
    }
}

impl RegisterLayout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_max(max_quantum: usize) -> Self {
        RegisterLayout { entries: Vec::new(), max_quantum }
    }

    pub fn max_quantum(&self) -> usize {
        self.max_quantum
    }

    pub fn push(&mut self, name: &str, kind: RegKind, width: usize) -> Result<(), QsimError> {
        if width == 0 {
            return Err(QsimError::BadLayout(format!("register {name} has width 0")));
        }
        if self.entries.iter().any(|e| e.name == name) {
            return Err(QsimError::BadLayout(format!("duplicate register {name}")));
        }
        if kind == RegKind::Quantum && self.quantum_width() + width > self.max_quantum {
            return Err(QsimError::TooManyQubits { requested: self.quantum_width() + width, max: self.max_quantum });
        }
        self.entries.push(RegEntry { name: name.to_string(), kind, width });
        Ok(())
    }

    pub fn quantum(mut self, name: &str, width: usize) -> Result<Self, QsimError> {
        self.push(name, RegKind::Quantum, width)?;
        Ok(self)
    }

    pub fn classical(mut self, name: &str, width: usize) -> Result<Self, QsimError> {
        self.push(name, RegKind::Classical, width)?;
        Ok(self)
    }

    pub fn entries(&self) -> &[RegEntry] {
        &self.entries
    }

    pub fn entry(&self, name: &str) -> Option<&RegEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn quantum_width(&self) -> usize {
        self.entries.iter().filter(|e| e.kind == RegKind::Quantum).map(|e| e.width).sum()
    }

    pub fn quantum_names(&self) -> Vec<String> {
        self.entries.iter().filter(|e| e.kind == RegKind::Quantum).map(|e| e.name.clone()).collect()
    }

    pub fn classical_names(&self) -> Vec<String> {
        self.entries.iter().filter(|e| e.kind == RegKind::Classical).map(|e| e.name.clone()).collect()
    }

    /// Global qubit indices of a quantum register.
    pub fn qubits_of(&self, name: &str) -> Result<Vec<usize>, QsimError> {
        let mut off = 0;
        for e in &self.entries {
            if e.kind != RegKind::Quantum {
                continue;
            }
            if e.name == name {
                return Ok((off..off + e.width).collect());
            }
            off += e.width;
        }
        Err(QsimError::UnknownRegister(name.to_string()))
    }

    /// Concatenation; `other`'s quantum registers follow this layout's.
    pub fn concat(&self, other: &RegisterLayout) -> Result<RegisterLayout, QsimError> {
        let mut out = RegisterLayout::with_max(self.max_quantum.max(other.max_quantum));
        for e in self.entries.iter().chain(&other.entries) {
            out.push(&e.name, e.kind, e.width)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qubit_offsets_skip_classical() {
        let l = RegisterLayout::new().quantum("A", 2).unwrap().classical("c", 3).unwrap().quantum("B", 1).unwrap();
        assert_eq!(l.qubits_of("B").unwrap(), vec![2]);
        assert_eq!(l.quantum_width(), 3);
        assert!(l.qubits_of("c").is_err());
    }

    #[test]
    fn rejects_duplicates_zero_width_and_overflow() {
        assert!(RegisterLayout::new().quantum("A", 0).is_err());
        assert!(RegisterLayout::new().quantum("A", 1).unwrap().classical("A", 1).is_err());
        assert!(RegisterLayout::new().quantum("A", 25).is_err());
        assert!(RegisterLayout::with_max(40).quantum("A", 25).is_ok());
    }
}
