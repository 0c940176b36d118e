use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::qsim::{
    gates, sub_index, Basis, Bits, DensityView, Labels, PureBranch, RegKind, RegisterLayout, SparseState, C64,
    MAX_SPARSE_QUBITS,
};

use super::{Chooser, ProtocolError};

/// Who may act on a quantum register.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Owner {
    Server,
    /// Reference systems outside the server's reach (e.g. the P half of Φ).
    Environment,
}

#[derive(Clone, Debug)]
struct QReg {
    factor: u64,
    qubits: Vec<usize>,
    owner: Owner,
    seq: u64,
}

/// Run-time state of a protocol execution: quantum registers kept as a
/// product of independent sparse factors, plus classical client records and
/// the server's classical memory.
#[derive(Clone, Debug, Default)]
pub struct World {
    factors: BTreeMap<u64, SparseState>,
    regs: BTreeMap<String, QReg>,
    next_factor: u64,
    next_seq: u64,
    client: BTreeMap<String, Bits>,
    server_mem: BTreeMap<String, Bits>,
}

fn bits_of(key: u128, pos: &[usize]) -> Bits {
    Bits::from_bools(pos.iter().map(|&p| (key >> p) & 1 == 1).collect())
}

fn write_bits(key: u128, pos: &[usize], b: &Bits) -> u128 {
    let mut k = key;
    for (i, &p) in pos.iter().enumerate() {
        k = (k & !(1u128 << p)) | ((b.get(i) as u128) << p);
    }
    k
}

impl World {
    pub fn new() -> Self {
        Self::default()
    }

    // ---- registers ----

    pub fn alloc(&mut self, name: &str, state: SparseState, owner: Owner) -> Result<(), ProtocolError> {
        if self.regs.contains_key(name) {
            return Err(ProtocolError::DuplicateRegister(name.to_string()));
        }
        let fid = self.next_factor;
        self.next_factor += 1;
        let n = state.num_qubits();
        self.factors.insert(fid, state);
        self.regs.insert(name.to_string(), QReg { factor: fid, qubits: (0..n).collect(), owner, seq: self.next_seq });
        self.next_seq += 1;
        Ok(())
    }

    pub fn alloc_zero(&mut self, name: &str, width: usize, owner: Owner) -> Result<(), ProtocolError> {
        self.alloc(name, SparseState::zero(width), owner)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.regs.contains_key(name)
    }

    fn reg(&self, name: &str) -> Result<&QReg, ProtocolError> {
        self.regs.get(name).ok_or_else(|| ProtocolError::UnknownRegister(name.to_string()))
    }

    pub fn width(&self, name: &str) -> Result<usize, ProtocolError> {
        Ok(self.reg(name)?.qubits.len())
    }

    pub fn owner(&self, name: &str) -> Result<Owner, ProtocolError> {
        Ok(self.reg(name)?.owner)
    }

    /// Quantum register names in creation order.
    pub fn registers(&self) -> Vec<String> {
        let mut v: Vec<(&u64, &String)> = self.regs.iter().map(|(n, r)| (&r.seq, n)).collect();
        v.sort();
        v.into_iter().map(|(_, n)| n.clone()).collect()
    }

    pub fn rename(&mut self, old: &str, new: &str) -> Result<(), ProtocolError> {
        if old == new {
            return Ok(());
        }
        if self.regs.contains_key(new) {
            return Err(ProtocolError::DuplicateRegister(new.to_string()));
        }
        let r = self.regs.remove(old).ok_or_else(|| ProtocolError::UnknownRegister(old.to_string()))?;
        self.regs.insert(new.to_string(), r);
        Ok(())
    }

    /// Joins several registers into one new register (concatenated in order).
    pub fn fuse(&mut self, new: &str, parts: &[&str]) -> Result<(), ProtocolError> {
        if self.regs.contains_key(new) && !parts.contains(&new) {
            return Err(ProtocolError::DuplicateRegister(new.to_string()));
        }
        let fid = self.join(parts)?;
        let mut qubits = Vec::new();
        let mut owner = Owner::Server;
        let mut seq = u64::MAX;
        for p in parts {
            let r = self.regs.remove(*p).ok_or_else(|| ProtocolError::UnknownRegister(p.to_string()))?;
            qubits.extend(r.qubits);
            if r.owner == Owner::Environment {
                owner = Owner::Environment;
            }
            seq = seq.min(r.seq);
        }
        self.regs.insert(new.to_string(), QReg { factor: fid, qubits, owner, seq });
        Ok(())
    }

    /// Splits a register into consecutive pieces with the given names and widths.
    pub fn split(&mut self, name: &str, pieces: &[(String, usize)]) -> Result<(), ProtocolError> {
        let r = self.reg(name)?.clone();
        if pieces.iter().map(|p| p.1).sum::<usize>() != r.qubits.len() {
            return Err(ProtocolError::LayoutMismatch(format!("split widths do not cover {name}")));
        }
        self.regs.remove(name);
        let mut off = 0;
        for (i, (pn, w)) in pieces.iter().enumerate() {
            if self.regs.contains_key(pn) {
                return Err(ProtocolError::DuplicateRegister(pn.clone()));
            }
            self.regs.insert(
                pn.clone(),
                QReg { factor: r.factor, qubits: r.qubits[off..off + w].to_vec(), owner: r.owner, seq: r.seq * 1000 + i as u64 },
            );
            off += w;
        }
        Ok(())
    }

    /// Merges the factors holding `names` into one; returns its id.
    fn join(&mut self, names: &[&str]) -> Result<u64, ProtocolError> {
        let mut fids: Vec<u64> = Vec::new();
        for n in names {
            let f = self.reg(n)?.factor;
            if !fids.contains(&f) {
                fids.push(f);
            }
        }
        let first = *fids.first().ok_or(ProtocolError::LayoutMismatch("no registers".into()))?;
        for &f in &fids[1..] {
            let b = self.factors.remove(&f).expect("factor exists");
            let a = &self.factors[&first];
            if a.num_qubits() + b.num_qubits() > MAX_SPARSE_QUBITS {
                return Err(ProtocolError::TooLarge(format!(
                    "joint factor of {} qubits",
                    a.num_qubits() + b.num_qubits()
                )));
            }
            let off = a.num_qubits();
            let merged = a.tensor(&b)?;
            self.factors.insert(first, merged);
            for r in self.regs.values_mut() {
                if r.factor == f {
                    r.factor = first;
                    for q in &mut r.qubits {
                        *q += off;
                    }
                }
            }
        }
        Ok(first)
    }

    fn positions(&mut self, targets: &[(&str, usize)]) -> Result<(u64, Vec<usize>), ProtocolError> {
        let names: Vec<&str> = targets.iter().map(|t| t.0).collect();
        let fid = self.join(&names)?;
        let mut pos = Vec::new();
        for (n, i) in targets {
            let r = self.reg(n)?;
            let q = *r.qubits.get(*i).ok_or(ProtocolError::Qsim(crate::qsim::QsimError::IndexOutOfRange {
                index: *i,
                width: r.qubits.len(),
            }))?;
            pos.push(q);
        }
        Ok((fid, pos))
    }

    fn reg_positions(&mut self, regs: &[&str]) -> Result<(u64, Vec<Vec<usize>>), ProtocolError> {
        let fid = self.join(regs)?;
        let mut out = Vec::new();
        for r in regs {
            out.push(self.reg(r)?.qubits.clone());
        }
        Ok((fid, out))
    }

    /// Tries to move `name` into its own factor; returns whether it succeeded.
    pub fn try_separate(&mut self, name: &str) -> Result<bool, ProtocolError> {
        let r = self.reg(name)?.clone();
        let st = &self.factors[&r.factor];
        if st.num_qubits() == r.qubits.len() {
            // already alone; normalize ordering
            let perm = st.permute_qubits(&r.qubits)?;
            self.factors.insert(r.factor, perm);
            self.regs.get_mut(name).unwrap().qubits = (0..r.qubits.len()).collect();
            return Ok(true);
        }
        let Some((mine, rest)) = st.try_factor(&r.qubits) else {
            return Ok(false);
        };
        let remaining: Vec<usize> = (0..st.num_qubits()).filter(|q| !r.qubits.contains(q)).collect();
        self.factors.insert(r.factor, rest);
        for (n, o) in self.regs.iter_mut() {
            if o.factor == r.factor && n != name {
                for q in &mut o.qubits {
                    *q = remaining.binary_search(q).expect("qubit kept");
                }
            }
        }
        let fid = self.next_factor;
        self.next_factor += 1;
        self.factors.insert(fid, mine);
        let e = self.regs.get_mut(name).unwrap();
        e.factor = fid;
        e.qubits = (0..r.qubits.len()).collect();
        Ok(true)
    }

    /// Removes a register from the world. A register that cannot be split off
    /// is first measured in the computational basis with the outcome forgotten.
    pub fn discard(&mut self, name: &str, ch: &mut dyn Chooser) -> Result<(), ProtocolError> {
        if !self.try_separate(name)? {
            self.measure(&[name], Basis::Computational, ch)?;
            if !self.try_separate(name)? {
                return Err(ProtocolError::Internal(format!("could not separate {name} after measurement")));
            }
        }
        let r = self.regs.remove(name).unwrap();
        self.factors.remove(&r.factor);
        Ok(())
    }

    /// Replaces a register's content by a fresh state (old content discarded).
    pub fn replace(&mut self, name: &str, state: SparseState, ch: &mut dyn Chooser) -> Result<(), ProtocolError> {
        let owner = self.owner(name)?;
        let seq = self.reg(name)?.seq;
        self.discard(name, ch)?;
        self.alloc(name, state, owner)?;
        self.regs.get_mut(name).unwrap().seq = seq;
        Ok(())
    }

    // ---- operations ----

    pub fn apply_gate(&mut self, targets: &[(&str, usize)], gate: &DMatrix<C64>) -> Result<(), ProtocolError> {
        if !gates::is_unitary(gate, 1e-10) {
            return Err(ProtocolError::Qsim(crate::qsim::QsimError::NonUnitaryGate));
        }
        let (fid, pos) = self.positions(targets)?;
        self.factors.get_mut(&fid).unwrap().apply_matrix(&pos, gate)?;
        Ok(())
    }

    /// Applies a single-qubit gate to every qubit of a register.
    pub fn apply_each(&mut self, reg: &str, gate: &DMatrix<C64>) -> Result<(), ProtocolError> {
        for i in 0..self.width(reg)? {
            self.apply_gate(&[(reg, i)], gate)?;
        }
        Ok(())
    }

    /// Applies a reversible classical map to the joint basis values of `regs`.
    pub fn apply_classical(&mut self, regs: &[&str], f: &dyn Fn(&mut [Bits])) -> Result<(), ProtocolError> {
        let (fid, pos) = self.reg_positions(regs)?;
        self.factors.get_mut(&fid).unwrap().apply_classical(|k| {
            let mut vals: Vec<Bits> = pos.iter().map(|p| bits_of(k, p)).collect();
            f(&mut vals);
            let mut nk = k;
            for (p, v) in pos.iter().zip(&vals) {
                nk = write_bits(nk, p, v);
            }
            nk
        })?;
        Ok(())
    }

    /// Multiplies each basis component by a phase depending on the values of `regs`.
    pub fn apply_phase(&mut self, regs: &[&str], f: &dyn Fn(&[Bits]) -> C64) -> Result<(), ProtocolError> {
        let (fid, pos) = self.reg_positions(regs)?;
        self.factors.get_mut(&fid).unwrap().apply_phase(|k| {
            let vals: Vec<Bits> = pos.iter().map(|p| bits_of(k, p)).collect();
            f(&vals)
        });
        Ok(())
    }

    fn measure_positions(
        &mut self,
        fid: u64,
        rot: &[(Vec<usize>, DMatrix<C64>)],
        outcome: &dyn Fn(u128) -> u64,
        ch: &mut dyn Chooser,
    ) -> Result<u64, ProtocolError> {
        let st = self.factors.get_mut(&fid).unwrap();
        for (q, u) in rot {
            st.apply_matrix(q, u)?;
        }
        let dist: Vec<(u64, f64)> = st.distribution(outcome).into_iter().filter(|(_, p)| *p >= 1e-13).collect();
        let probs: Vec<f64> = dist.iter().map(|d| d.1).collect();
        let o = dist[ch.choose(&probs)].0;
        let mut post = st.project(|k| outcome(k) == o);
        post.normalize();
        for (q, u) in rot.iter().rev() {
            post.apply_matrix(q, &u.adjoint())?;
        }
        *st = post;
        Ok(o)
    }

    /// Measures every qubit of `regs` in `basis`; returns the concatenated outcome.
    pub fn measure(&mut self, regs: &[&str], basis: Basis, ch: &mut dyn Chooser) -> Result<Bits, ProtocolError> {
        let (fid, pos) = self.reg_positions(regs)?;
        let flat: Vec<usize> = pos.concat();
        let rot: Vec<(Vec<usize>, DMatrix<C64>)> = match basis {
            Basis::Computational => Vec::new(),
            Basis::Hadamard => flat.iter().map(|&q| (vec![q], gates::h())).collect(),
            Basis::Rotated(phi) => flat.iter().map(|&q| (vec![q], gates::rotated_to_computational(phi as i64))).collect(),
        };
        let out = if flat.len() <= 64 {
            let f = flat.clone();
            let o = self.measure_positions(fid, &rot, &move |k| sub_index(k, &f) as u64, ch)?;
            Bits::from_uint(o, flat.len())
        } else {
            // wide registers: one qubit at a time
            let mut b = Bits::zeros(0);
            for (i, &q) in flat.iter().enumerate() {
                let r = if rot.is_empty() { &[][..] } else { &rot[i..i + 1] };
                let o = self.measure_positions(fid, r, &move |k| ((k >> q) & 1) as u64, ch)?;
                b.push(o == 1);
            }
            b
        };
        for r in regs {
            self.try_separate(r)?;
        }
        Ok(out)
    }

    /// Measures one qubit of a register.
    pub fn measure_qubit(&mut self, reg: &str, i: usize, basis: Basis, ch: &mut dyn Chooser) -> Result<bool, ProtocolError> {
        let (fid, pos) = self.positions(&[(reg, i)])?;
        let q = pos[0];
        let rot = match basis {
            Basis::Computational => vec![],
            Basis::Hadamard => vec![(vec![q], gates::h())],
            Basis::Rotated(phi) => vec![(vec![q], gates::rotated_to_computational(phi as i64))],
        };
        let o = self.measure_positions(fid, &rot, &move |k| ((k >> q) & 1) as u64, ch)?;
        Ok(o == 1)
    }

    /// Projective parity measurement over all qubits of `regs`.
    pub fn measure_parity(&mut self, regs: &[&str], ch: &mut dyn Chooser) -> Result<bool, ProtocolError> {
        let (fid, pos) = self.reg_positions(regs)?;
        let mask = pos.concat().iter().fold(0u128, |m, &q| m | 1u128 << q);
        let o = self.measure_positions(fid, &[], &move |k| ((k & mask).count_ones() % 2) as u64, ch)?;
        Ok(o == 1)
    }

    /// Measures a classical function of the joint values of `regs`.
    pub fn measure_fn(&mut self, regs: &[&str], f: &dyn Fn(&[Bits]) -> u64, ch: &mut dyn Chooser) -> Result<u64, ProtocolError> {
        let (fid, pos) = self.reg_positions(regs)?;
        let g = move |k: u128| {
            let vals: Vec<Bits> = pos.iter().map(|p| bits_of(k, p)).collect();
            f(&vals)
        };
        self.measure_positions(fid, &[], &g, ch)
    }

    /// Bell measurement of qubit `a` with qubit `b`; returns (a_bit, b_bit) for
    /// the outcome X^a Z^b |Φ⟩ (Pauli on the first qubit).
    pub fn measure_bell(&mut self, a: (&str, usize), b: (&str, usize), ch: &mut dyn Chooser) -> Result<(bool, bool), ProtocolError> {
        let (fid, pos) = self.positions(&[a, b])?;
        let (p, q) = (pos[0], pos[1]);
        let rot = vec![(vec![p, q], gates::cnot()), (vec![p], gates::h())];
        let o = self.measure_positions(fid, &rot, &move |k| (((k >> q) & 1) << 1 | ((k >> p) & 1)) as u64, ch)?;
        Ok((o >> 1 == 1, o & 1 == 1))
    }

    /// Applies one of several Kraus maps (chosen by the Born rule) to the
    /// joint value of `regs`. The inputs are consumed; when `out_width > 0`
    /// the output appears as register `out`. Returns the chosen index.
    pub fn apply_instrument(
        &mut self,
        regs: &[&str],
        out: Option<&str>,
        out_width: usize,
        kraus: &[DMatrix<C64>],
        ch: &mut dyn Chooser,
    ) -> Result<usize, ProtocolError> {
        let (fid, pos) = self.reg_positions(regs)?;
        let flat = pos.concat();
        let owner = self.owner(regs[0])?;
        let st = &self.factors[&fid];
        let mut cands = Vec::new();
        for k in kraus {
            cands.push(st.apply_map(&flat, out_width, k)?);
        }
        let probs: Vec<f64> = cands.iter().map(|c| c.norm_sqr()).collect();
        let live: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] >= 1e-13).collect();
        let pick = live[ch.choose(&live.iter().map(|&i| probs[i]).collect::<Vec<_>>())];
        let mut post = cands.swap_remove(pick);
        post.normalize();
        let old_n = st.num_qubits();
        let remaining: Vec<usize> = (0..old_n).filter(|q| !flat.contains(q)).collect();
        for r in regs {
            self.regs.remove(*r);
        }
        for o in self.regs.values_mut() {
            if o.factor == fid {
                for q in &mut o.qubits {
                    *q = remaining.binary_search(q).expect("qubit kept");
                }
            }
        }
        let base = remaining.len();
        self.factors.insert(fid, post);
        if out_width > 0 {
            let name = out.ok_or_else(|| ProtocolError::LayoutMismatch("instrument output needs a name".into()))?;
            if self.regs.contains_key(name) {
                return Err(ProtocolError::DuplicateRegister(name.to_string()));
            }
            self.regs.insert(
                name.to_string(),
                QReg { factor: fid, qubits: (base..base + out_width).collect(), owner, seq: self.next_seq },
            );
            self.next_seq += 1;
            self.try_separate(name)?;
        } else if base == 0 {
            self.factors.remove(&fid);
        }
        Ok(pick)
    }

    // ---- inspection ----

    /// Reduced density operator of `regs` (concatenated in order).
    pub fn density(&self, regs: &[&str]) -> Result<DensityView, ProtocolError> {
        let mut fids: Vec<u64> = Vec::new();
        for r in regs {
            let f = self.reg(r)?.factor;
            if !fids.contains(&f) {
                fids.push(f);
            }
        }
        let mut joint = SparseState::zero(0);
        let mut offsets = BTreeMap::new();
        for f in &fids {
            offsets.insert(*f, joint.num_qubits());
            joint = joint.tensor(&self.factors[f])?;
        }
        let mut sel = Vec::new();
        for r in regs {
            let q = self.reg(r)?;
            sel.extend(q.qubits.iter().map(|x| x + offsets[&q.factor]));
        }
        Ok(DensityView::reduce([(1.0, &joint)], &sel))
    }

    /// Pure state of `regs` if they are jointly unentangled with everything else.
    pub fn pure_state(&self, regs: &[&str]) -> Result<Option<SparseState>, ProtocolError> {
        let mut w = self.clone();
        let fid = w.join(regs)?;
        let mut sel = Vec::new();
        for r in regs {
            sel.extend(w.reg(r)?.qubits.clone());
        }
        let st = &w.factors[&fid];
        if st.num_qubits() == sel.len() {
            return Ok(Some(st.permute_qubits(&sel)?));
        }
        Ok(st.try_factor(&sel).map(|(a, _)| a))
    }

    // ---- classical records ----

    /// Client registers are write-once.
    pub fn set_client(&mut self, name: &str, value: Bits) -> Result<(), ProtocolError> {
        if self.client.contains_key(name) {
            return Err(ProtocolError::ClientRegisterRewrite(name.to_string()));
        }
        self.client.insert(name.to_string(), value);
        Ok(())
    }

    pub fn client(&self, name: &str) -> Option<&Bits> {
        self.client.get(name)
    }

    pub fn client_records(&self) -> &BTreeMap<String, Bits> {
        &self.client
    }

    pub fn forget_client(&mut self, name: &str) {
        self.client.remove(name);
    }

    pub fn remember(&mut self, key: &str, value: Bits) {
        self.server_mem.insert(key.to_string(), value);
    }

    pub fn server_memory(&self, key: &str) -> Option<&Bits> {
        self.server_mem.get(key)
    }

    /// The whole world as one cq branch: quantum registers in creation order,
    /// labels restricted to `labels`.
    pub fn to_branch(&self, labels: &Labels, weight: f64) -> Result<(RegisterLayout, PureBranch), ProtocolError> {
        let names = self.registers();
        let total: usize = names.iter().map(|n| self.regs[n].qubits.len()).sum();
        if total > MAX_SPARSE_QUBITS {
            return Err(ProtocolError::TooLarge(format!("final state of {total} qubits")));
        }
        let mut layout = RegisterLayout::with_max(total.max(crate::qsim::DEFAULT_MAX_QUANTUM_WIDTH));
        let mut joint = SparseState::zero(0);
        let mut offsets = BTreeMap::new();
        for (f, st) in &self.factors {
            offsets.insert(*f, joint.num_qubits());
            joint = joint.tensor(st)?;
        }
        let mut order = Vec::new();
        for n in &names {
            let r = &self.regs[n];
            layout.push(n, RegKind::Quantum, r.qubits.len())?;
            order.extend(r.qubits.iter().map(|q| q + offsets[&r.factor]));
        }
        for (n, v) in labels {
            layout.push(n, RegKind::Classical, v.len())?;
        }
        let mut state = if joint.num_qubits() == order.len() {
            joint.permute_qubits(&order)?
        } else {
            return Err(ProtocolError::Internal("orphan qubits in world".into()));
        };
        state.normalize();
        Ok((layout, PureBranch { label: labels.clone(), weight, state }))
    }

    /// Loads a pure branch: quantum registers in layout order, labels as client records.
    pub fn load(&mut self, layout: &RegisterLayout, branch: &PureBranch, owner_of: &dyn Fn(&str) -> Owner) -> Result<(), ProtocolError> {
        let names = layout.quantum_names();
        if names.is_empty() {
            for (k, v) in &branch.label {
                self.set_client(k, v.clone())?;
            }
            return Ok(());
        }
        let fid = self.next_factor;
        self.next_factor += 1;
        self.factors.insert(fid, branch.state.clone());
        for n in &names {
            if self.regs.contains_key(n) {
                return Err(ProtocolError::DuplicateRegister(n.clone()));
            }
            let q = layout.qubits_of(n)?;
            self.regs.insert(n.clone(), QReg { factor: fid, qubits: q, owner: owner_of(n), seq: self.next_seq });
            self.next_seq += 1;
        }
        for n in &names {
            self.try_separate(n)?;
        }
        for (k, v) in &branch.label {
            self.set_client(k, v.clone())?;
        }
        Ok(())
    }

    /// Number of qubits in the largest factor.
    pub fn largest_factor(&self) -> usize {
        self.factors.values().map(|f| f.num_qubits()).max().unwrap_or(0)
    }
}

/// Reads the bits at `positions` of a basis index.
pub fn register_value(key: u128, positions: &[usize]) -> Bits {
    bits_of(key, positions)
}
