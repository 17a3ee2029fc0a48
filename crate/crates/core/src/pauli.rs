//! Pauli strings, real-weighted Pauli sums and dense statevectors.
//!
//! Qubit ordering is little-endian throughout the crate: qubit `q` is bit `q`
//! of a basis-state index, so `|0…01⟩` (index 1) has qubit 0 set.
//!
//! A [`PauliString`] is stored in symplectic form `(x_mask, z_mask)`. A qubit
//! with both bits set is `σ^y`; the factor `i` that makes `σ^y = i·σ^x·σ^z`
//! is applied inside the application routines, so every stored string is
//! exactly Hermitian and squares to the identity.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_qubits, invalid, PqsError, Result};

pub type C64 = Complex64;

/// Largest register a dense statevector may hold.
pub const MAX_STATE_QUBITS: usize = 30;

const I_POW: [C64; 4] = [
    C64::new(1.0, 0.0),
    C64::new(0.0, 1.0),
    C64::new(-1.0, 0.0),
    C64::new(0.0, -1.0),
];

/// Single-qubit Pauli label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }
}

/// Tensor product of single-qubit Paulis on `n_qubits` qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_qubits: usize,
    x_mask: u64,
    z_mask: u64,
}

fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    pub fn new(n_qubits: usize, x_mask: u64, z_mask: u64) -> Result<Self> {
        if n_qubits > 64 {
            return invalid(format!("pauli strings support at most 64 qubits, got {n_qubits}"));
        }
        let mask = low_mask(n_qubits);
        if x_mask & !mask != 0 || z_mask & !mask != 0 {
            return invalid(format!(
                "pauli masks ({x_mask:#x}, {z_mask:#x}) exceed {n_qubits} qubits"
            ));
        }
        Ok(Self {
            n_qubits,
            x_mask,
            z_mask,
        })
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            x_mask: 0,
            z_mask: 0,
        }
    }

    pub fn single(n_qubits: usize, qubit: usize, p: Pauli) -> Result<Self> {
        Self::from_ops(n_qubits, &[(qubit, p)])
    }

    /// Builds a string from `(qubit, pauli)` pairs; each qubit may appear once.
    pub fn from_ops(n_qubits: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        let mut s = Self::new(n_qubits, 0, 0)?;
        let mut seen = 0u64;
        for &(q, p) in ops {
            if q >= n_qubits {
                return invalid(format!("qubit {q} outside a {n_qubits}-qubit register"));
            }
            if seen & (1 << q) != 0 {
                return invalid(format!("qubit {q} listed twice in a pauli string"));
            }
            seen |= 1 << q;
            let (x, z) = p.bits();
            if x {
                s.x_mask |= 1 << q;
            }
            if z {
                s.z_mask |= 1 << q;
            }
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x_mask
    }

    pub fn z_mask(&self) -> u64 {
        self.z_mask
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        Pauli::from_bits(
            self.x_mask >> qubit & 1 == 1,
            self.z_mask >> qubit & 1 == 1,
        )
    }

    pub fn is_identity(&self) -> bool {
        self.x_mask == 0 && self.z_mask == 0
    }

    pub fn weight(&self) -> usize {
        (self.x_mask | self.z_mask).count_ones() as usize
    }

    pub fn support(&self) -> u64 {
        self.x_mask | self.z_mask
    }

    fn y_count(&self) -> u32 {
        (self.x_mask & self.z_mask).count_ones()
    }

    /// True when the matrix in the computational basis is diagonal.
    pub fn is_diagonal(&self) -> bool {
        self.x_mask == 0
    }

    /// True when the matrix is real (an even number of `Y` factors); otherwise
    /// it is purely imaginary.
    pub fn is_real(&self) -> bool {
        self.y_count() % 2 == 0
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x_mask & other.z_mask) ^ (self.z_mask & other.x_mask)).count_ones() % 2 == 0
    }

    /// Phase `⟨i ^ x| P |i⟩` picked up by basis state `i`.
    #[inline]
    pub fn phase(&self, index: usize) -> C64 {
        let sign = ((index as u64) & self.z_mask).count_ones() as usize * 2;
        I_POW[(self.y_count() as usize + sign) & 3]
    }

    /// Writes `P·input` into `out`.
    pub fn apply_into(&self, input: &[C64], out: &mut [C64]) {
        let x = self.x_mask as usize;
        let base = self.y_count() as usize;
        for (i, a) in input.iter().enumerate() {
            let sign = ((i as u64) & self.z_mask).count_ones() as usize * 2;
            out[i ^ x] = I_POW[(base + sign) & 3] * a;
        }
    }

    /// Accumulates `coeff·P·input` into `out`.
    pub fn apply_add(&self, coeff: f64, input: &[C64], out: &mut [C64]) {
        let x = self.x_mask as usize;
        let mut table = I_POW;
        for t in table.iter_mut() {
            *t *= coeff;
        }
        let base = self.y_count() as usize;
        for (i, a) in input.iter().enumerate() {
            let sign = ((i as u64) & self.z_mask).count_ones() as usize * 2;
            out[i ^ x] += table[(base + sign) & 3] * a;
        }
    }

    pub fn apply_in_place(&self, amps: &mut [C64]) {
        let x = self.x_mask as usize;
        if x == 0 {
            for (i, a) in amps.iter_mut().enumerate() {
                *a *= self.phase(i);
            }
            return;
        }
        for i in 0..amps.len() {
            let j = i ^ x;
            if i < j {
                let ai = amps[i];
                let aj = amps[j];
                amps[j] = self.phase(i) * ai;
                amps[i] = self.phase(j) * aj;
            }
        }
    }

    /// `⟨bra| P |ket⟩` without allocating.
    pub fn bilinear(&self, bra: &[C64], ket: &[C64]) -> C64 {
        let x = self.x_mask as usize;
        let base = self.y_count() as usize;
        let mut acc = [C64::new(0.0, 0.0); 4];
        for (i, a) in ket.iter().enumerate() {
            let sign = ((i as u64) & self.z_mask).count_ones() as usize * 2;
            acc[(base + sign) & 3] += bra[i ^ x].conj() * a;
        }
        acc[0] + I_POW[1] * acc[1] + I_POW[2] * acc[2] + I_POW[3] * acc[3]
    }

    /// Places this string on a larger register: local qubit `k` maps to
    /// global qubit `targets[k]`.
    pub fn embed(&self, n_total: usize, targets: &[usize]) -> Result<PauliString> {
        check_qubits(self.n_qubits, targets.len())?;
        let mut ops = Vec::with_capacity(self.weight());
        for (k, &g) in targets.iter().enumerate() {
            let p = self.get(k);
            if p != Pauli::I {
                ops.push((g, p));
            }
        }
        PauliString::from_ops(n_total, &ops)
    }

    /// Restricts to the listed qubits: global qubit `qubits[k]` becomes local `k`.
    pub fn restrict(&self, qubits: &[usize]) -> PauliString {
        let mut s = PauliString::identity(qubits.len());
        for (k, &g) in qubits.iter().enumerate() {
            s.x_mask |= (self.x_mask >> g & 1) << k;
            s.z_mask |= (self.z_mask >> g & 1) << k;
        }
        s
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            m[(i ^ self.x_mask as usize, i)] = self.phase(i);
        }
        m
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "I");
        }
        let mut first = true;
        for q in 0..self.n_qubits {
            let p = self.get(q);
            if p == Pauli::I {
                continue;
            }
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "{p:?}{q}")?;
        }
        Ok(())
    }
}

/// Real-weighted sum of Pauli strings on a common register.
///
/// Builders merge duplicate strings and drop terms whose merged coefficient
/// vanishes, so every stored string is unique.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

const ZERO_COEFF: f64 = 1e-14;

impl PauliSum {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: Vec::new(),
        }
    }

    pub fn from_terms<I>(n_qubits: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, PauliString)>,
    {
        let mut sum = Self::new(n_qubits);
        let mut index: HashMap<PauliString, usize> = HashMap::new();
        for (c, p) in terms {
            check_qubits(n_qubits, p.n_qubits())?;
            if !c.is_finite() {
                return invalid(format!("non-finite coefficient {c} on {p}"));
            }
            match index.get(&p) {
                Some(&k) => sum.terms[k].0 += c,
                None => {
                    index.insert(p, sum.terms.len());
                    sum.terms.push((c, p));
                }
            }
        }
        sum.terms.retain(|(c, _)| c.abs() > ZERO_COEFF);
        Ok(sum)
    }

    pub fn single(coeff: f64, p: PauliString) -> Self {
        Self::from_terms(p.n_qubits(), [(coeff, p)]).expect("single term is always valid")
    }

    pub fn add_term(&mut self, coeff: f64, p: PauliString) -> Result<()> {
        check_qubits(self.n_qubits, p.n_qubits())?;
        if !coeff.is_finite() {
            return invalid(format!("non-finite coefficient {coeff} on {p}"));
        }
        if let Some(k) = self.terms.iter().position(|(_, q)| *q == p) {
            self.terms[k].0 += coeff;
            if self.terms[k].0.abs() <= ZERO_COEFF {
                self.terms.remove(k);
            }
        } else if coeff.abs() > ZERO_COEFF {
            self.terms.push((coeff, p));
        }
        Ok(())
    }

    /// Sum of two operators on the same register.
    pub fn plus(&self, other: &PauliSum) -> Result<PauliSum> {
        check_qubits(self.n_qubits, other.n_qubits)?;
        PauliSum::from_terms(
            self.n_qubits,
            self.terms.iter().chain(other.terms.iter()).copied(),
        )
    }

    pub fn scaled(&self, factor: f64) -> PauliSum {
        PauliSum::from_terms(self.n_qubits, self.terms.iter().map(|&(c, p)| (c * factor, p)))
            .expect("scaling keeps a valid sum")
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, p: &PauliString) -> f64 {
        self.terms
            .iter()
            .find(|(_, q)| q == p)
            .map_or(0.0, |(c, _)| *c)
    }

    pub fn identity_coefficient(&self) -> f64 {
        self.coefficient(&PauliString::identity(self.n_qubits))
    }

    /// Splits off the identity component: `(constant, traceless part)`.
    pub fn split_constant(&self) -> (f64, PauliSum) {
        let c = self.identity_coefficient();
        let rest = PauliSum {
            n_qubits: self.n_qubits,
            terms: self
                .terms
                .iter()
                .filter(|(_, p)| !p.is_identity())
                .copied()
                .collect(),
        };
        (c, rest)
    }

    /// Sum of absolute coefficients, an upper bound on the operator norm.
    pub fn one_norm(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|(_, p)| p.is_real())
    }

    /// Writes `H·input` into `out` (overwriting it).
    pub fn apply_into(&self, input: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        for (c, p) in &self.terms {
            p.apply_add(*c, input, out);
        }
    }

    pub fn bilinear(&self, bra: &[C64], ket: &[C64]) -> C64 {
        self.terms
            .iter()
            .map(|(c, p)| p.bilinear(bra, ket) * *c)
            .sum()
    }

    pub fn embed(&self, n_total: usize, targets: &[usize]) -> Result<PauliSum> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (c, p) in &self.terms {
            terms.push((*c, p.embed(n_total, targets)?));
        }
        PauliSum::from_terms(n_total, terms)
    }

    /// Dense matrix; intended for oracles on small registers.
    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        if self.n_qubits > 12 {
            return Err(PqsError::ResourceLimit {
                what: "dense pauli-sum matrix qubits".into(),
                requested: self.n_qubits,
                limit: 12,
            });
        }
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for (c, p) in &self.terms {
            for i in 0..dim {
                m[(i ^ p.x_mask() as usize, i)] += p.phase(i) * *c;
            }
        }
        Ok(m)
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (c, p)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}·[{p}]")?;
        }
        Ok(())
    }
}

/// Dense complex statevector of `2^n_qubits` amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(n_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        if n_qubits > MAX_STATE_QUBITS {
            return Err(PqsError::ResourceLimit {
                what: "statevector qubits".into(),
                requested: n_qubits,
                limit: MAX_STATE_QUBITS,
            });
        }
        if amps.len() != 1 << n_qubits {
            return invalid(format!(
                "{} amplitudes do not describe {n_qubits} qubits",
                amps.len()
            ));
        }
        Ok(Self { n_qubits, amps })
    }

    /// The all-zero computational basis state.
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0).expect("index 0 is always valid")
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits.min(MAX_STATE_QUBITS)];
        if index >= amps.len() {
            return invalid(format!("basis index {index} outside {n_qubits} qubits"));
        }
        amps[index] = C64::new(1.0, 0.0);
        Self::new(n_qubits, amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: C64) {
        self.amps.iter_mut().for_each(|a| *a *= factor);
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_qubits(self.n_qubits, other.n_qubits)?;
        Ok(dot(&self.amps, &other.amps))
    }

    /// 2-norm of `self - other`.
    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        check_qubits(self.n_qubits, other.n_qubits)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Tensor product with `self` on the low qubits and `high` above it.
    pub fn kron(&self, high: &StateVector) -> Result<StateVector> {
        let n = self.n_qubits + high.n_qubits;
        if n > MAX_STATE_QUBITS {
            return Err(PqsError::ResourceLimit {
                what: "statevector qubits".into(),
                requested: n,
                limit: MAX_STATE_QUBITS,
            });
        }
        let mut amps = Vec::with_capacity(1 << n);
        for h in &high.amps {
            for l in &self.amps {
                amps.push(h * l);
            }
        }
        StateVector::new(n, amps)
    }
}

/// `Σ conj(a_i) b_i`.
#[inline]
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

/// Returns `P|ψ⟩`.
pub fn apply_pauli(state: &StateVector, p: &PauliString) -> Result<StateVector> {
    check_qubits(state.n_qubits, p.n_qubits())?;
    let mut out = state.clone();
    p.apply_in_place(&mut out.amps);
    Ok(out)
}

/// Returns `Σ_k c_k P_k |ψ⟩` without materialising a matrix.
pub fn apply_pauli_sum(state: &StateVector, h: &PauliSum) -> Result<StateVector> {
    check_qubits(state.n_qubits, h.n_qubits())?;
    let mut out = vec![C64::new(0.0, 0.0); state.dim()];
    h.apply_into(&state.amps, &mut out);
    StateVector::new(state.n_qubits, out)
}

/// Operator acting on one subsystem inside a product observable.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalOp {
    Identity,
    Pauli(PauliSum),
    /// Computational-basis projector `|s⟩⟨s|`.
    Projector(usize),
}

impl LocalOp {
    pub fn is_identity(&self) -> bool {
        matches!(self, LocalOp::Identity)
    }

    pub(crate) fn bilinear_raw(&self, bra: &[C64], ket: &[C64]) -> C64 {
        match self {
            LocalOp::Identity => dot(bra, ket),
            LocalOp::Pauli(h) => h.bilinear(bra, ket),
            LocalOp::Projector(s) => bra[*s].conj() * ket[*s],
        }
    }
}

/// `⟨bra| O |ket⟩`, real and imaginary parts.
pub fn bilinear(bra: &StateVector, op: &LocalOp, ket: &StateVector) -> Result<C64> {
    check_qubits(bra.n_qubits, ket.n_qubits)?;
    match op {
        LocalOp::Pauli(h) => check_qubits(bra.n_qubits, h.n_qubits())?,
        LocalOp::Projector(s) if *s >= bra.dim() => {
            return invalid(format!("projector index {s} outside {} qubits", bra.n_qubits))
        }
        _ => {}
    }
    Ok(op.bilinear_raw(&bra.amps, &ket.amps))
}
