//! Reference results: exact full-register evolution, cost bounds for the
//! cross-term expansion, truncated-series formulas and the nearest-neighbour
//! light-cone bound.

mod choi;

pub use choi::{check_condition1, choi_lower_bound, BoundReport, Condition1Report, CHOI_MAX_QUBITS};

use crate::error::{check_qubits, invalid, PqsError, Result};
use crate::evolve::{EvolverConfig, KrylovWorkspace, SpectralPropagator, DENSE_MAX_QUBITS};
use crate::models::{ObservableSum, PartitionedSystem};
use crate::pauli::{dot, LocalOp, PauliSum, StateVector, C64};

/// Largest register handled by [`oracle_evolve_expect`].
pub const ORACLE_MAX_QUBITS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
enum Factor {
    Pauli(PauliSum),
    /// Keeps amplitudes with `i & mask == value`.
    Mask { mask: usize, value: usize },
}

/// Sum of products of commuting factors on a full register.
#[derive(Debug, Clone, PartialEq)]
pub struct FullOperator {
    n_qubits: usize,
    terms: Vec<(f64, Vec<Factor>)>,
}

impl FullOperator {
    pub fn from_pauli_sum(op: &PauliSum) -> Self {
        Self {
            n_qubits: op.n_qubits(),
            terms: vec![(1.0, vec![Factor::Pauli(op.clone())])],
        }
    }

    /// Lifts a partitioned observable to the full register.
    pub fn from_observable(obs: &ObservableSum, system: &PartitionedSystem) -> Result<Self> {
        obs.validate(system.subsystem_sizes())?;
        let n = system.n_qubits();
        let mut terms = Vec::with_capacity(obs.terms.len());
        for (c, ops) in &obs.terms {
            let mut factors = Vec::new();
            for (l, op) in ops.iter().enumerate() {
                let qubits = system.qubits(l);
                match op {
                    LocalOp::Identity => {}
                    LocalOp::Pauli(h) => factors.push(Factor::Pauli(h.embed(n, &qubits)?)),
                    LocalOp::Projector(s) => {
                        let mut mask = 0;
                        let mut value = 0;
                        for (k, &q) in qubits.iter().enumerate() {
                            mask |= 1 << q;
                            value |= ((s >> k) & 1) << q;
                        }
                        factors.push(Factor::Mask { mask, value });
                    }
                }
            }
            terms.push((*c, factors));
        }
        Ok(Self { n_qubits: n, terms })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// `⟨ψ|O|ψ⟩`.
    pub fn expectation(&self, psi: &[C64]) -> C64 {
        let mut cur = vec![C64::new(0.0, 0.0); psi.len()];
        let mut tmp = vec![C64::new(0.0, 0.0); psi.len()];
        let mut total = C64::new(0.0, 0.0);
        for (c, factors) in &self.terms {
            cur.copy_from_slice(psi);
            for f in factors {
                match f {
                    Factor::Pauli(h) => {
                        h.apply_into(&cur, &mut tmp);
                        std::mem::swap(&mut cur, &mut tmp);
                    }
                    Factor::Mask { mask, value } => {
                        for (i, a) in cur.iter_mut().enumerate() {
                            if i & mask != *value {
                                *a = C64::new(0.0, 0.0);
                            }
                        }
                    }
                }
            }
            total += dot(psi, &cur) * *c;
        }
        total
    }
}

/// Product of per-subsystem states, first subsystem on the lowest qubits.
pub fn product_state(parts: &[StateVector]) -> Result<StateVector> {
    let Some((first, rest)) = parts.split_first() else {
        return invalid("product of zero states");
    };
    rest.iter().try_fold(first.clone(), |acc, s| acc.kron(s))
}

/// Exact `⟨O(t)⟩` for each operator and grid time, `[observable][time]`.
/// Uses a dense eigendecomposition up to the dense limit and Krylov above.
pub fn oracle_evolve_expect(
    full: &PauliSum,
    initial: &StateVector,
    observables: &[FullOperator],
    grid: &[f64],
    evolver: &EvolverConfig,
) -> Result<Vec<Vec<f64>>> {
    let n = full.n_qubits();
    if n > ORACLE_MAX_QUBITS {
        return Err(PqsError::ResourceLimit {
            what: "oracle qubits".into(),
            requested: n,
            limit: ORACLE_MAX_QUBITS,
        });
    }
    check_qubits(n, initial.n_qubits())?;
    for o in observables {
        check_qubits(n, o.n_qubits())?;
    }
    if grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) || grid.windows(2).any(|w| w[1] < w[0]) {
        return invalid("oracle grid must be finite, non-negative and ascending");
    }
    let mut out = vec![Vec::with_capacity(grid.len()); observables.len()];
    let mut record = |psi: &[C64]| {
        for (row, o) in out.iter_mut().zip(observables) {
            row.push(o.expectation(psi).re);
        }
    };
    if n <= DENSE_MAX_QUBITS {
        let prop = SpectralPropagator::new(full)?;
        for &t in grid {
            record(prop.evolve(initial, t)?.amplitudes());
        }
    } else {
        let mut ws = KrylovWorkspace::new(initial.dim(), evolver)?;
        let mut psi = initial.amplitudes().to_vec();
        let mut now = 0.0;
        for &t in grid {
            ws.evolve(full, &mut psi, t - now)?;
            now = t;
            record(&psi);
        }
    }
    Ok(out)
}

/// Overhead of the order-`k` truncated expansion, `Σ_{n≤k} (2Tλ)^n/n!`.
pub fn dyson_cost(k: usize, lambda_total: f64, t: f64) -> f64 {
    let x = 2.0 * t * lambda_total;
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..=k {
        term *= x / n as f64;
        sum += term;
    }
    sum
}

/// Truncation error envelope `e^{‖V‖T} (‖V‖T)^{k+1}/(k+1)!`, up to a
/// constant factor.
pub fn dyson_error_bound(k: usize, v_norm: f64, t: f64) -> f64 {
    let x = v_norm * t;
    let mut term = x.exp();
    for n in 1..=k + 1 {
        term *= x / n as f64;
    }
    term
}

/// Modified Bessel function `I_d(x)` from its power series.
pub fn bessel_i(d: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    for k in 1..=d {
        term *= half / k as f64;
    }
    if term == 0.0 {
        return 0.0;
    }
    let q = half * half;
    let mut sum = term;
    let mut m = 0u32;
    loop {
        m += 1;
        term *= q / (m as f64 * (m + d) as f64);
        sum += term;
        if term <= sum * 1e-17 {
            return sum;
        }
    }
}

/// Nearest-neighbour light-cone bound `I_d(4Jt)`.
pub fn lr_bound_nn(d: u32, j: f64, t: f64) -> f64 {
    bessel_i(d, 4.0 * j.abs() * t)
}
