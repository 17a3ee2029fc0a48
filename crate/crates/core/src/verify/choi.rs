//! Trace-norm lower bound on the sampling rate of any product decomposition
//! of `ρ ↦ -i(Vρ - ρV)`, and the orthogonality condition under which the
//! explicit Pauli expansion attains it.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{check_qubits, invalid, PqsError, Result};
use crate::models::InteractionTerm;
use crate::pauli::{PauliString, C64};

/// Largest subsystem accepted by the bound; each factor is vectorised as
/// `4^n` entries.
pub const CHOI_MAX_QUBITS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    /// `max_l ‖ψ_l‖₁`.
    pub lower_bound: f64,
    /// `2Σ_j |λ_j|`.
    pub explicit_cost_rate: f64,
    pub condition1: bool,
    pub per_subsystem_norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Condition1Report {
    pub satisfied: bool,
    /// Subsystems acted on by at least one term.
    pub support: Vec<usize>,
    pub violations: Vec<String>,
    pub n_terms: usize,
    /// Smallest factor weight over the support.
    pub min_weight: Option<usize>,
    /// Fewest qubits of a supported subsystem.
    pub min_qubits: Option<usize>,
    /// `3^k C(n, k)` for the two values above.
    pub term_limit: Option<u128>,
}

fn check_shapes(interactions: &[InteractionTerm], sizes: &[usize]) -> Result<()> {
    for t in interactions {
        if t.factors.len() != sizes.len() {
            return invalid(format!(
                "interaction has {} factors for {} subsystems",
                t.factors.len(),
                sizes.len()
            ));
        }
        for (f, &n) in t.factors.iter().zip(sizes) {
            check_qubits(n, f.n_qubits())?;
        }
    }
    Ok(())
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Checks that on every touched subsystem all factors are non-identity and
/// pairwise distinct Pauli strings.
pub fn check_condition1(interactions: &[InteractionTerm], sizes: &[usize]) -> Result<Condition1Report> {
    check_shapes(interactions, sizes)?;
    let support: Vec<usize> = (0..sizes.len())
        .filter(|&l| interactions.iter().any(|t| !t.factors[l].is_identity()))
        .collect();
    let mut violations = Vec::new();
    for &l in &support {
        for (j, t) in interactions.iter().enumerate() {
            if t.factors[l].is_identity() {
                violations.push(format!("term {j} is the identity on subsystem {l}"));
            }
        }
        for a in 0..interactions.len() {
            for b in a + 1..interactions.len() {
                let (fa, fb) = (&interactions[a].factors[l], &interactions[b].factors[l]);
                if fa == fb && !fa.is_identity() {
                    violations.push(format!("terms {a} and {b} share the factor {fa} on subsystem {l}"));
                }
            }
        }
    }
    let min_weight = support
        .iter()
        .flat_map(|&l| interactions.iter().map(move |t| t.factors[l].weight()))
        .filter(|&w| w > 0)
        .min();
    let min_qubits = support.iter().map(|&l| sizes[l]).min();
    let term_limit = match (min_weight, min_qubits) {
        (Some(k), Some(n)) if k <= n => Some(3u128.pow(k as u32) * binomial(n, k)),
        _ => None,
    };
    Ok(Condition1Report {
        satisfied: violations.is_empty(),
        support,
        violations,
        n_terms: interactions.len(),
        min_weight,
        min_qubits,
        term_limit,
    })
}

/// Nonzero entries `(row, col, value)` of `(P ⊗ I)|φ⟩⟨φ|` (left) or
/// `|φ⟩⟨φ|(P ⊗ I)` (right) on one `(l, l')` pair, indices `a·d + a'`.
fn local_entries(p: &PauliString, left: bool) -> Vec<(usize, usize, C64)> {
    let d = 1usize << p.n_qubits();
    let x = p.x_mask() as usize;
    let norm = 1.0 / d as f64;
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for k in 0..d {
            let (row, col, v) = if left {
                // P|i⟩ = phase(i)|i ^ x⟩
                ((i ^ x) * d + i, k * d + k, p.phase(i) * norm)
            } else {
                // ⟨k|P = phase(k ^ x)⟨k ^ x| = conj(phase(k))⟨k ^ x|
                (i * d + i, (k ^ x) * d + k, p.phase(k).conj() * norm)
            };
            out.push((row, col, v));
        }
    }
    out
}

/// `vec` of one term side's local factor, sorted by index.
fn local_vector(p: &PauliString, left: bool) -> Vec<(usize, C64)> {
    let dd = 1usize << (2 * p.n_qubits());
    let mut v: Vec<(usize, C64)> = local_entries(p, left).into_iter().map(|(r, c, x)| (r * dd + c, x)).collect();
    v.sort_unstable_by_key(|e| e.0);
    v
}

/// `⟨a|b⟩` of two sorted sparse vectors.
fn inner(a: &[(usize, C64)], b: &[(usize, C64)]) -> C64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = C64::new(0.0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1.conj() * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// `R` with `R†R = G` for a Hermitian PSD Gram matrix, null directions dropped.
fn gram_factor(g: DMatrix<C64>) -> DMatrix<C64> {
    let eig = g.symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > 1e-13 * top.max(1e-300))
        .collect();
    let k = eig.eigenvectors.ncols();
    DMatrix::from_fn(keep.len(), k, |r, c| {
        let i = keep[r];
        eig.eigenvectors[(c, i)].conj() * eig.eigenvalues[i].sqrt()
    })
}

/// Trace norm of the reshuffled Choi matrix of `ρ ↦ -i(Vρ - ρV)` with
/// `S` on subsystem `l` and `T` on the rest.
///
/// Each term side contributes `coeff · u_l w_lᵀ`, with `u_l` the vectorised
/// local factor on `l` and `w_l` the tensor product of the others, so the
/// matrix is `U C Wᵀ` and its singular values are those of `R_U C R_Wᵀ`.
fn trace_norms(interactions: &[InteractionTerm], sizes: &[usize]) -> Vec<f64> {
    let mut coeffs = Vec::new();
    let mut vecs: Vec<Vec<Vec<(usize, C64)>>> = vec![Vec::new(); sizes.len()];
    for t in interactions {
        for left in [true, false] {
            coeffs.push(if left { C64::new(0.0, -t.lambda) } else { C64::new(0.0, t.lambda) });
            for (m, f) in t.factors.iter().enumerate() {
                vecs[m].push(local_vector(f, left));
            }
        }
    }
    let k = coeffs.len();
    if k == 0 {
        return vec![0.0; sizes.len()];
    }
    let grams: Vec<DMatrix<C64>> = vecs
        .iter()
        .map(|v| {
            let mut g = DMatrix::from_fn(k, k, |a, b| if a <= b { inner(&v[a], &v[b]) } else { C64::new(0.0, 0.0) });
            for a in 0..k {
                for b in 0..a {
                    g[(a, b)] = g[(b, a)].conj();
                }
            }
            g
        })
        .collect();
    (0..sizes.len())
        .map(|l| {
            let mut gw = DMatrix::from_element(k, k, C64::new(1.0, 0.0));
            for (m, g) in grams.iter().enumerate() {
                if m != l {
                    gw.component_mul_assign(g);
                }
            }
            let ru = gram_factor(grams[l].clone());
            let rw = gram_factor(gw);
            let c = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(coeffs.clone()));
            let core = ru * c * rw.transpose();
            if core.is_empty() {
                0.0
            } else {
                core.singular_values().sum()
            }
        })
        .collect()
}

/// Trace-norm lower bound together with the rate of the explicit expansion.
pub fn choi_lower_bound(interactions: &[InteractionTerm], sizes: &[usize]) -> Result<BoundReport> {
    check_shapes(interactions, sizes)?;
    if let Some(&n) = sizes.iter().max().filter(|&&n| n > CHOI_MAX_QUBITS) {
        return Err(PqsError::ResourceLimit {
            what: "choi bound subsystem qubits".into(),
            requested: n,
            limit: CHOI_MAX_QUBITS,
        });
    }
    let explicit_cost_rate = 2.0 * interactions.iter().map(|t| t.lambda.abs()).sum::<f64>();
    let condition1 = check_condition1(interactions, sizes)?.satisfied;
    let per_subsystem_norms = trace_norms(interactions, sizes);
    let lower_bound = per_subsystem_norms.iter().copied().fold(0.0, f64::max);
    Ok(BoundReport {
        lower_bound,
        explicit_cost_rate,
        condition1,
        per_subsystem_norms,
    })
}
