//! Jordan-Wigner image of the spinful Hubbard chain and its non-interacting
//! Slater ground state.
//!
//! Mapping with `n = (I - Z)/2` (|1⟩ occupied), spin-up site `j` on qubit
//! `j`, spin-down site `j` on qubit `L + j`:
//!
//! ```text
//! -J (c†_j c_{j+1} + h.c.)  ->  -J/2 (X_j X_{j+1} + Y_j Y_{j+1})
//! U n_j↑ n_j↓               ->   U/4 (Z_j↑ Z_j↓ - Z_j↑ - Z_j↓ + I)
//! h n                       ->  -h/2 Z + h/2
//! ```
//!
//! Neighbouring sites are adjacent in the qubit order, so no parity strings
//! survive in the hopping terms.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{partition, ModelSpec, PartitionedSystem};
use crate::error::{invalid, PqsError, Result};
use crate::pauli::{Pauli, PauliString, PauliSum, StateVector, C64};

/// Gaussian potential well of depth 4 and width 1 centred on the chain.
pub fn default_h_up(l: usize) -> Vec<f64> {
    let centre = (l as f64 + 1.0) / 2.0;
    (1..=l)
        .map(|j| {
            let d = j as f64 - centre;
            -4.0 * (-d * d / 2.0).exp()
        })
        .collect()
}

pub(crate) struct HubbardParams {
    pub l: usize,
    pub j: f64,
    pub u: f64,
    pub h_up: Vec<f64>,
    pub h_dn: Vec<f64>,
    pub n_up: usize,
    pub n_dn: usize,
}

pub(crate) fn params(spec: &ModelSpec) -> Result<HubbardParams> {
    match spec {
        ModelSpec::FermiHubbard {
            l,
            j,
            u,
            h_up,
            h_dn,
            n_up,
            n_dn,
        } => Ok(HubbardParams {
            l: *l,
            j: *j,
            u: *u,
            h_up: h_up.clone().unwrap_or_else(|| default_h_up(*l)),
            h_dn: h_dn.clone().unwrap_or_else(|| vec![0.0; *l]),
            n_up: *n_up,
            n_dn: *n_dn,
        }),
        other => invalid(format!("expected a fermi-hubbard model, got {}", other.family())),
    }
}

/// Returns the traceless Pauli image and the dropped identity coefficient.
pub(crate) fn jw_terms(spec: &ModelSpec) -> Result<(PauliSum, f64)> {
    spec.validate()?;
    let p = params(spec)?;
    let l = p.l;
    let n = 2 * l;
    let mut terms = Vec::new();
    let mut constant = 0.0;
    for sector in 0..2 {
        let base = sector * l;
        for s in 0..l - 1 {
            for op in [Pauli::X, Pauli::Y] {
                terms.push((
                    -p.j / 2.0,
                    PauliString::from_ops(n, &[(base + s, op), (base + s + 1, op)])?,
                ));
            }
        }
        let h = if sector == 0 { &p.h_up } else { &p.h_dn };
        for (s, hs) in h.iter().enumerate() {
            terms.push((-hs / 2.0, PauliString::single(n, base + s, Pauli::Z)?));
            constant += hs / 2.0;
        }
    }
    for s in 0..l {
        terms.push((
            p.u / 4.0,
            PauliString::from_ops(n, &[(s, Pauli::Z), (l + s, Pauli::Z)])?,
        ));
        terms.push((-p.u / 4.0, PauliString::single(n, s, Pauli::Z)?));
        terms.push((-p.u / 4.0, PauliString::single(n, l + s, Pauli::Z)?));
        constant += p.u / 4.0;
    }
    Ok((PauliSum::from_terms(n, terms)?, constant))
}

/// Full Pauli image (constant dropped) and its spin-cut partition.
pub fn jw_fermi_hubbard(spec: &ModelSpec) -> Result<(PauliSum, PartitionedSystem)> {
    let (full, _) = jw_terms(spec)?;
    let p = params(spec)?;
    let sys = partition(spec, &[p.l, p.l])?;
    Ok((full, sys))
}

/// Slater determinant filling the lowest orbitals of one spin sector.
#[derive(Debug, Clone)]
pub struct SlaterState {
    pub state: StateVector,
    /// Sum of the occupied orbital energies.
    pub energy: f64,
    pub orbital_energies: Vec<f64>,
}

impl SlaterState {
    /// Ground state of `-J Σ (c†_j c_{j+1} + h.c.) + Σ h_j n_j` with `filling`
    /// particles.
    pub fn sector(l: usize, j: f64, h: &[f64], filling: usize) -> Result<Self> {
        if h.len() != l {
            return invalid(format!("{} potentials for {l} sites", h.len()));
        }
        if filling > l {
            return invalid(format!("filling {filling} exceeds {l} sites"));
        }
        let mut m = DMatrix::<f64>::zeros(l, l);
        for s in 0..l {
            m[(s, s)] = h[s];
            if s + 1 < l {
                m[(s, s + 1)] = -j;
                m[(s + 1, s)] = -j;
            }
        }
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..l).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let energies: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        if filling > 0 && filling < l && (energies[filling] - energies[filling - 1]).abs() < 1e-12 {
            return Err(PqsError::Ambiguity(format!(
                "orbitals {} and {} are degenerate at the Fermi level (energy {}); \
                 choose the occupied orbitals explicitly",
                filling,
                filling + 1,
                energies[filling - 1]
            )));
        }
        let phi = DMatrix::from_fn(l, filling, |r, c| eig.eigenvectors[(r, order[c])]);
        let mut amps = vec![C64::new(0.0, 0.0); 1 << l];
        for (idx, a) in amps.iter_mut().enumerate() {
            if (idx as u64).count_ones() as usize != filling {
                continue;
            }
            let rows: Vec<usize> = (0..l).filter(|s| idx >> s & 1 == 1).collect();
            let sub = DMatrix::from_fn(filling, filling, |r, c| phi[(rows[r], c)]);
            *a = C64::new(if filling == 0 { 1.0 } else { sub.determinant() }, 0.0);
        }
        let mut state = StateVector::new(l, amps)?;
        let norm = state.norm();
        state.scale(C64::new(1.0 / norm, 0.0));
        Ok(Self {
            state,
            energy: energies[..filling].iter().sum(),
            orbital_energies: energies,
        })
    }
}

/// Non-interacting ground state as a product of the two sector Slater states.
pub fn ground_state_noninteracting(spec: &ModelSpec) -> Result<(StateVector, StateVector)> {
    spec.validate()?;
    let p = params(spec)?;
    let up = SlaterState::sector(p.l, p.j, &p.h_up, p.n_up)?;
    let dn = SlaterState::sector(p.l, p.j, &p.h_dn, p.n_dn)?;
    Ok((up.state, dn.state))
}
