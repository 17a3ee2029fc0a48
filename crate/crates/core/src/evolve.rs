//! Time evolution `e^{-iHt}|ψ⟩` for Pauli-sum Hamiltonians.
//!
//! Two routes:
//!
//! * [`evolve_krylov`]: Lanczos with full reorthogonalisation. The basis is
//!   grown until the a-posteriori estimate
//!   `‖ψ‖·β_m·|e_mᵀ exp(-i·dt·T_m) e_1|` fits the share `tol·dt/|t|` of the
//!   budget; if it never does within `max_krylov_dim` vectors the step is
//!   shortened and the remainder handled by further substeps.
//! * [`evolve_dense`] / [`SpectralPropagator`]: full diagonalisation, used as
//!   an oracle and as a cached propagator for small registers.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_qubits, invalid, PqsError, Result};
use crate::pauli::{dot, PauliSum, StateVector, C64};

/// Largest register accepted by the dense routines.
pub const DENSE_MAX_QUBITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolverConfig {
    /// 2-norm error budget per call.
    pub tolerance: f64,
    pub max_krylov_dim: usize,
    pub max_substeps: usize,
}

impl Default for EvolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_krylov_dim: 30,
            max_substeps: 1_000_000,
        }
    }
}

impl EvolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return invalid(format!("evolver tolerance must be positive, got {}", self.tolerance));
        }
        if self.max_krylov_dim < 2 {
            return invalid(format!(
                "max_krylov_dim must be at least 2, got {}",
                self.max_krylov_dim
            ));
        }
        if self.max_substeps == 0 {
            return invalid("max_substeps must be positive");
        }
        Ok(())
    }
}

/// Returns a state within `cfg.tolerance` of `e^{-iHt}|ψ⟩`.
pub fn evolve_krylov(
    state: &StateVector,
    h: &PauliSum,
    t: f64,
    cfg: &EvolverConfig,
) -> Result<StateVector> {
    check_qubits(state.n_qubits(), h.n_qubits())?;
    let mut out = state.clone();
    let mut ws = KrylovWorkspace::new(state.dim(), cfg)?;
    ws.evolve(h, out.amplitudes_mut(), t)?;
    Ok(out)
}

/// Reusable Lanczos buffers for repeated evolutions on one register size.
#[derive(Debug, Clone)]
pub struct KrylovWorkspace {
    cfg: EvolverConfig,
    dim: usize,
    basis: Vec<Vec<C64>>,
    w: Vec<C64>,
}

impl KrylovWorkspace {
    pub fn new(dim: usize, cfg: &EvolverConfig) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.max_krylov_dim.min(dim.max(1));
        Ok(Self {
            cfg: *cfg,
            dim,
            basis: (0..m).map(|_| vec![C64::new(0.0, 0.0); dim]).collect(),
            w: vec![C64::new(0.0, 0.0); dim],
        })
    }

    pub fn config(&self) -> &EvolverConfig {
        &self.cfg
    }

    /// Evolves `amps` in place by `e^{-iHt}`.
    pub fn evolve(&mut self, h: &PauliSum, amps: &mut [C64], t: f64) -> Result<()> {
        if amps.len() != self.dim {
            return invalid(format!(
                "workspace built for dimension {}, got {}",
                self.dim,
                amps.len()
            ));
        }
        if !t.is_finite() {
            return invalid(format!("evolution time must be finite, got {t}"));
        }
        if t == 0.0 || h.is_empty() {
            return Ok(());
        }
        let norm = dot(amps, amps).re.sqrt();
        if norm == 0.0 {
            return Ok(());
        }
        let total = t.abs();
        let sign = t.signum();
        let mut done = 0.0;
        let mut substeps = 0usize;
        let mut dt_guess = total;
        while done < total {
            if substeps >= self.cfg.max_substeps {
                return Err(PqsError::EvolutionFailure {
                    substeps,
                    residual: total - done,
                });
            }
            substeps += 1;
            let remaining = total - done;
            let dt = self
                .step(h, amps, norm, sign, remaining, dt_guess.min(remaining), total)
                .map_err(|e| match e {
                    PqsError::EvolutionFailure { residual, .. } => {
                        PqsError::EvolutionFailure { substeps, residual }
                    }
                    other => other,
                })?;
            done += dt;
            dt_guess = dt * 2.0;
            if remaining - dt <= total * 1e-15 {
                break;
            }
        }
        Ok(())
    }

    /// One Lanczos step of length at most `dt_try`; returns the length taken.
    /// `remaining` is only used on happy breakdown, where the subspace is exact.
    #[allow(clippy::too_many_arguments)]
    fn step(
        &mut self,
        h: &PauliSum,
        amps: &mut [C64],
        norm: f64,
        sign: f64,
        remaining: f64,
        dt_try: f64,
        total: f64,
    ) -> Result<f64> {
        let mmax = self.basis.len();
        let inv = 1.0 / norm;
        for (b, a) in self.basis[0].iter_mut().zip(amps.iter()) {
            *b = a * inv;
        }
        let mut alpha: Vec<f64> = Vec::with_capacity(mmax);
        let mut beta: Vec<f64> = Vec::with_capacity(mmax);
        let budget = |dt: f64| self.cfg.tolerance * dt / total;
        let mut chosen: Option<(usize, f64, Vec<C64>)> = None;

        for j in 0..mmax {
            h.apply_into(&self.basis[j], &mut self.w);
            // two passes of classical Gram-Schmidt against the whole basis
            let mut a_j = 0.0;
            for pass in 0..2 {
                for i in 0..=j {
                    let c = dot(&self.basis[i], &self.w);
                    if pass == 0 && i == j {
                        a_j = c.re;
                    }
                    axpy(&mut self.w, -c, &self.basis[i]);
                }
            }
            alpha.push(a_j);
            let b_j = dot(&self.w, &self.w).re.sqrt();
            let size = j + 1;
            let scale = alpha.iter().map(|a| a.abs()).fold(0.0, f64::max) + b_j;
            let breakdown = b_j <= 1e-13 * scale.max(1e-300);

            let err_at = |dt: f64| -> (f64, Vec<C64>) {
                let v = expm_e1(&alpha, &beta, sign * dt);
                (norm * b_j * v[size - 1].norm(), v)
            };
            if breakdown {
                let (_, v) = err_at(remaining);
                chosen = Some((size, remaining, v));
                break;
            }
            let (err, v) = err_at(dt_try);
            if err <= budget(dt_try) {
                chosen = Some((size, dt_try, v));
                break;
            }
            if size == mmax {
                let mut dt = dt_try;
                loop {
                    let (err, v) = err_at(dt);
                    if err <= budget(dt) {
                        chosen = Some((size, dt, v));
                        break;
                    }
                    dt *= 0.5;
                    if dt <= total * 1e-14 {
                        return Err(PqsError::EvolutionFailure {
                            substeps: usize::MAX,
                            residual: err,
                        });
                    }
                }
                break;
            }
            beta.push(b_j);
            let inv_b = 1.0 / b_j;
            for (n, w) in self.basis[j + 1].iter_mut().zip(self.w.iter()) {
                *n = w * inv_b;
            }
        }

        let (size, dt, coeffs) = chosen.expect("the Lanczos loop always selects a step");
        amps.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
        for (k, c) in coeffs.iter().enumerate().take(size) {
            axpy(amps, c * norm, &self.basis[k]);
        }
        Ok(dt)
    }
}

#[inline]
fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `exp(-i·t·T) e_1` for the tridiagonal `T` with diagonal `alpha` and
/// off-diagonal `beta`, by a Taylor series on `s` substeps with `‖tT‖/s ≤ ½`.
/// Keeps tiny trailing components accurate, which the error estimate needs.
fn expm_e1(alpha: &[f64], beta: &[f64], t: f64) -> Vec<C64> {
    let m = alpha.len();
    let row_norm = (0..m)
        .map(|i| {
            alpha[i].abs()
                + if i > 0 { beta[i - 1] } else { 0.0 }
                + if i < beta.len() { beta[i] } else { 0.0 }
        })
        .fold(0.0, f64::max);
    let steps = ((t.abs() * row_norm) / 0.5).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mul = |v: &[C64], out: &mut [C64]| {
        // out = -i h T v
        for i in 0..m {
            let mut acc = v[i] * alpha[i];
            if i > 0 {
                acc += v[i - 1] * beta[i - 1];
            }
            if i + 1 < m {
                acc += v[i + 1] * beta[i];
            }
            out[i] = C64::new(acc.im * h, -acc.re * h);
        }
    };
    let mut v = vec![C64::new(0.0, 0.0); m];
    v[0] = C64::new(1.0, 0.0);
    let mut term = vec![C64::new(0.0, 0.0); m];
    let mut next = vec![C64::new(0.0, 0.0); m];
    for _ in 0..steps {
        term.copy_from_slice(&v);
        for k in 1..60 {
            mul(&term, &mut next);
            let inv = 1.0 / k as f64;
            let mut size = 0.0f64;
            for (x, n) in term.iter_mut().zip(&next) {
                *x = n * inv;
                size = size.max(x.norm());
            }
            for (a, x) in v.iter_mut().zip(&term) {
                *a += x;
            }
            if size == 0.0 || (k >= m && size < 1e-18) {
                break;
            }
        }
    }
    v
}

/// Eigendecomposition of a Hamiltonian on a small register, kept for reuse.
///
/// When every term has an even number of `Y` factors the matrix is real
/// symmetric and the eigenbasis is stored as a real orthogonal matrix.
#[derive(Debug, Clone)]
pub struct SpectralPropagator {
    n_qubits: usize,
    energies: Vec<f64>,
    basis: EigenBasis,
}

#[derive(Debug, Clone)]
pub enum EigenBasis {
    Real(DMatrix<f64>),
    Complex(DMatrix<C64>),
}

impl SpectralPropagator {
    pub fn new(h: &PauliSum) -> Result<Self> {
        let n = h.n_qubits();
        if n > DENSE_MAX_QUBITS {
            return Err(PqsError::ResourceLimit {
                what: "dense evolution qubits".into(),
                requested: n,
                limit: DENSE_MAX_QUBITS,
            });
        }
        let dense = h.to_dense()?;
        let (energies, basis) = if h.is_real() {
            let re = dense.map(|c| c.re);
            let eig = SymmetricEigen::new(re);
            (eig.eigenvalues.as_slice().to_vec(), EigenBasis::Real(eig.eigenvectors))
        } else {
            let eig = SymmetricEigen::new(dense);
            (
                eig.eigenvalues.as_slice().to_vec(),
                EigenBasis::Complex(eig.eigenvectors),
            )
        };
        Ok(Self {
            n_qubits: n,
            energies,
            basis,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn basis(&self) -> &EigenBasis {
        &self.basis
    }

    /// Coefficients in the eigenbasis: `out = Vᴴ·amps`.
    pub fn to_eigen(&self, amps: &[C64], out: &mut [C64]) {
        match &self.basis {
            EigenBasis::Real(v) => real_tr_mul(v, amps, out),
            EigenBasis::Complex(v) => {
                let n = v.nrows();
                for (o, col) in out.iter_mut().zip(v.as_slice().chunks_exact(n)) {
                    *o = dot(col, amps);
                }
            }
        }
    }

    /// Back to the computational basis: `out = V·coeffs`.
    pub fn from_eigen(&self, coeffs: &[C64], out: &mut [C64]) {
        match &self.basis {
            EigenBasis::Real(v) => real_mul(v, coeffs, out),
            EigenBasis::Complex(v) => complex_mul(v, coeffs, out),
        }
    }

    /// Applies the diagonal phase `e^{-iE_k t}` to eigenbasis coefficients.
    pub fn advance(&self, coeffs: &mut [C64], t: f64) {
        for (c, e) in coeffs.iter_mut().zip(&self.energies) {
            *c *= C64::from_polar(1.0, -e * t);
        }
    }

    pub fn evolve(&self, state: &StateVector, t: f64) -> Result<StateVector> {
        check_qubits(self.n_qubits, state.n_qubits())?;
        if !t.is_finite() {
            return invalid(format!("evolution time must be finite, got {t}"));
        }
        let mut coeffs = vec![C64::new(0.0, 0.0); self.dim()];
        self.to_eigen(state.amplitudes(), &mut coeffs);
        self.advance(&mut coeffs, t);
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        self.from_eigen(&coeffs, &mut out);
        StateVector::new(self.n_qubits, out)
    }
}

/// `out = V·x` for real `V` stored column-major.
pub(crate) fn real_mul(v: &DMatrix<f64>, x: &[C64], out: &mut [C64]) {
    let n = v.nrows();
    out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
    for (col, c) in v.as_slice().chunks_exact(n).zip(x) {
        if c.re == 0.0 && c.im == 0.0 {
            continue;
        }
        let (cr, ci) = (c.re, c.im);
        for (o, a) in out.iter_mut().zip(col) {
            o.re += a * cr;
            o.im += a * ci;
        }
    }
}

/// `out = Vᵀ·x` for real `V` stored column-major.
pub(crate) fn real_tr_mul(v: &DMatrix<f64>, x: &[C64], out: &mut [C64]) {
    let n = v.nrows();
    for (o, col) in out.iter_mut().zip(v.as_slice().chunks_exact(n)) {
        let (mut re, mut im) = (0.0, 0.0);
        for (a, c) in col.iter().zip(x) {
            re += a * c.re;
            im += a * c.im;
        }
        *o = C64::new(re, im);
    }
}

/// `out = M·x` for complex `M` stored column-major.
pub(crate) fn complex_mul(m: &DMatrix<C64>, x: &[C64], out: &mut [C64]) {
    let n = m.nrows();
    out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
    for (col, c) in m.as_slice().chunks_exact(n).zip(x) {
        axpy(out, *c, col);
    }
}

/// `e^{-iHt}|ψ⟩` by full diagonalisation. Registers above
/// [`DENSE_MAX_QUBITS`] are refused.
pub fn evolve_dense(state: &StateVector, h: &PauliSum, t: f64) -> Result<StateVector> {
    check_qubits(state.n_qubits(), h.n_qubits())?;
    SpectralPropagator::new(h)?.evolve(state, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{Pauli, PauliString};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn single(n: usize, q: usize, p: Pauli, coef: f64) -> PauliSum {
        PauliSum::single(coef, PauliString::single(n, q, p).unwrap())
    }

    fn tfim(n: usize, j: f64, h: f64) -> PauliSum {
        let mut terms = Vec::new();
        for q in 0..n - 1 {
            terms.push((j, PauliString::from_ops(n, &[(q, Pauli::Z), (q + 1, Pauli::Z)]).unwrap()));
        }
        for q in 0..n {
            terms.push((h, PauliString::single(n, q, Pauli::X).unwrap()));
        }
        PauliSum::from_terms(n, terms).unwrap()
    }

    fn diff(a: &StateVector, b: &StateVector) -> f64 {
        a.distance(b).unwrap()
    }

    #[test]
    fn half_rabi_period() {
        let out = evolve_krylov(
            &StateVector::zero(1),
            &single(1, 0, Pauli::X, 1.0),
            FRAC_PI_2,
            &EvolverConfig::default(),
        )
        .unwrap();
        let expect = StateVector::new(1, vec![c(0.0, 0.0), c(0.0, -1.0)]).unwrap();
        assert!(diff(&out, &expect) < 1e-10);
    }

    #[test]
    fn eigenstate_picks_up_phase() {
        for &t in &[0.3, -1.7, 12.0] {
            let out = evolve_krylov(
                &StateVector::zero(1),
                &single(1, 0, Pauli::Z, 1.0),
                t,
                &EvolverConfig::default(),
            )
            .unwrap();
            assert!((out.amplitudes()[0] - C64::from_polar(1.0, -t)).norm() < 1e-10);
        }
    }

    #[test]
    fn krylov_matches_dense_on_tfim4() {
        let h = tfim(4, 1.0, 0.7);
        let psi = StateVector::basis(4, 5).unwrap();
        let a = evolve_krylov(&psi, &h, 1.0, &EvolverConfig::default()).unwrap();
        let b = evolve_dense(&psi, &h, 1.0).unwrap();
        assert!(diff(&a, &b) <= 1e-8);
    }

    #[test]
    fn long_times_take_several_substeps() {
        let h = tfim(6, 1.0, 1.3);
        let psi = StateVector::zero(6);
        let cfg = EvolverConfig {
            max_krylov_dim: 6,
            ..EvolverConfig::default()
        };
        let a = evolve_krylov(&psi, &h, 20.0, &cfg).unwrap();
        let b = evolve_dense(&psi, &h, 20.0).unwrap();
        assert!(diff(&a, &b) <= 1e-8, "{}", diff(&a, &b));
    }

    #[test]
    fn substep_cap_reports_failure() {
        let h = tfim(6, 1.0, 1.3);
        let cfg = EvolverConfig {
            max_krylov_dim: 2,
            max_substeps: 3,
            ..EvolverConfig::default()
        };
        let err = evolve_krylov(&StateVector::zero(6), &h, 50.0, &cfg).unwrap_err();
        assert!(matches!(err, PqsError::EvolutionFailure { .. }));
    }

    #[test]
    fn config_validation() {
        let bad = EvolverConfig {
            tolerance: 0.0,
            ..EvolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = EvolverConfig {
            max_krylov_dim: 1,
            ..EvolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn dense_trivial_cases() {
        let psi = StateVector::new(2, vec![c(0.5, 0.1), c(0.2, -0.3), c(0.0, 0.4), c(0.6, 0.0)]).unwrap();
        let h = tfim(2, 1.0, 0.5);
        assert!(diff(&evolve_dense(&psi, &h, 0.0).unwrap(), &psi) < 1e-14);
        assert!(diff(&evolve_dense(&psi, &PauliSum::new(2), 3.0).unwrap(), &psi) < 1e-14);
    }

    #[test]
    fn dense_zz_on_plus_plus() {
        let zz = PauliSum::single(1.0, PauliString::from_ops(2, &[(0, Pauli::Z), (1, Pauli::Z)]).unwrap());
        let pp = StateVector::new(2, vec![c(0.5, 0.0); 4]).unwrap();
        let mm = StateVector::new(2, vec![c(0.5, 0.0), c(-0.5, 0.0), c(-0.5, 0.0), c(0.5, 0.0)]).unwrap();
        let out = evolve_dense(&pp, &zz, FRAC_PI_4).unwrap();
        let (co, si) = (FRAC_PI_4.cos(), FRAC_PI_4.sin());
        let expect: Vec<C64> = pp
            .amplitudes()
            .iter()
            .zip(mm.amplitudes())
            .map(|(p, m)| p * co + m * c(0.0, -si))
            .collect();
        let expect = StateVector::new(2, expect).unwrap();
        assert!(diff(&out, &expect) < 1e-13);
    }

    #[test]
    fn dense_guard() {
        let h = single(11, 0, Pauli::X, 1.0);
        let err = evolve_dense(&StateVector::zero(11), &h, 1.0).unwrap_err();
        assert!(matches!(err, PqsError::ResourceLimit { .. }));
    }

    #[test]
    fn complex_hamiltonian_uses_complex_basis() {
        let h = single(1, 0, Pauli::Y, 1.0);
        let prop = SpectralPropagator::new(&h).unwrap();
        assert!(matches!(prop.basis(), EigenBasis::Complex(_)));
        // e^{-iYt}|0⟩ = cos t|0⟩ + sin t|1⟩
        let out = prop.evolve(&StateVector::zero(1), 0.4).unwrap();
        assert!((out.amplitudes()[1] - c(0.4f64.sin(), 0.0)).norm() < 1e-14);
    }

    fn arb_sum(n: usize) -> impl Strategy<Value = PauliSum> {
        let m = (1u64 << n) - 1;
        prop::collection::vec((-1.5f64..1.5, any::<u64>(), any::<u64>()), 1..10).prop_map(move |t| {
            PauliSum::from_terms(
                n,
                t.into_iter()
                    .map(|(c, x, z)| (c, PauliString::new(n, x & m, z & m).unwrap())),
            )
            .unwrap()
        })
    }

    fn arb_state(n: usize) -> impl Strategy<Value = StateVector> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n).prop_map(move |v| {
            let mut s = StateVector::new(n, v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap();
            let nrm = s.norm().max(1e-3);
            s.scale(c(1.0 / nrm, 0.0));
            s
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn norm_is_preserved(h in arb_sum(5), psi in arb_state(5), t in -3.0f64..3.0) {
            let n0 = psi.norm();
            let out = evolve_krylov(&psi, &h, t, &EvolverConfig::default()).unwrap();
            prop_assert!((out.norm() - n0).abs() <= 1e-9);
        }

        #[test]
        fn composition(h in arb_sum(6), psi in arb_state(6), t1 in -1.5f64..1.5, t2 in -1.5f64..1.5) {
            let cfg = EvolverConfig::default();
            let two = evolve_krylov(&evolve_krylov(&psi, &h, t1, &cfg).unwrap(), &h, t2, &cfg).unwrap();
            let one = evolve_krylov(&psi, &h, t1 + t2, &cfg).unwrap();
            prop_assert!(diff(&two, &one) <= 2.0 * cfg.tolerance);
        }

        #[test]
        fn reversibility(h in arb_sum(6), psi in arb_state(6), t in -2.0f64..2.0) {
            let cfg = EvolverConfig::default();
            let back = evolve_krylov(&evolve_krylov(&psi, &h, t, &cfg).unwrap(), &h, -t, &cfg).unwrap();
            prop_assert!(diff(&back, &psi) <= 2.0 * cfg.tolerance);
        }

        #[test]
        fn krylov_agrees_with_dense(n in 1usize..=6, seed in any::<u64>(), t in -2.0f64..2.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = (1u64 << n) - 1;
            let terms: Vec<_> = (0..6)
                .map(|_| (rng.random_range(-1.0..1.0), PauliString::new(n, rng.random::<u64>() & m, rng.random::<u64>() & m).unwrap()))
                .collect();
            let h = PauliSum::from_terms(n, terms).unwrap();
            let amps: Vec<C64> = (0..1 << n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let mut psi = StateVector::new(n, amps).unwrap();
            let nrm = psi.norm();
            psi.scale(c(1.0 / nrm, 0.0));
            let a = evolve_krylov(&psi, &h, t, &EvolverConfig::default()).unwrap();
            let b = evolve_dense(&psi, &h, t).unwrap();
            prop_assert!(diff(&a, &b) <= 1e-8);
        }
    }
}
