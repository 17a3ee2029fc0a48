//! Per-subsystem propagation backends used inside a trajectory.
//!
//! A branch that has not received any insertion is `Free`: it equals the
//! freely evolved initial state, whose snapshots at the grid times (and
//! expectation values there) are computed once per engine. Only touched
//! branches carry their own storage.
//!
//! * `Spectral`: branches are eigenbasis coefficients in the interaction
//!   frame, `ψ(t) = V e^{-iEt} c`. Free evolution is free of cost; an
//!   insertion of `P` at time `t` is `c ← e^{iEt} (VᴴPV) e^{-iEt} c` with
//!   `VᴴPV` precomputed per factor.
//! * `Krylov` and `Trotter`: branches are computational-basis amplitudes
//!   stamped with the time they refer to, advanced on demand. The Trotter
//!   backend applies first-order steps of length `T/steps` anchored at 0,
//!   diagonal terms first, and splits a step at every insertion and grid
//!   time.

use nalgebra::DMatrix;

use crate::error::{PqsError, Result};
use crate::evolve::{
    complex_mul, real_mul, EigenBasis, EvolverConfig, KrylovWorkspace, SpectralPropagator,
    DENSE_MAX_QUBITS,
};
use crate::pauli::{LocalOp, PauliString, PauliSum, C64};

use super::LocalMethod;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone)]
pub(crate) enum Branch {
    Free,
    Eigen(Vec<C64>),
    Comp { amps: Vec<C64>, time: f64 },
}

#[derive(Debug, Clone)]
enum JumpMatrix {
    /// `phase · R` with `R` real.
    Real(C64, DMatrix<f64>),
    Complex(DMatrix<C64>),
}

#[derive(Debug, Clone)]
enum Kind {
    Spectral {
        prop: SpectralPropagator,
        psi0: Vec<C64>,
        /// Indexed by interaction term; `None` where the factor is identity.
        jumps: Vec<Option<JumpMatrix>>,
        grid_phase: Vec<Vec<C64>>,
    },
    Krylov {
        h: PauliSum,
    },
    Trotter {
        diag: Vec<(f64, PauliString)>,
        rest: Vec<(f64, PauliString)>,
        step: f64,
    },
}

/// Scratch buffers owned by one worker.
pub(crate) struct Scratch {
    krylov: Option<KrylovWorkspace>,
    a: Vec<C64>,
    b: Vec<C64>,
    c: Vec<C64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Local {
    n_qubits: usize,
    dim: usize,
    kind: Kind,
    evolver: EvolverConfig,
    factors: Vec<PauliString>,
    grid: Vec<f64>,
    /// `(time, state)` anchors: `t = 0` and every grid time, ascending.
    anchors: Vec<(f64, Vec<C64>)>,
    /// Index into `anchors` of each grid time.
    grid_anchor: Vec<usize>,
    horizon_state: Vec<C64>,
    pub(crate) ops: Vec<LocalOp>,
    /// `[grid][op]` expectation values of the free branch.
    pub(crate) free_vals: Vec<Vec<C64>>,
}

impl Local {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        h: &PauliSum,
        psi0: &[C64],
        factors: Vec<PauliString>,
        ops: Vec<LocalOp>,
        grid: &[f64],
        horizon: f64,
        method: LocalMethod,
        evolver: &EvolverConfig,
    ) -> Result<Self> {
        let n = h.n_qubits();
        let dim = 1usize << n;
        let method = match method {
            LocalMethod::Auto if n <= DENSE_MAX_QUBITS => LocalMethod::Spectral,
            LocalMethod::Auto => LocalMethod::Krylov,
            m => m,
        };
        let kind = match method {
            LocalMethod::Spectral => {
                let prop = SpectralPropagator::new(h)?;
                let mut c0 = vec![ZERO; dim];
                prop.to_eigen(psi0, &mut c0);
                let jumps = factors
                    .iter()
                    .map(|f| (!f.is_identity()).then(|| jump_matrix(&prop, f)))
                    .collect();
                let grid_phase = grid
                    .iter()
                    .map(|&t| prop.energies().iter().map(|e| C64::from_polar(1.0, -e * t)).collect())
                    .collect();
                Kind::Spectral {
                    prop,
                    psi0: c0,
                    jumps,
                    grid_phase,
                }
            }
            LocalMethod::Krylov => Kind::Krylov { h: h.clone() },
            LocalMethod::Trotter { steps } => {
                if steps == 0 || horizon <= 0.0 {
                    return Err(PqsError::InvalidArgument(
                        "trotter evolution needs a positive step count and horizon".into(),
                    ));
                }
                let (diag, rest) = h.terms().iter().partition(|(_, p)| p.is_diagonal());
                Kind::Trotter {
                    diag,
                    rest,
                    step: horizon / steps as f64,
                }
            }
            LocalMethod::Auto => unreachable!("resolved above"),
        };
        let mut local = Self {
            n_qubits: n,
            dim,
            kind,
            evolver: *evolver,
            factors,
            grid: grid.to_vec(),
            anchors: Vec::new(),
            grid_anchor: Vec::new(),
            horizon_state: Vec::new(),
            ops,
            free_vals: Vec::new(),
        };
        local.precompute_free(psi0, horizon)?;
        Ok(local)
    }

    pub(crate) fn is_spectral(&self) -> bool {
        matches!(self.kind, Kind::Spectral { .. })
    }

    pub(crate) fn scratch(&self) -> Result<Scratch> {
        let krylov = match self.kind {
            Kind::Krylov { .. } => Some(KrylovWorkspace::new(self.dim, &self.evolver)?),
            _ => None,
        };
        Ok(Scratch {
            krylov,
            a: vec![ZERO; self.dim],
            b: vec![ZERO; self.dim],
            c: vec![ZERO; self.dim],
        })
    }

    fn precompute_free(&mut self, psi0: &[C64], horizon: f64) -> Result<()> {
        let mut scratch = self.scratch()?;
        let mut cur = psi0.to_vec();
        let mut t = 0.0;
        self.anchors.push((0.0, cur.clone()));
        for g in 0..self.grid.len() {
            let tg = self.grid[g];
            if tg > t {
                self.advance_comp(&mut cur, t, tg, &mut scratch)?;
                t = tg;
                self.anchors.push((t, cur.clone()));
            }
            self.grid_anchor.push(self.anchors.len() - 1);
        }
        if horizon > t {
            self.advance_comp(&mut cur, t, horizon, &mut scratch)?;
        }
        self.horizon_state = cur;
        self.free_vals = (0..self.grid.len())
            .map(|g| {
                let s = &self.anchors[self.grid_anchor[g]].1;
                self.ops.iter().map(|op| op.bilinear_raw(s, s)).collect()
            })
            .collect();
        Ok(())
    }

    /// Computational-basis evolution from `from` to `to`.
    fn advance_comp(&self, amps: &mut [C64], from: f64, to: f64, scratch: &mut Scratch) -> Result<()> {
        if to <= from {
            return Ok(());
        }
        match &self.kind {
            Kind::Spectral { prop, .. } => {
                prop.to_eigen(amps, &mut scratch.a);
                prop.advance(&mut scratch.a, to - from);
                prop.from_eigen(&scratch.a, amps);
                Ok(())
            }
            Kind::Krylov { h } => scratch
                .krylov
                .as_mut()
                .expect("krylov scratch")
                .evolve(h, amps, to - from),
            Kind::Trotter { diag, rest, step } => {
                let mut t = from;
                while t < to {
                    // next multiple of the step strictly after t
                    let k = (t / step + 1e-12).floor() + 1.0;
                    let boundary = (k * step).min(to);
                    let tau = boundary - t;
                    for (c, p) in diag.iter().chain(rest.iter()) {
                        rotate(amps, p, c * tau, &mut scratch.c);
                    }
                    t = boundary;
                }
                Ok(())
            }
        }
    }

    /// Free state at time `t` in the computational basis.
    fn free_at(&self, t: f64, scratch: &mut Scratch) -> Result<Vec<C64>> {
        let k = self.anchors.partition_point(|(ta, _)| *ta <= t) - 1;
        let (ta, s) = &self.anchors[k];
        let mut amps = s.clone();
        self.advance_comp(&mut amps, *ta, t, scratch)?;
        Ok(amps)
    }

    /// Applies the factor of interaction term `term` at time `t`.
    pub(crate) fn jump(&self, branch: &mut Branch, term: usize, t: f64, scratch: &mut Scratch) -> Result<()> {
        match &self.kind {
            Kind::Spectral { prop, psi0, jumps, .. } => {
                let m = jumps[term].as_ref().expect("jump on a supported subsystem");
                if let Branch::Free = branch {
                    *branch = Branch::Eigen(psi0.clone());
                }
                let Branch::Eigen(c) = branch else {
                    unreachable!("spectral branches are eigen coefficients")
                };
                let ph = &mut scratch.b;
                for (p, e) in ph.iter_mut().zip(prop.energies()) {
                    *p = C64::from_polar(1.0, -e * t);
                }
                for (x, p) in c.iter_mut().zip(ph.iter()) {
                    *x *= p;
                }
                match m {
                    JumpMatrix::Real(phase, r) => {
                        real_mul(r, c, &mut scratch.a);
                        for (x, (y, p)) in c.iter_mut().zip(scratch.a.iter().zip(ph.iter())) {
                            *x = phase * y * p.conj();
                        }
                    }
                    JumpMatrix::Complex(mat) => {
                        complex_mul(mat, c, &mut scratch.a);
                        for (x, (y, p)) in c.iter_mut().zip(scratch.a.iter().zip(ph.iter())) {
                            *x = y * p.conj();
                        }
                    }
                }
            }
            _ => {
                match branch {
                    Branch::Free => {
                        *branch = Branch::Comp {
                            amps: self.free_at(t, scratch)?,
                            time: t,
                        }
                    }
                    Branch::Comp { amps, time } => {
                        self.advance_comp(amps, *time, t, scratch)?;
                        *time = t;
                    }
                    Branch::Eigen(_) => unreachable!("stepper branches are amplitudes"),
                }
                let Branch::Comp { amps, .. } = branch else { unreachable!() };
                self.factors[term].apply_in_place(amps);
            }
        }
        Ok(())
    }

    /// Brings a touched branch to grid time `g` and returns a view of its
    /// computational-basis amplitudes; `buf` receives them when needed.
    fn view<'a>(
        &'a self,
        branch: &'a mut Branch,
        g: usize,
        buf: &'a mut Vec<C64>,
        scratch: &mut Scratch,
    ) -> Result<&'a [C64]> {
        let t = self.grid[g];
        match branch {
            Branch::Free => Ok(&self.anchors[self.grid_anchor[g]].1),
            Branch::Eigen(c) => {
                let Kind::Spectral { prop, grid_phase, .. } = &self.kind else { unreachable!() };
                for ((a, x), p) in scratch.a.iter_mut().zip(c.iter()).zip(&grid_phase[g]) {
                    *a = x * p;
                }
                buf.resize(self.dim, ZERO);
                prop.from_eigen(&scratch.a, buf);
                Ok(buf)
            }
            Branch::Comp { amps, time } => {
                self.advance_comp(amps, *time, t, scratch)?;
                *time = t;
                Ok(amps)
            }
        }
    }

    /// `⟨bra|O_k|ket⟩` for every distinct operator `O_k` at grid time `g`.
    pub(crate) fn values(
        &self,
        ket: &mut Branch,
        bra: &mut Branch,
        g: usize,
        out: &mut Vec<C64>,
        scratch: &mut Scratch,
    ) -> Result<()> {
        out.clear();
        if matches!(ket, Branch::Free) && matches!(bra, Branch::Free) {
            out.extend_from_slice(&self.free_vals[g]);
            return Ok(());
        }
        let mut kbuf = Vec::new();
        let mut bbuf = Vec::new();
        let k = self.view(ket, g, &mut kbuf, scratch)?;
        let b = self.view(bra, g, &mut bbuf, scratch)?;
        out.extend(self.ops.iter().map(|op| op.bilinear_raw(b, k)));
        Ok(())
    }

    /// Computational-basis amplitudes at the horizon.
    pub(crate) fn final_state(&self, branch: &Branch, horizon: f64, scratch: &mut Scratch) -> Result<Vec<C64>> {
        match branch {
            Branch::Free => Ok(self.horizon_state.clone()),
            Branch::Eigen(c) => {
                let Kind::Spectral { prop, .. } = &self.kind else { unreachable!() };
                let mut w = c.clone();
                prop.advance(&mut w, horizon);
                let mut out = vec![ZERO; self.dim];
                prop.from_eigen(&w, &mut out);
                Ok(out)
            }
            Branch::Comp { amps, time } => {
                let mut a = amps.clone();
                self.advance_comp(&mut a, *time, horizon, scratch)?;
                Ok(a)
            }
        }
    }

    pub(crate) fn n_qubits(&self) -> usize {
        self.n_qubits
    }
}

/// `e^{-iθP}ψ = cos θ ψ - i sin θ Pψ`.
fn rotate(amps: &mut [C64], p: &PauliString, theta: f64, tmp: &mut [C64]) {
    let (s, c) = theta.sin_cos();
    if p.is_diagonal() {
        for (i, a) in amps.iter_mut().enumerate() {
            // diagonal strings carry a real ±1 phase
            let sign = p.phase(i).re;
            *a *= C64::new(c, -s * sign);
        }
        return;
    }
    p.apply_into(amps, tmp);
    for (a, t) in amps.iter_mut().zip(tmp.iter()) {
        *a = *a * c + C64::new(t.im * s, -t.re * s);
    }
}

fn jump_matrix(prop: &SpectralPropagator, p: &PauliString) -> JumpMatrix {
    let dim = prop.dim();
    let dense = p.to_dense();
    match prop.basis() {
        EigenBasis::Real(v) => {
            let (phase, r) = if p.is_real() {
                (C64::new(1.0, 0.0), dense.map(|c| c.re))
            } else {
                (C64::new(0.0, 1.0), dense.map(|c| c.im))
            };
            let m = v.transpose() * r * v;
            debug_assert_eq!(m.nrows(), dim);
            JumpMatrix::Real(phase, m)
        }
        EigenBasis::Complex(v) => JumpMatrix::Complex(v.adjoint() * dense * v),
    }
}
