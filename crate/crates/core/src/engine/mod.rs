//! Monte Carlo estimation over stochastic insertion trajectories.
//!
//! Each cross term `λ_j V_j` of a [`PartitionedSystem`] is expanded as a
//! jump process of rate `α = 2Σ|λ_j|`. A trajectory inserts the factors of
//! `V_j` on the ket or the bra side of every subsystem it touches; between
//! insertions each subsystem evolves under its own Hamiltonian only. The
//! weighted average of the resulting branch-pair contractions is an unbiased
//! estimate of the full expectation value.

mod local;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, PqsError, Result};
use crate::evolve::EvolverConfig;
use crate::models::{InteractionTerm, ObservableSum, PartitionedSystem};
use crate::pauli::{LocalOp, StateVector, C64};

use local::{Branch, Local, Scratch};

/// Largest subsystem the engine will hold in memory.
pub const MAX_LOCAL_QUBITS: usize = 24;

/// Trajectories per reduction block. Blocks are reduced in index order, so
/// results do not depend on the number of worker threads.
const BLOCK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Ket,
    Bra,
}

/// Rate, term distribution and phases of the explicit expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitDecomposition {
    terms: Vec<InteractionTerm>,
    lambda_total: f64,
    rate: f64,
    term_probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl ExplicitDecomposition {
    pub fn new(terms: Vec<InteractionTerm>) -> Self {
        let lambda_total: f64 = terms.iter().map(|t| t.lambda.abs()).sum();
        let term_probs: Vec<f64> = terms.iter().map(|t| t.lambda.abs() / lambda_total).collect();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = term_probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Self {
            terms,
            lambda_total,
            rate: 2.0 * lambda_total,
            term_probs,
            cumulative,
        }
    }

    pub fn terms(&self) -> &[InteractionTerm] {
        &self.terms
    }

    pub fn lambda_total(&self) -> f64 {
        self.lambda_total
    }

    /// `α = 2λ`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn term_probs(&self) -> &[f64] {
        &self.term_probs
    }

    /// `e^{αt}`.
    pub fn overhead(&self, t: f64) -> f64 {
        (self.rate * t).exp()
    }

    /// Truncated overhead `Σ_{n≤k} (αt)^n / n!`.
    pub fn dyson_overhead(&self, order: usize, t: f64) -> f64 {
        exp_partial(self.rate * t, order)
    }

    /// Term index for a uniform draw `u ∈ [0,1)`.
    pub fn sample_term(&self, u: f64) -> usize {
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.terms.len().saturating_sub(1))
    }

    /// Phase carried by one insertion.
    pub fn jump_phase(&self, term: usize, side: Side) -> C64 {
        let s = self.terms[term].lambda.signum();
        match side {
            Side::Ket => C64::new(0.0, -s),
            Side::Bra => C64::new(0.0, s),
        }
    }
}

pub fn decompose(system: &PartitionedSystem) -> ExplicitDecomposition {
    ExplicitDecomposition::new(system.interactions().to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub term: usize,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub jumps: Vec<Jump>,
    pub horizon: f64,
}

impl Trajectory {
    pub fn new(jumps: Vec<Jump>, horizon: f64) -> Result<Self> {
        let traj = Self { jumps, horizon };
        traj.validate()?;
        Ok(traj)
    }

    pub fn empty(horizon: f64) -> Self {
        Self {
            jumps: Vec::new(),
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return invalid(format!("horizon must be finite and non-negative, got {}", self.horizon));
        }
        let mut prev = 0.0;
        for j in &self.jumps {
            if !(j.time > prev && j.time < self.horizon) {
                return invalid(format!(
                    "jump times must increase strictly inside (0, {}), got {}",
                    self.horizon, j.time
                ));
            }
            prev = j.time;
        }
        Ok(())
    }

    /// Product of insertion phases.
    pub fn phase(&self, decomp: &ExplicitDecomposition) -> C64 {
        self.jumps
            .iter()
            .fold(C64::new(1.0, 0.0), |acc, j| acc * decomp.jump_phase(j.term, j.side))
    }
}

/// Waiting time to the next jump, `-ln(u)/α` for `u ∈ (0,1]`.
pub fn jump_interval(u: f64, rate: f64) -> f64 {
    if rate <= 0.0 {
        f64::INFINITY
    } else {
        -u.ln() / rate
    }
}

/// Independent stream `index` of the generator seeded by `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_jump<R: Rng + ?Sized>(decomp: &ExplicitDecomposition, time: f64, rng: &mut R) -> Jump {
    let term = decomp.sample_term(rng.random::<f64>());
    let side = if rng.random::<bool>() { Side::Ket } else { Side::Bra };
    Jump { time, term, side }
}

/// Poisson jump process on `[0, T]`. Jumps past `max_jumps` are dropped.
pub fn sample_trajectory<R: Rng + ?Sized>(
    decomp: &ExplicitDecomposition,
    horizon: f64,
    rng: &mut R,
    max_jumps: Option<usize>,
) -> Trajectory {
    let mut jumps = Vec::new();
    if decomp.rate() <= 0.0 {
        return Trajectory { jumps, horizon };
    }
    let mut t = 0.0;
    loop {
        let u = 1.0 - rng.random::<f64>();
        t += jump_interval(u, decomp.rate());
        if t >= horizon {
            break;
        }
        if max_jumps.is_some_and(|m| jumps.len() >= m) {
            break;
        }
        let jump = draw_jump(decomp, t, rng);
        // u = 1 gives a zero interval; such coincident jumps are dropped
        if jumps.last().map_or(t > 0.0, |j: &Jump| t > j.time) {
            jumps.push(jump);
        }
    }
    Trajectory { jumps, horizon }
}

/// Trajectory of a `k`-th order truncated expansion: the jump count is drawn
/// with weight `(αT)^n/n!` for `n ≤ k`, times are uniform order statistics.
pub fn sample_dyson_trajectory<R: Rng + ?Sized>(
    decomp: &ExplicitDecomposition,
    horizon: f64,
    order: usize,
    rng: &mut R,
) -> Trajectory {
    let x = decomp.rate() * horizon;
    let total = exp_partial(x, order);
    let u = rng.random::<f64>() * total;
    let mut n = 0;
    let mut term = 1.0;
    let mut acc = term;
    while acc <= u && n < order {
        n += 1;
        term *= x / n as f64;
        acc += term;
    }
    let mut times: Vec<f64> = (0..n)
        .map(|_| horizon * (1.0 - rng.random::<f64>()))
        .filter(|&t| t < horizon)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let jumps = times.into_iter().map(|t| draw_jump(decomp, t, rng)).collect();
    Trajectory { jumps, horizon }
}

fn exp_partial(x: f64, order: usize) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..=order {
        term *= x / n as f64;
        sum += term;
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SamplingMode {
    Stochastic {
        #[serde(default)]
        max_jumps: Option<usize>,
    },
    Dyson {
        order: usize,
    },
}

impl Default for SamplingMode {
    fn default() -> Self {
        SamplingMode::Stochastic { max_jumps: None }
    }
}

/// Subsystem propagation method. `Auto` diagonalises subsystems up to the
/// dense limit and uses Krylov above it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LocalMethod {
    #[default]
    Auto,
    Spectral,
    Krylov,
    /// First-order product formula with `steps` steps over the horizon.
    Trotter { steps: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOptions {
    pub horizon: f64,
    pub grid: Vec<f64>,
    pub evolver: EvolverConfig,
    pub local_method: LocalMethod,
}

impl EngineOptions {
    pub fn new(horizon: f64, grid: Vec<f64>) -> Self {
        Self {
            horizon,
            grid,
            evolver: EvolverConfig::default(),
            local_method: LocalMethod::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub observable: String,
    pub time: f64,
    pub mean: f64,
    pub stderr: f64,
    /// `|mean of imaginary parts|`.
    pub imag_diagnostic: f64,
    pub imag_stderr: f64,
    pub overhead: f64,
    pub n_samples: usize,
}

/// Ket and bra states of every subsystem at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchPair {
    pub kets: Vec<StateVector>,
    pub bras: Vec<StateVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutput {
    /// `[observable][grid]` weighted contributions.
    pub contributions: Vec<Vec<C64>>,
    pub branches: BranchPair,
}

/// Observable term with its factors resolved to per-subsystem op slots.
#[derive(Debug, Clone)]
struct ResolvedTerm {
    coeff: f64,
    slots: Vec<usize>,
}

/// Precomputed state shared by all trajectories of one system.
#[derive(Debug, Clone)]
pub struct Engine {
    system: PartitionedSystem,
    decomp: ExplicitDecomposition,
    names: Vec<String>,
    terms: Vec<Vec<ResolvedTerm>>,
    options: EngineOptions,
    locals: Vec<Local>,
    /// Subsystems touched by each interaction term.
    supports: Vec<Vec<usize>>,
    /// `[grid][observable]` contraction of the jump-free branch pair.
    free_contrib: Vec<Vec<C64>>,
}

impl Engine {
    pub fn new(
        system: &PartitionedSystem,
        initial: &[StateVector],
        observables: &[ObservableSum],
        options: EngineOptions,
    ) -> Result<Self> {
        let sizes = system.subsystem_sizes();
        let nsub = sizes.len();
        options.evolver.validate()?;
        if initial.len() != nsub {
            return invalid(format!("{} initial states for {nsub} subsystems", initial.len()));
        }
        for (l, (s, &n)) in initial.iter().zip(sizes).enumerate() {
            if n > MAX_LOCAL_QUBITS {
                return Err(PqsError::ResourceLimit {
                    what: "subsystem qubits".into(),
                    requested: n,
                    limit: MAX_LOCAL_QUBITS,
                });
            }
            if s.n_qubits() != n {
                return invalid(format!(
                    "initial state {l} has {} qubits, subsystem has {n}",
                    s.n_qubits()
                ));
            }
            if (s.norm() - 1.0).abs() > 1e-8 {
                return invalid(format!("initial state {l} is not normalised (norm {})", s.norm()));
            }
        }
        let horizon = options.horizon;
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return invalid(format!("horizon must be finite and non-negative, got {horizon}"));
        }
        let grid = &options.grid;
        if grid.iter().any(|t| !(*t >= 0.0 && *t <= horizon)) {
            return invalid(format!("grid times must lie in [0, {horizon}]"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("grid times must be strictly ascending");
        }
        for o in observables {
            o.validate(sizes)?;
        }

        let decomp = decompose(system);
        let supports: Vec<Vec<usize>> = decomp.terms().iter().map(|t| t.support()).collect();

        let mut ops: Vec<Vec<LocalOp>> = vec![Vec::new(); nsub];
        let mut terms: Vec<Vec<ResolvedTerm>> = Vec::with_capacity(observables.len());
        for o in observables {
            let resolved = o
                .terms
                .iter()
                .map(|(coeff, factors)| {
                    let slots = factors
                        .iter()
                        .enumerate()
                        .map(|(l, op)| match ops[l].iter().position(|x| x == op) {
                            Some(k) => k,
                            None => {
                                ops[l].push(op.clone());
                                ops[l].len() - 1
                            }
                        })
                        .collect();
                    ResolvedTerm { coeff: *coeff, slots }
                })
                .collect::<Vec<_>>();
            terms.push(resolved);
        }

        let locals = (0..nsub)
            .into_par_iter()
            .map(|l| {
                let factors = decomp.terms().iter().map(|t| t.factors[l]).collect();
                Local::new(
                    &system.local_hams()[l],
                    initial[l].amplitudes(),
                    factors,
                    ops[l].clone(),
                    grid,
                    horizon,
                    options.local_method,
                    &options.evolver,
                )
            })
            .collect::<Result<Vec<_>>>()?;

        let free_contrib = (0..grid.len())
            .map(|g| {
                terms
                    .iter()
                    .map(|obs| contract(obs, |l, k| locals[l].free_vals[g][k]))
                    .collect()
            })
            .collect();

        Ok(Self {
            system: system.clone(),
            decomp,
            names: observables.iter().map(|o| o.name.clone()).collect(),
            terms,
            options,
            locals,
            supports,
            free_contrib,
        })
    }

    pub fn system(&self) -> &PartitionedSystem {
        &self.system
    }

    pub fn decomposition(&self) -> &ExplicitDecomposition {
        &self.decomp
    }

    pub fn options(&self) -> &EngineOptions {
        &self.options
    }

    pub fn observable_names(&self) -> &[String] {
        &self.names
    }

    /// True when every subsystem uses the eigenbasis backend.
    pub fn is_spectral(&self) -> bool {
        self.locals.iter().all(Local::is_spectral)
    }

    fn scratch(&self) -> Result<Vec<Scratch>> {
        self.locals.iter().map(Local::scratch).collect()
    }

    /// Weight applied at each grid time.
    fn weights(&self, traj: &Trajectory, mode: SamplingMode) -> Vec<f64> {
        let rate = self.decomp.rate();
        match mode {
            SamplingMode::Stochastic { .. } => {
                self.options.grid.iter().map(|&t| (rate * t).exp()).collect()
            }
            SamplingMode::Dyson { order } => {
                // m jumps on [0,t] from a horizon-T draw have density
                // α^m Σ_{r≤k-m} (α(T-t))^r/r! / C_k(T)
                let horizon = self.options.horizon;
                let ck = exp_partial(rate * horizon, order);
                self.options
                    .grid
                    .iter()
                    .map(|&t| {
                        let m = traj.jumps.partition_point(|j| j.time <= t);
                        if m > order {
                            0.0
                        } else {
                            ck / exp_partial(rate * (horizon - t), order - m)
                        }
                    })
                    .collect()
            }
        }
    }

    fn overheads(&self, mode: SamplingMode) -> Vec<f64> {
        self.options
            .grid
            .iter()
            .map(|&t| match mode {
                SamplingMode::Stochastic { .. } => self.decomp.overhead(t),
                SamplingMode::Dyson { order } => self.decomp.dyson_overhead(order, t),
            })
            .collect()
    }

    fn apply_jump(
        &self,
        jump: &Jump,
        kets: &mut [Branch],
        bras: &mut [Branch],
        scratch: &mut [Scratch],
    ) -> Result<()> {
        let side = match jump.side {
            Side::Ket => kets,
            Side::Bra => bras,
        };
        for &l in &self.supports[jump.term] {
            self.locals[l].jump(&mut side[l], jump.term, jump.time, &mut scratch[l])?;
        }
        Ok(())
    }

    /// Core trajectory loop. Writes time-major contributions into `out`
    /// (`out[g * n_obs + o]`) and returns the horizon branches if asked.
    fn run(
        &self,
        traj: &Trajectory,
        weights: &[f64],
        out: &mut [C64],
        want_final: bool,
        scratch: &mut [Scratch],
        vals: &mut [Vec<C64>],
    ) -> Result<Option<(Vec<Branch>, Vec<Branch>)>> {
        let nsub = self.locals.len();
        let nobs = self.terms.len();
        let mut kets = vec![Branch::Free; nsub];
        let mut bras = vec![Branch::Free; nsub];
        let mut phase = C64::new(1.0, 0.0);
        let mut next = 0;
        let grid: &[f64] = if out.is_empty() { &[] } else { &self.options.grid };
        for (g, &t) in grid.iter().enumerate() {
            while next < traj.jumps.len() && traj.jumps[next].time <= t {
                let j = &traj.jumps[next];
                self.apply_jump(j, &mut kets, &mut bras, scratch)?;
                phase *= self.decomp.jump_phase(j.term, j.side);
                next += 1;
            }
            let row = &mut out[g * nobs..(g + 1) * nobs];
            let w = phase * weights[g];
            if next == 0 {
                for (o, c) in row.iter_mut().zip(&self.free_contrib[g]) {
                    *o = c * w;
                }
                continue;
            }
            for l in 0..nsub {
                self.locals[l].values(&mut kets[l], &mut bras[l], g, &mut vals[l], &mut scratch[l])?;
            }
            for (o, obs) in row.iter_mut().zip(&self.terms) {
                *o = contract(obs, |l, k| vals[l][k]) * w;
            }
        }
        if !want_final {
            return Ok(None);
        }
        for j in &traj.jumps[next..] {
            self.apply_jump(j, &mut kets, &mut bras, scratch)?;
        }
        Ok(Some((kets, bras)))
    }

    fn horizon_states(&self, branches: &[Branch], scratch: &mut [Scratch]) -> Result<Vec<StateVector>> {
        branches
            .iter()
            .enumerate()
            .map(|(l, b)| {
                let amps = self.locals[l].final_state(b, self.options.horizon, &mut scratch[l])?;
                StateVector::new(self.locals[l].n_qubits(), amps)
            })
            .collect()
    }

    /// Contributions of one given trajectory, plus its horizon branches.
    pub fn run_trajectory(&self, traj: &Trajectory, mode: SamplingMode) -> Result<TrajectoryOutput> {
        traj.validate()?;
        if (traj.horizon - self.options.horizon).abs() > 0.0 {
            return invalid(format!(
                "trajectory horizon {} differs from engine horizon {}",
                traj.horizon, self.options.horizon
            ));
        }
        let nobs = self.terms.len();
        let ngrid = self.options.grid.len();
        let mut scratch = self.scratch()?;
        let mut vals = vec![Vec::new(); self.locals.len()];
        let mut flat = vec![C64::new(0.0, 0.0); nobs * ngrid];
        let weights = self.weights(traj, mode);
        let (kets, bras) = self
            .run(traj, &weights, &mut flat, true, &mut scratch, &mut vals)?
            .expect("final branches requested");
        let contributions = (0..nobs)
            .map(|o| (0..ngrid).map(|g| flat[g * nobs + o]).collect())
            .collect();
        Ok(TrajectoryOutput {
            contributions,
            branches: BranchPair {
                kets: self.horizon_states(&kets, &mut scratch)?,
                bras: self.horizon_states(&bras, &mut scratch)?,
            },
        })
    }

    fn sample(&self, mode: SamplingMode, rng: &mut ChaCha8Rng) -> Trajectory {
        let horizon = self.options.horizon;
        match mode {
            SamplingMode::Stochastic { max_jumps } => {
                sample_trajectory(&self.decomp, horizon, rng, max_jumps)
            }
            SamplingMode::Dyson { order } => sample_dyson_trajectory(&self.decomp, horizon, order, rng),
        }
    }

    /// Estimates of every observable at every grid time, time-major.
    pub fn estimate(&self, n_samples: usize, seed: u64, mode: SamplingMode) -> Result<Vec<EstimatorResult>> {
        if n_samples < 2 {
            return invalid(format!("n_samples must be at least 2, got {n_samples}"));
        }
        if let SamplingMode::Stochastic { max_jumps: Some(0) } = mode {
            log::debug!("max_jumps = 0 keeps only the jump-free term");
        }
        let nobs = self.terms.len();
        let ngrid = self.options.grid.len();
        let width = nobs * ngrid;
        let blocks = n_samples.div_ceil(BLOCK);
        let stats = (0..blocks)
            .into_par_iter()
            .map(|b| -> Result<Vec<Moments>> {
                let mut scratch = self.scratch()?;
                let mut vals = vec![Vec::new(); self.locals.len()];
                let mut out = vec![C64::new(0.0, 0.0); width];
                let mut acc = vec![Moments::default(); width];
                for i in b * BLOCK..((b + 1) * BLOCK).min(n_samples) {
                    let mut rng = trajectory_rng(seed, i as u64);
                    let traj = self.sample(mode, &mut rng);
                    let weights = self.weights(&traj, mode);
                    self.run(&traj, &weights, &mut out, false, &mut scratch, &mut vals)?;
                    for (a, c) in acc.iter_mut().zip(&out) {
                        a.push(*c);
                    }
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = vec![Moments::default(); width];
        for block in &stats {
            for (t, b) in total.iter_mut().zip(block) {
                t.merge(b);
            }
        }
        let overheads = self.overheads(mode);
        let mut results = Vec::with_capacity(width);
        for (g, &t) in self.options.grid.iter().enumerate() {
            for (o, name) in self.names.iter().enumerate() {
                results.push(total[g * nobs + o].result(name, t, overheads[g]));
            }
        }
        Ok(results)
    }

    /// Estimates `Tr ρ_m(T)²` from pairs of independent trajectories.
    pub fn estimate_purity(&self, m: usize, n_pairs: usize, seed: u64) -> Result<EstimatorResult> {
        let nsub = self.locals.len();
        if m >= nsub {
            return invalid(format!("subsystem {m} out of range for {nsub} subsystems"));
        }
        if n_pairs < 2 {
            return invalid(format!("n_pairs must be at least 2, got {n_pairs}"));
        }
        let horizon = self.options.horizon;
        let weight = (2.0 * self.decomp.rate() * horizon).exp();
        let mode = SamplingMode::Stochastic { max_jumps: None };
        let blocks = n_pairs.div_ceil(BLOCK);
        let stats = (0..blocks)
            .into_par_iter()
            .map(|b| -> Result<Moments> {
                let mut scratch = self.scratch()?;
                let mut vals = vec![Vec::new(); nsub];
                let mut acc = Moments::default();
                let mut finals = |i: u64, scratch: &mut [Scratch]| -> Result<(C64, Vec<Vec<C64>>, Vec<Vec<C64>>)> {
                    let mut rng = trajectory_rng(seed, i);
                    let traj = self.sample(mode, &mut rng);
                    let (kets, bras) = self
                        .run(&traj, &[], &mut [], true, scratch, &mut vals)?
                        .expect("final branches requested");
                    let to_amps = |bs: &[Branch], scratch: &mut [Scratch]| -> Result<Vec<Vec<C64>>> {
                        bs.iter()
                            .enumerate()
                            .map(|(l, b)| self.locals[l].final_state(b, horizon, &mut scratch[l]))
                            .collect()
                    };
                    let k = to_amps(&kets, scratch)?;
                    let br = to_amps(&bras, scratch)?;
                    Ok((traj.phase(&self.decomp), k, br))
                };
                for i in b * BLOCK..((b + 1) * BLOCK).min(n_pairs) {
                    let (p1, a1, b1) = finals(2 * i as u64, &mut scratch)?;
                    let (p2, a2, b2) = finals(2 * i as u64 + 1, &mut scratch)?;
                    let mut c = p1 * p2 * weight;
                    for l in 0..nsub {
                        if l == m {
                            c *= dot(&b1[l], &a2[l]) * dot(&b2[l], &a1[l]);
                        } else {
                            c *= dot(&b1[l], &a1[l]) * dot(&b2[l], &a2[l]);
                        }
                    }
                    acc.push(c);
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = Moments::default();
        for s in &stats {
            total.merge(s);
        }
        Ok(total.result(&format!("purity_{m}"), horizon, weight))
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    crate::pauli::dot(a, b)
}

fn contract(obs: &[ResolvedTerm], val: impl Fn(usize, usize) -> C64) -> C64 {
    obs.iter()
        .map(|t| {
            t.slots
                .iter()
                .enumerate()
                .fold(C64::new(t.coeff, 0.0), |acc, (l, &k)| acc * val(l, k))
        })
        .sum()
}

/// Running mean and squared deviations of real and imaginary parts.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: C64,
    m2_re: f64,
    m2_im: f64,
}

impl Moments {
    fn push(&mut self, x: C64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        let d2 = x - self.mean;
        self.m2_re += d.re * d2.re;
        self.m2_im += d.im * d2.im;
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        let f = (self.n as f64) * (o.n as f64) / n as f64;
        self.m2_re += o.m2_re + d.re * d.re * f;
        self.m2_im += o.m2_im + d.im * d.im * f;
        self.mean += d * (o.n as f64 / n as f64);
        self.n = n;
    }

    fn result(&self, name: &str, time: f64, overhead: f64) -> EstimatorResult {
        let n = self.n as f64;
        let err = |m2: f64| if self.n > 1 { (m2.max(0.0) / (n - 1.0) / n).sqrt() } else { 0.0 };
        EstimatorResult {
            observable: name.to_string(),
            time,
            mean: self.mean.re,
            stderr: err(self.m2_re),
            imag_diagnostic: self.mean.im.abs(),
            imag_stderr: err(self.m2_im),
            overhead,
            n_samples: self.n,
        }
    }
}

/// One-shot wrapper around [`Engine::new`] and [`Engine::estimate`].
#[allow(clippy::too_many_arguments)]
pub fn estimate(
    system: &PartitionedSystem,
    initial: &[StateVector],
    observables: &[ObservableSum],
    options: EngineOptions,
    n_samples: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<Vec<EstimatorResult>> {
    Engine::new(system, initial, observables, options)?.estimate(n_samples, seed, mode)
}

/// One-shot wrapper around [`Engine::estimate_purity`].
pub fn estimate_purity(
    system: &PartitionedSystem,
    initial: &[StateVector],
    m: usize,
    options: EngineOptions,
    n_pairs: usize,
    seed: u64,
) -> Result<EstimatorResult> {
    let opts = EngineOptions {
        grid: Vec::new(),
        ..options
    };
    Engine::new(system, initial, &[], opts)?.estimate_purity(m, n_pairs, seed)
}

#[cfg(test)]
mod tests;
