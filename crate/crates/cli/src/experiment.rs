//! Building and running one experiment.

use std::time::Instant;

use log::info;
use pqs_core::engine::{Engine, EngineOptions, EstimatorResult, SamplingMode};
use pqs_core::models::{build_full, build_initial, build_observables, partition, ObservableSet, PartitionedSystem};
use pqs_core::pauli::StateVector;
use pqs_core::verify::{
    check_condition1, choi_lower_bound, oracle_evolve_expect, product_state, BoundReport, Condition1Report,
    FullOperator, ORACLE_MAX_QUBITS,
};
use pqs_core::PqsError;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// One table row: an estimate and, when requested, the exact value.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub estimate: EstimatorResult,
    pub oracle_value: Option<f64>,
}

impl Row {
    pub fn abs_error(&self) -> Option<f64> {
        self.oracle_value.map(|v| (self.estimate.mean - v).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub t: f64,
    pub observable: String,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<Row>,
    pub lambda_total: f64,
    /// Overhead at the horizon for the configured sampling mode.
    pub overhead: f64,
    pub n_qubits: usize,
    pub cut: Vec<usize>,
    pub wall_time_s: f64,
}

struct Prepared {
    system: PartitionedSystem,
    initial: Vec<StateVector>,
    set: ObservableSet,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, CliError> {
    cfg.validate()?;
    let system = partition(&cfg.model, &cfg.cut())?;
    let initial = build_initial(&cfg.model, &system, &cfg.initial)?;
    let set = build_observables(&cfg.model, &system, &cfg.observables, &cfg.initial)?;
    Ok(Prepared { system, initial, set })
}

/// Exact values in engine layout: time-major, base observables then
/// derived correlators.
fn oracle_values(cfg: &ExperimentConfig, p: &Prepared, grid: &[f64]) -> Result<Vec<f64>, CliError> {
    let n = cfg.model.n_qubits();
    if n > ORACLE_MAX_QUBITS {
        return Err(PqsError::ResourceLimit {
            what: "oracle qubits".into(),
            requested: n,
            limit: ORACLE_MAX_QUBITS,
        }
        .into());
    }
    let full = build_full(&cfg.model)?;
    let psi0 = product_state(&p.initial)?;
    let ops = p
        .set
        .observables
        .iter()
        .map(|o| FullOperator::from_observable(o, &p.system))
        .collect::<Result<Vec<_>, _>>()?;
    let vals = oracle_evolve_expect(&full, &psi0, &ops, grid, &cfg.evolver)?;
    let mut out = Vec::new();
    for g in 0..grid.len() {
        let at = |k: usize| vals[k][g];
        out.extend((0..ops.len()).map(at));
        out.extend(p.set.derived.iter().map(|d| at(d.zz) - at(d.zi) * at(d.zj)));
    }
    Ok(out)
}

fn names(set: &ObservableSet) -> Vec<String> {
    set.observables
        .iter()
        .map(|o| o.name.clone())
        .chain(set.derived.iter().map(|d| d.name.clone()))
        .collect()
}

/// Estimates every observable on the grid, plus the oracle when enabled.
/// Parallelism comes from the ambient rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let start = Instant::now();
    let p = prepare(cfg)?;
    let grid = cfg.grid();
    let mut options = EngineOptions::new(cfg.time.horizon, grid.clone());
    options.evolver = cfg.evolver;
    options.local_method = cfg.local_method()?;
    let mode = cfg.mode();
    let engine = Engine::new(&p.system, &p.initial, &p.set.observables, options)?;
    let decomp = engine.decomposition();
    let overhead = match mode {
        SamplingMode::Stochastic { .. } => decomp.overhead(cfg.time.horizon),
        SamplingMode::Dyson { order } => decomp.dyson_overhead(order, cfg.time.horizon),
    };
    info!(
        "{}: {} qubits cut {:?}, lambda {}, overhead {overhead:.4}, {} samples",
        cfg.name.as_deref().unwrap_or("run"),
        cfg.model.n_qubits(),
        cfg.cut(),
        decomp.lambda_total(),
        cfg.sampler.n_samples
    );
    let results = engine.estimate(cfg.sampler.n_samples, cfg.sampler.seed, mode)?;
    let results = p.set.with_derived(&results);
    let oracle = if cfg.oracle {
        Some(oracle_values(cfg, &p, &grid)?)
    } else {
        None
    };
    let rows = results
        .into_iter()
        .enumerate()
        .map(|(k, estimate)| Row {
            estimate,
            oracle_value: oracle.as_ref().map(|o| o[k]),
        })
        .collect();
    Ok(RunOutput {
        rows,
        lambda_total: decomp.lambda_total(),
        overhead,
        n_qubits: cfg.model.n_qubits(),
        cut: cfg.cut(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Exact values only.
pub fn run_oracle(cfg: &ExperimentConfig) -> Result<Vec<OracleRow>, CliError> {
    cfg.validate()?;
    let n = cfg.model.n_qubits();
    if n > ORACLE_MAX_QUBITS {
        return Err(PqsError::ResourceLimit {
            what: "oracle qubits".into(),
            requested: n,
            limit: ORACLE_MAX_QUBITS,
        }
        .into());
    }
    let p = prepare(cfg)?;
    let grid = cfg.grid();
    let vals = oracle_values(cfg, &p, &grid)?;
    let names = names(&p.set);
    Ok(vals
        .into_iter()
        .enumerate()
        .map(|(k, value)| OracleRow {
            t: grid[k / names.len()],
            observable: names[k % names.len()].clone(),
            value,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundOutput {
    #[serde(flatten)]
    pub bound: BoundReport,
    pub condition1_detail: Condition1Report,
}

/// Cost-rate lower bound for the config's interaction.
pub fn bound(cfg: &ExperimentConfig) -> Result<BoundOutput, CliError> {
    cfg.validate()?;
    let system = partition(&cfg.model, &cfg.cut())?;
    let sizes = system.subsystem_sizes();
    Ok(BoundOutput {
        bound: choi_lower_bound(system.interactions(), sizes)?,
        condition1_detail: check_condition1(system.interactions(), sizes)?,
    })
}
