//! Result tables and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, OutputFormat};
use crate::error::CliError;
use crate::experiment::{OracleRow, Row, RunOutput};

pub const TABLE_STEM: &str = "results";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub pqs: String,
    pub rustc_target: String,
}

impl Versions {
    fn current() -> Self {
        Self {
            pqs: env!("CARGO_PKG_VERSION").to_string(),
            rustc_target: format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
        }
    }
}

/// Everything needed to repeat a run. `config` is accepted by `pqs run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub n_qubits: usize,
    pub cut: Vec<usize>,
    pub lambda_total: f64,
    #[serde(rename = "overhead_C")]
    pub overhead: f64,
    pub n_rows: usize,
    pub table: PathBuf,
    pub threads: usize,
    pub wall_time_s: f64,
    pub versions: Versions,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads a TOML config, or the config echoed in a manifest.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        m.config.validate()?;
        return Ok(m.config);
    }
    ExperimentConfig::load(path)
}

fn num(x: f64) -> String {
    // Display gives the shortest string that parses back to `x`.
    format!("{x}")
}

/// The result table as CSV bytes.
pub fn csv_bytes(rows: &[Row], with_oracle: bool) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t", "observable", "mean", "stderr", "imag_diag", "overhead_C", "n_samples"];
    if with_oracle {
        header.extend(["oracle_value", "abs_error"]);
    }
    let csv_err = |e: csv::Error| CliError::Io {
        path: "csv".into(),
        source: e.into(),
    };
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let e = &r.estimate;
        let mut rec = vec![
            num(e.time),
            e.observable.clone(),
            num(e.mean),
            num(e.stderr),
            num(e.imag_diagnostic),
            num(e.overhead),
            e.n_samples.to_string(),
        ];
        if with_oracle {
            rec.push(r.oracle_value.map(num).unwrap_or_default());
            rec.push(r.abs_error().map(num).unwrap_or_default());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Io {
        path: "csv".into(),
        source: e.into_error(),
    })
}

#[derive(Serialize)]
struct JsonRow<'a> {
    t: f64,
    observable: &'a str,
    mean: f64,
    stderr: f64,
    imag_diag: f64,
    imag_stderr: f64,
    #[serde(rename = "overhead_C")]
    overhead: f64,
    n_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    abs_error: Option<f64>,
}

fn json_bytes(rows: &[Row]) -> Vec<u8> {
    let rows: Vec<JsonRow> = rows
        .iter()
        .map(|r| JsonRow {
            t: r.estimate.time,
            observable: &r.estimate.observable,
            mean: r.estimate.mean,
            stderr: r.estimate.stderr,
            imag_diag: r.estimate.imag_diagnostic,
            imag_stderr: r.estimate.imag_stderr,
            overhead: r.estimate.overhead,
            n_samples: r.estimate.n_samples,
            oracle_value: r.oracle_value,
            abs_error: r.abs_error(),
        })
        .collect();
    let mut out = serde_json::to_vec_pretty(&rows).expect("rows serialise");
    out.push(b'\n');
    out
}

/// Oracle-only table.
pub fn oracle_csv_bytes(rows: &[OracleRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Io {
        path: "csv".into(),
        source: e.into(),
    };
    w.write_record(["t", "observable", "oracle_value"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([num(r.t), r.observable.clone(), num(r.value)]).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Io {
        path: "csv".into(),
        source: e.into_error(),
    })
}

/// Writes the table and manifest into `dir`; returns the table path.
pub fn write_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    run: &RunOutput,
    threads: usize,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let (bytes, ext) = match cfg.output.format {
        OutputFormat::Csv => (csv_bytes(&run.rows, cfg.oracle)?, "csv"),
        OutputFormat::Json => (json_bytes(&run.rows), "json"),
    };
    let table = dir.join(format!("{TABLE_STEM}.{ext}"));
    fs::write(&table, bytes).map_err(io_err(&table))?;
    let manifest = Manifest {
        config: cfg.clone(),
        seed: cfg.sampler.seed,
        n_qubits: run.n_qubits,
        cut: run.cut.clone(),
        lambda_total: run.lambda_total,
        overhead: run.overhead,
        n_rows: run.rows.len(),
        table: table.file_name().map(PathBuf::from).unwrap_or_default(),
        threads,
        wall_time_s: run.wall_time_s,
        versions: Versions::current(),
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(table)
}
