//! Experiment configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use pqs_core::engine::{LocalMethod, SamplingMode};
use pqs_core::evolve::EvolverConfig;
use pqs_core::models::{InitialPreset, ModelSpec, ObservableFamily};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// One experiment. Scalar keys come first so the struct serialises back to
/// valid TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Subsystem sizes; defaults to the model's natural cut.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut: Option<Vec<usize>>,
    pub observables: Vec<ObservableFamily>,
    #[serde(default)]
    pub oracle: bool,
    #[serde(default = "default_initial")]
    pub initial: InitialPreset,
    pub model: ModelSpec,
    pub time: TimeConfig,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub evolver: EvolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_initial() -> InitialPreset {
    InitialPreset::AllZero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Explicit output times.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    /// `points` evenly spaced times `kT/points`, `k = 1..=points`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    #[default]
    Stochastic,
    Dyson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    #[default]
    Auto,
    Spectral,
    Krylov,
    Trotter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_jumps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dyson_order: Option<usize>,
    /// Subsystem propagator. `auto` follows the model's `trotter_steps`
    /// when set.
    #[serde(default)]
    pub method: MethodName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_path")]
    pub path: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_path() -> PathBuf {
    PathBuf::from("pqs-out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            path: default_path(),
            format: OutputFormat::Csv,
        }
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialise to toml")
    }

    pub fn cut(&self) -> Vec<usize> {
        self.cut.clone().unwrap_or_else(|| self.model.default_cut())
    }

    pub fn grid(&self) -> Vec<f64> {
        match (&self.time.grid, self.time.points) {
            (Some(g), _) => g.clone(),
            (None, Some(p)) => (1..=p).map(|k| self.time.horizon * k as f64 / p as f64).collect(),
            (None, None) => vec![self.time.horizon],
        }
    }

    pub fn mode(&self) -> SamplingMode {
        match self.sampler.mode {
            ModeName::Stochastic => SamplingMode::Stochastic {
                max_jumps: self.sampler.max_jumps,
            },
            ModeName::Dyson => SamplingMode::Dyson {
                order: self.sampler.dyson_order.unwrap_or(0),
            },
        }
    }

    pub fn local_method(&self) -> Result<LocalMethod, CliError> {
        let steps = self.model.trotter_steps();
        Ok(match (self.sampler.method, steps) {
            (MethodName::Auto, Some(s)) | (MethodName::Trotter, Some(s)) => LocalMethod::Trotter { steps: s },
            (MethodName::Auto, None) => LocalMethod::Auto,
            (MethodName::Spectral, _) => LocalMethod::Spectral,
            (MethodName::Krylov, _) => LocalMethod::Krylov,
            (MethodName::Trotter, None) => {
                return config_err("sampler.method = \"trotter\" needs model.trotter_steps")
            }
        })
    }

    /// Checks cross-field constraints not expressible in the schema.
    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate()?;
        let n = self.model.n_qubits();
        let cut = self.cut();
        if cut.is_empty() || cut.contains(&0) || cut.iter().sum::<usize>() != n {
            return config_err(format!(
                "`cut` {cut:?} must be positive sizes summing to the model's {n} qubits"
            ));
        }
        if self.observables.is_empty() {
            return config_err("`observables` must name at least one observable");
        }
        let t = self.time.horizon;
        if !(t.is_finite() && t >= 0.0) {
            return config_err(format!("`time.T` must be finite and non-negative, got {t}"));
        }
        match (&self.time.grid, self.time.points) {
            (Some(_), Some(_)) => return config_err("set either `time.grid` or `time.points`, not both"),
            (None, Some(0)) => return config_err("`time.points` must be positive"),
            _ => {}
        }
        let grid = self.grid();
        if grid.iter().any(|x| !(*x >= 0.0 && *x <= t)) {
            return config_err(format!("`time.grid` must lie in [0, {t}]"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return config_err("`time.grid` must be strictly ascending");
        }
        if self.sampler.n_samples < 2 {
            return config_err("`sampler.n_samples` must be at least 2");
        }
        match self.sampler.mode {
            ModeName::Stochastic if self.sampler.dyson_order.is_some() => {
                return config_err("`sampler.dyson_order` requires mode = \"dyson\"")
            }
            ModeName::Dyson if self.sampler.dyson_order.is_none() => {
                return config_err("mode = \"dyson\" requires `sampler.dyson_order`")
            }
            ModeName::Dyson if self.sampler.max_jumps.is_some() => {
                return config_err("`sampler.max_jumps` applies to stochastic mode only")
            }
            _ => {}
        }
        self.evolver.validate()?;
        self.local_method()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DQPT: &str = r#"
observables = ["magnetization", "loschmidt"]
oracle = true

[model]
kind = "tfim"
n = 8
h = 1.5
trotter_steps = 4

[time]
T = 1.0
grid = [0.25, 0.5, 0.75, 1.0]

[sampler]
n_samples = 1000
seed = 3
"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_toml(DQPT).unwrap();
        assert_eq!(cfg.cut(), vec![4, 4]);
        assert_eq!(cfg.initial, InitialPreset::AllZero);
        assert_eq!(cfg.local_method().unwrap(), LocalMethod::Trotter { steps: 4 });
        assert_eq!(cfg.mode(), SamplingMode::Stochastic { max_jumps: None });
        assert_eq!(cfg.output.format, OutputFormat::Csv);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = DQPT.replace("seed = 3", "seed = 3\nsamples = 4");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("samples"), "{err}");
        let text = DQPT.replace("h = 1.5", "h = 1.5\nfield = 2.0");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn bad_cut_names_the_field() {
        let text = format!("cut = [5, 4]\n{DQPT}");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("`cut`"), "{err}");
    }

    #[test]
    fn grid_forms() {
        let text = DQPT.replace("grid = [0.25, 0.5, 0.75, 1.0]", "points = 4");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.grid(), vec![0.25, 0.5, 0.75, 1.0]);
        let text = DQPT.replace("grid = [0.25, 0.5, 0.75, 1.0]", "grid = [0.5, 0.25]");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = DQPT.replace("grid = [0.25, 0.5, 0.75, 1.0]", "grid = [2.0]");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn mode_fields_must_agree() {
        let text = DQPT.replace("seed = 3", "seed = 3\nmode = \"dyson\"");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = DQPT.replace("seed = 3", "seed = 3\nmode = \"dyson\"\ndyson_order = 2");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.mode(), SamplingMode::Dyson { order: 2 });
        let text = DQPT.replace("seed = 3", "seed = 3\ndyson_order = 2");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::from_toml(DQPT).unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
    }
}
