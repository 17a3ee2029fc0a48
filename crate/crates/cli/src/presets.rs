//! Built-in experiment configurations.

use pqs_core::models::{random_boundary_couplings, InitialPreset, ModelSpec, ObservableFamily};

use crate::config::{ExperimentConfig, MethodName, ModeName, OutputConfig, SamplerConfig, TimeConfig};

pub const NAMES: [&str; 5] = ["dqpt", "qw16", "hubbard-spin-cut", "powerlaw-clusters", "multicluster"];

/// Seed for the multicluster boundary couplings.
pub const MULTICLUSTER_COUPLING_SEED: u64 = 7;

fn families(names: &[&str]) -> Vec<ObservableFamily> {
    names.iter().map(|s| s.parse().expect("built-in family")).collect()
}

fn sampler(n_samples: usize, seed: u64) -> SamplerConfig {
    SamplerConfig {
        n_samples,
        seed,
        mode: ModeName::Stochastic,
        max_jumps: None,
        dyson_order: None,
        method: MethodName::Auto,
    }
}

fn base(name: &str, model: ModelSpec, initial: InitialPreset, obs: &[&str], time: TimeConfig, sampler: SamplerConfig) -> ExperimentConfig {
    ExperimentConfig {
        name: Some(name.to_string()),
        cut: Some(model.default_cut()),
        observables: families(obs),
        oracle: true,
        initial,
        model,
        time,
        sampler,
        evolver: Default::default(),
        output: OutputConfig {
            path: format!("out/{name}").into(),
            ..Default::default()
        },
    }
}

fn points(horizon: f64, points: usize) -> TimeConfig {
    TimeConfig {
        horizon,
        grid: None,
        points: Some(points),
    }
}

/// TFIM quench with Trotterised local evolution; `h` selects the phase.
pub fn dqpt(h: f64) -> ExperimentConfig {
    base(
        "dqpt",
        ModelSpec::Tfim {
            n: 8,
            j: 1.0,
            h,
            trotter_steps: Some(4),
        },
        InitialPreset::AllZero,
        &["magnetization", "loschmidt", "identity"],
        TimeConfig {
            horizon: 1.0,
            grid: Some(vec![0.25, 0.5, 0.75, 1.0]),
            points: None,
        },
        sampler(10_000, 20_211),
    )
}

pub fn get(name: &str) -> Option<ExperimentConfig> {
    Some(match name {
        "dqpt" => dqpt(1.5),
        // Single boson on the last site of the left half; the boundary bond
        // carries two terms of 0.8 J each, so 2λT = 2 at T = 1.25.
        "qw16" => base(
            name,
            ModelSpec::XxChain {
                n: 16,
                j: 0.5,
                j_boundary: Some(0.4),
                boundary_bond: None,
                onsite: vec![],
            },
            InitialPreset::FlipSites(vec![8]),
            &["density", "identity"],
            points(1.25, 5),
            sampler(500_000, 16),
        ),
        "hubbard-spin-cut" => base(
            name,
            ModelSpec::FermiHubbard {
                l: 4,
                j: 0.5,
                u: 0.5,
                h_up: None,
                h_dn: None,
                n_up: 1,
                n_dn: 1,
            },
            InitialPreset::HubbardGround,
            &["charge-density", "spin-density", "separation-speed", "identity"],
            points(2.0, 8),
            sampler(100_000, 4),
        ),
        "powerlaw-clusters" => base(
            name,
            ModelSpec::PowerLawIsing {
                n: 16,
                j0: 1.0,
                alpha: 1.0,
                h: None,
                clusters: 2,
            },
            InitialPreset::FlipSites(vec![8]),
            &["density", "identity"],
            points(1.0, 5),
            sampler(200_000, 5),
        ),
        "multicluster" => base(
            name,
            ModelSpec::MultiCluster {
                clusters: 3,
                cluster_size: 6,
                j: 1.0,
                h: 1.0,
                boundary_couplings: random_boundary_couplings(2, 0.5, MULTICLUSTER_COUPLING_SEED),
            },
            InitialPreset::AllZero,
            &["magnetization", "nn-correlation", "identity"],
            points(1.0, 4),
            sampler(500_000, 18),
        ),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates_and_round_trips() {
        for name in NAMES {
            let cfg = get(name).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
        assert!(get("nope").is_none());
    }

    #[test]
    fn multicluster_couplings_in_range() {
        let Some(ExperimentConfig {
            model: ModelSpec::MultiCluster { boundary_couplings, .. },
            ..
        }) = get("multicluster")
        else {
            panic!()
        };
        assert_eq!(boundary_couplings.len(), 2);
        assert!(boundary_couplings.iter().all(|f| (0.0..=0.5).contains(f)));
    }
}
