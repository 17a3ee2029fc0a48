use serde::{Deserialize, Serialize};

use super::{ground_state_noninteracting, ModelSpec, PartitionedSystem};
use crate::error::{invalid, PqsError, Result};
use crate::pauli::StateVector;

/// Product initial states.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialPreset {
    AllZero,
    /// `X` on each listed site; sites are numbered from 1.
    FlipSites(Vec<usize>),
    /// Non-interacting Slater ground state in each spin sector.
    HubbardGround,
}

impl InitialPreset {
    pub fn is_all_zero(&self) -> bool {
        match self {
            InitialPreset::AllZero => true,
            InitialPreset::FlipSites(s) => s.is_empty(),
            InitialPreset::HubbardGround => false,
        }
    }
}

/// One statevector per subsystem.
pub fn build_initial(
    spec: &ModelSpec,
    system: &PartitionedSystem,
    preset: &InitialPreset,
) -> Result<Vec<StateVector>> {
    if system.n_qubits() != spec.n_qubits() {
        return invalid(format!(
            "partition covers {} qubits, model has {}",
            system.n_qubits(),
            spec.n_qubits()
        ));
    }
    match preset {
        InitialPreset::AllZero => Ok(system
            .subsystem_sizes()
            .iter()
            .map(|&n| StateVector::zero(n))
            .collect()),
        InitialPreset::FlipSites(sites) => {
            let mut index = vec![0usize; system.n_subsystems()];
            for &s in sites {
                if s == 0 || s > system.n_qubits() {
                    return invalid(format!(
                        "flip site {s} outside sites 1..={}",
                        system.n_qubits()
                    ));
                }
                let (l, k) = system.global_to_local()[s - 1];
                index[l] ^= 1 << k;
            }
            system
                .subsystem_sizes()
                .iter()
                .zip(index)
                .map(|(&n, i)| StateVector::basis(n, i))
                .collect()
        }
        InitialPreset::HubbardGround => {
            let ModelSpec::FermiHubbard { l, .. } = spec else {
                return Err(PqsError::Unsupported(format!(
                    "hubbard-ground needs a fermi-hubbard model, got {}",
                    spec.family()
                )));
            };
            if system.subsystem_sizes() != [*l, *l] {
                return Err(PqsError::Unsupported(format!(
                    "hubbard-ground is a product state only across the spin cut [{l}, {l}], \
                     got {:?}",
                    system.subsystem_sizes()
                )));
            }
            let (up, dn) = ground_state_noninteracting(spec)?;
            Ok(vec![up, dn])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::partition;

    fn xx(n: usize) -> ModelSpec {
        ModelSpec::XxChain {
            n,
            j: 0.5,
            j_boundary: None,
            boundary_bond: None,
            onsite: vec![],
        }
    }

    #[test]
    fn all_zero_per_block() {
        let spec = xx(4);
        let sys = partition(&spec, &[2, 2]).unwrap();
        let st = build_initial(&spec, &sys, &InitialPreset::AllZero).unwrap();
        assert_eq!(st, vec![StateVector::zero(2), StateVector::zero(2)]);
    }

    #[test]
    fn flip_site_eight_lands_on_last_local_qubit() {
        let spec = xx(16);
        let sys = partition(&spec, &[8, 8]).unwrap();
        let st = build_initial(&spec, &sys, &InitialPreset::FlipSites(vec![8])).unwrap();
        assert_eq!(st[0], StateVector::basis(8, 1 << 7).unwrap());
        assert_eq!(st[1], StateVector::zero(8));
    }

    #[test]
    fn flip_site_out_of_range() {
        let spec = xx(4);
        let sys = partition(&spec, &[2, 2]).unwrap();
        assert!(build_initial(&spec, &sys, &InitialPreset::FlipSites(vec![5])).is_err());
        assert!(build_initial(&spec, &sys, &InitialPreset::FlipSites(vec![0])).is_err());
    }

    #[test]
    fn hubbard_ground_needs_spin_cut() {
        let spec = ModelSpec::FermiHubbard {
            l: 4,
            j: 0.5,
            u: 0.5,
            h_up: None,
            h_dn: None,
            n_up: 1,
            n_dn: 1,
        };
        let sys = partition(&spec, &[4, 4]).unwrap();
        let st = build_initial(&spec, &sys, &InitialPreset::HubbardGround).unwrap();
        assert_eq!(st.len(), 2);
        let sys = partition(&spec, &[2, 6]).unwrap();
        assert!(matches!(
            build_initial(&spec, &sys, &InitialPreset::HubbardGround),
            Err(PqsError::Unsupported(_))
        ));
        let other = xx(4);
        let sys = partition(&other, &[2, 2]).unwrap();
        assert!(build_initial(&other, &sys, &InitialPreset::HubbardGround).is_err());
    }

    #[test]
    fn preset_serde_forms() {
        #[derive(Deserialize)]
        struct W {
            initial: InitialPreset,
        }
        let w: W = serde_json::from_str(r#"{"initial":"all-zero"}"#).unwrap();
        assert_eq!(w.initial, InitialPreset::AllZero);
        let w: W = serde_json::from_str(r#"{"initial":{"flip-sites":[8,9]}}"#).unwrap();
        assert_eq!(w.initial, InitialPreset::FlipSites(vec![8, 9]));
    }
}
