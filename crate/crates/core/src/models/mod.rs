//! Model Hamiltonians and their partitions.
//!
//! Every builder produces the full-register [`PauliSum`] first; [`partition`]
//! then sorts its terms by support. A term inside one block goes to that
//! block's local Hamiltonian, a term spanning blocks becomes an
//! [`InteractionTerm`], and the identity component is set aside as a constant.
//! Blocks are contiguous qubit ranges in global order.

mod hubbard;
mod initial;
mod observables;

pub use hubbard::{default_h_up, ground_state_noninteracting, jw_fermi_hubbard, SlaterState};
pub use initial::{build_initial, InitialPreset};
pub use observables::{
    build_observables, correlator, DerivedCorrelator, ObservableFamily, ObservableSet,
    ObservableSum,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, PqsError, Result};
use crate::pauli::{Pauli, PauliString, PauliSum};

/// Largest register a model may describe (Pauli masks are 64-bit).
pub const MAX_MODEL_QUBITS: usize = 64;

/// A model family with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// `J Σ Z_i Z_{i+1} + h Σ X_i`, open chain.
    Tfim {
        n: usize,
        #[serde(rename = "J", default = "one")]
        j: f64,
        h: f64,
        /// First-order Trotter steps over the run horizon for the local
        /// evolution; absent means exact local evolution.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        trotter_steps: Option<usize>,
    },
    /// Clusters of `n / clusters` sites with `Σ_{i<j} J0 |i-j|^{-alpha} X_i X_j`
    /// inside each cluster, `J0 X X` between the end sites of adjacent
    /// clusters, and `h Σ Z_i` everywhere.
    PowerLawIsing {
        n: usize,
        #[serde(rename = "J0")]
        j0: f64,
        alpha: f64,
        /// Defaults to `2 n J0`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h: Option<f64>,
        #[serde(default = "one_usize")]
        clusters: usize,
    },
    /// Hard-core bosons: `Σ J_b (X X + Y Y) + ½ Σ h_i (I - Z_i)`.
    /// Bond `boundary_bond` (between sites `b` and `b+1`, 0-based) carries
    /// `J_boundary`; every other bond carries `J`.
    XxChain {
        n: usize,
        #[serde(rename = "J")]
        j: f64,
        #[serde(rename = "J_boundary", default, skip_serializing_if = "Option::is_none")]
        j_boundary: Option<f64>,
        /// Defaults to `n/2 - 1`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        boundary_bond: Option<usize>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        onsite: Vec<f64>,
    },
    /// Spinful Hubbard chain, Jordan-Wigner encoded with spin-up sites on
    /// qubits `0..L` and spin-down sites on `L..2L`.
    FermiHubbard {
        #[serde(rename = "L")]
        l: usize,
        #[serde(rename = "J")]
        j: f64,
        #[serde(rename = "U")]
        u: f64,
        /// Defaults to the Gaussian well `-4 exp(-(j-(L+1)/2)^2 / 2)`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h_up: Option<Vec<f64>>,
        /// Defaults to zero.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h_dn: Option<Vec<f64>>,
        #[serde(rename = "N_up")]
        n_up: usize,
        #[serde(rename = "N_dn")]
        n_dn: usize,
    },
    /// Chain of clusters with `J Σ X_i X_{i+1} + h Σ Z_i` inside each and
    /// `f_l X X` across the boundary between clusters `l` and `l+1`.
    MultiCluster {
        clusters: usize,
        cluster_size: usize,
        #[serde(rename = "J")]
        j: f64,
        h: f64,
        boundary_couplings: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

impl ModelSpec {
    pub fn n_qubits(&self) -> usize {
        match self {
            ModelSpec::Tfim { n, .. }
            | ModelSpec::PowerLawIsing { n, .. }
            | ModelSpec::XxChain { n, .. } => *n,
            ModelSpec::FermiHubbard { l, .. } => 2 * l,
            ModelSpec::MultiCluster {
                clusters,
                cluster_size,
                ..
            } => clusters * cluster_size,
        }
    }

    /// Short family name used in logs and manifests.
    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Tfim { .. } => "tfim",
            ModelSpec::PowerLawIsing { .. } => "power-law-ising",
            ModelSpec::XxChain { .. } => "xx-chain",
            ModelSpec::FermiHubbard { .. } => "fermi-hubbard",
            ModelSpec::MultiCluster { .. } => "multi-cluster",
        }
    }

    pub fn trotter_steps(&self) -> Option<usize> {
        match self {
            ModelSpec::Tfim { trotter_steps, .. } => *trotter_steps,
            _ => None,
        }
    }

    /// Natural partition of the model: halves for chains, one block per
    /// cluster, the spin cut for Hubbard.
    pub fn default_cut(&self) -> Vec<usize> {
        match self {
            ModelSpec::Tfim { n, .. } | ModelSpec::XxChain { n, .. } => vec![n / 2, n - n / 2],
            ModelSpec::PowerLawIsing { n, clusters, .. } => {
                if *clusters > 1 {
                    vec![n / clusters; *clusters]
                } else {
                    vec![n / 2, n - n / 2]
                }
            }
            ModelSpec::FermiHubbard { l, .. } => vec![*l, *l],
            ModelSpec::MultiCluster {
                clusters,
                cluster_size,
                ..
            } => vec![*cluster_size; *clusters],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_qubits();
        if n > MAX_MODEL_QUBITS {
            return Err(PqsError::ResourceLimit {
                what: "model qubits".into(),
                requested: n,
                limit: MAX_MODEL_QUBITS,
            });
        }
        let finite = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                invalid(format!("model field `{name}` must be finite, got {v}"))
            }
        };
        match self {
            ModelSpec::Tfim {
                n,
                j,
                h,
                trotter_steps,
            } => {
                at_least_two("n", *n)?;
                finite("J", *j)?;
                finite("h", *h)?;
                if *trotter_steps == Some(0) {
                    return invalid("model field `trotter_steps` must be positive");
                }
            }
            ModelSpec::PowerLawIsing {
                n,
                j0,
                alpha,
                h,
                clusters,
            } => {
                at_least_two("n", *n)?;
                finite("J0", *j0)?;
                finite("alpha", *alpha)?;
                if let Some(h) = h {
                    finite("h", *h)?;
                }
                if *clusters == 0 || n % clusters != 0 {
                    return invalid(format!(
                        "model field `clusters` = {clusters} must divide n = {n}"
                    ));
                }
            }
            ModelSpec::XxChain {
                n,
                j,
                j_boundary,
                boundary_bond,
                onsite,
            } => {
                at_least_two("n", *n)?;
                finite("J", *j)?;
                if let Some(jb) = j_boundary {
                    finite("J_boundary", *jb)?;
                }
                if let Some(b) = boundary_bond {
                    if b + 1 >= *n {
                        return invalid(format!(
                            "model field `boundary_bond` = {b} is not a bond of a {n}-site chain"
                        ));
                    }
                }
                if !onsite.is_empty() && onsite.len() != *n {
                    return invalid(format!(
                        "model field `onsite` has {} entries, expected {n}",
                        onsite.len()
                    ));
                }
                for v in onsite {
                    finite("onsite", *v)?;
                }
            }
            ModelSpec::FermiHubbard {
                l,
                j,
                u,
                h_up,
                h_dn,
                n_up,
                n_dn,
            } => {
                at_least_two("L", *l)?;
                finite("J", *j)?;
                finite("U", *u)?;
                for (name, h) in [("h_up", h_up), ("h_dn", h_dn)] {
                    if let Some(h) = h {
                        if h.len() != *l {
                            return invalid(format!(
                                "model field `{name}` has {} entries, expected {l}",
                                h.len()
                            ));
                        }
                        for v in h {
                            finite(name, *v)?;
                        }
                    }
                }
                if n_up > l || n_dn > l {
                    return invalid(format!(
                        "fillings N_up = {n_up}, N_dn = {n_dn} exceed L = {l}"
                    ));
                }
            }
            ModelSpec::MultiCluster {
                clusters,
                cluster_size,
                j,
                h,
                boundary_couplings,
            } => {
                at_least_two("clusters", *clusters)?;
                at_least_two("cluster_size", *cluster_size)?;
                finite("J", *j)?;
                finite("h", *h)?;
                if boundary_couplings.len() + 1 != *clusters {
                    return invalid(format!(
                        "model field `boundary_couplings` has {} entries, expected {}",
                        boundary_couplings.len(),
                        clusters - 1
                    ));
                }
                for v in boundary_couplings {
                    finite("boundary_couplings", *v)?;
                }
            }
        }
        Ok(())
    }
}

fn at_least_two(name: &str, v: usize) -> Result<()> {
    if v < 2 {
        invalid(format!("model field `{name}` must be at least 2, got {v}"))
    } else {
        Ok(())
    }
}

/// Boundary couplings drawn uniformly from `[0, max]` with a fixed seed.
pub fn random_boundary_couplings(count: usize, max: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random::<f64>() * max).collect()
}

fn two_site(n: usize, i: usize, j: usize, p: Pauli) -> PauliString {
    PauliString::from_ops(n, &[(i, p), (j, p)]).expect("distinct in-range sites")
}

fn one_site(n: usize, i: usize, p: Pauli) -> PauliString {
    PauliString::single(n, i, p).expect("in-range site")
}

/// Full-register Hamiltonian of a model.
pub fn build_full(spec: &ModelSpec) -> Result<PauliSum> {
    spec.validate()?;
    let n = spec.n_qubits();
    let mut terms: Vec<(f64, PauliString)> = Vec::new();
    match spec {
        ModelSpec::Tfim { j, h, .. } => {
            for i in 0..n - 1 {
                terms.push((*j, two_site(n, i, i + 1, Pauli::Z)));
            }
            for i in 0..n {
                terms.push((*h, one_site(n, i, Pauli::X)));
            }
        }
        ModelSpec::PowerLawIsing {
            j0,
            alpha,
            h,
            clusters,
            ..
        } => {
            let size = n / clusters;
            for c in 0..*clusters {
                let base = c * size;
                for a in 0..size {
                    for b in a + 1..size {
                        let jij = j0 * ((b - a) as f64).powf(-alpha);
                        terms.push((jij, two_site(n, base + a, base + b, Pauli::X)));
                    }
                }
                if c + 1 < *clusters {
                    terms.push((*j0, two_site(n, base + size - 1, base + size, Pauli::X)));
                }
            }
            let field = h.unwrap_or(2.0 * n as f64 * j0);
            for i in 0..n {
                terms.push((field, one_site(n, i, Pauli::Z)));
            }
        }
        ModelSpec::XxChain {
            j,
            j_boundary,
            boundary_bond,
            onsite,
            ..
        } => {
            let bb = boundary_bond.unwrap_or(n / 2 - 1);
            for i in 0..n - 1 {
                let c = if i == bb { j_boundary.unwrap_or(*j) } else { *j };
                terms.push((c, two_site(n, i, i + 1, Pauli::X)));
                terms.push((c, two_site(n, i, i + 1, Pauli::Y)));
            }
            for (i, hi) in onsite.iter().enumerate() {
                terms.push((0.5 * hi, PauliString::identity(n)));
                terms.push((-0.5 * hi, one_site(n, i, Pauli::Z)));
            }
        }
        ModelSpec::FermiHubbard { .. } => {
            let (full, _) = hubbard::jw_terms(spec)?;
            return Ok(full);
        }
        ModelSpec::MultiCluster {
            clusters,
            cluster_size,
            j,
            h,
            boundary_couplings,
        } => {
            for c in 0..*clusters {
                let base = c * cluster_size;
                for a in 0..cluster_size - 1 {
                    terms.push((*j, two_site(n, base + a, base + a + 1, Pauli::X)));
                }
                for a in 0..*cluster_size {
                    terms.push((*h, one_site(n, base + a, Pauli::Z)));
                }
                if c + 1 < *clusters {
                    let f = boundary_couplings[c];
                    terms.push((f, two_site(n, base + cluster_size - 1, base + cluster_size, Pauli::X)));
                }
            }
        }
    }
    PauliSum::from_terms(n, terms)
}

/// One cross-subsystem term `λ_j ⊗_l V_{j,l}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionTerm {
    pub lambda: f64,
    /// One string per subsystem, in that subsystem's local indices.
    pub factors: Vec<PauliString>,
}

impl InteractionTerm {
    pub fn new(lambda: f64, factors: Vec<PauliString>) -> Result<Self> {
        if lambda == 0.0 || !lambda.is_finite() {
            return invalid(format!("interaction coefficient must be finite and nonzero, got {lambda}"));
        }
        let touched = factors.iter().filter(|f| !f.is_identity()).count();
        if touched < 2 {
            return invalid("an interaction term must act on at least two subsystems");
        }
        Ok(Self { lambda, factors })
    }

    /// Indices of subsystems with a non-identity factor.
    pub fn support(&self) -> Vec<usize> {
        self.factors
            .iter()
            .enumerate()
            .filter(|(_, f)| !f.is_identity())
            .map(|(l, _)| l)
            .collect()
    }
}

/// A Hamiltonian split into subsystem parts and cross terms.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedSystem {
    subsystem_sizes: Vec<usize>,
    local_hams: Vec<PauliSum>,
    interactions: Vec<InteractionTerm>,
    /// Global qubit `g` lives at `(subsystem, local index)`.
    global_to_local: Vec<(usize, usize)>,
    dropped_constant: f64,
}

impl PartitionedSystem {
    /// Assembles a system from parts; blocks are laid out contiguously.
    pub fn new(
        subsystem_sizes: Vec<usize>,
        local_hams: Vec<PauliSum>,
        interactions: Vec<InteractionTerm>,
    ) -> Result<Self> {
        if subsystem_sizes.is_empty() || subsystem_sizes.contains(&0) {
            return invalid(format!("subsystem sizes must be positive, got {subsystem_sizes:?}"));
        }
        if local_hams.len() != subsystem_sizes.len() {
            return invalid(format!(
                "{} local Hamiltonians for {} subsystems",
                local_hams.len(),
                subsystem_sizes.len()
            ));
        }
        for (h, &n) in local_hams.iter().zip(&subsystem_sizes) {
            crate::error::check_qubits(n, h.n_qubits())?;
        }
        for term in &interactions {
            if term.factors.len() != subsystem_sizes.len() {
                return invalid("interaction factor count differs from subsystem count");
            }
            for (f, &n) in term.factors.iter().zip(&subsystem_sizes) {
                crate::error::check_qubits(n, f.n_qubits())?;
            }
        }
        let total: usize = subsystem_sizes.iter().sum();
        if total > MAX_MODEL_QUBITS {
            return Err(PqsError::ResourceLimit {
                what: "model qubits".into(),
                requested: total,
                limit: MAX_MODEL_QUBITS,
            });
        }
        let mut global_to_local = Vec::with_capacity(total);
        for (l, &n) in subsystem_sizes.iter().enumerate() {
            global_to_local.extend((0..n).map(|k| (l, k)));
        }
        Ok(Self {
            subsystem_sizes,
            local_hams,
            interactions,
            global_to_local,
            dropped_constant: 0.0,
        })
    }

    pub fn subsystem_sizes(&self) -> &[usize] {
        &self.subsystem_sizes
    }

    pub fn n_subsystems(&self) -> usize {
        self.subsystem_sizes.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.global_to_local.len()
    }

    pub fn local_hams(&self) -> &[PauliSum] {
        &self.local_hams
    }

    pub fn interactions(&self) -> &[InteractionTerm] {
        &self.interactions
    }

    pub fn global_to_local(&self) -> &[(usize, usize)] {
        &self.global_to_local
    }

    pub fn dropped_constant(&self) -> f64 {
        self.dropped_constant
    }

    /// First global qubit of subsystem `l`.
    pub fn offset(&self, l: usize) -> usize {
        self.subsystem_sizes[..l].iter().sum()
    }

    /// Global qubits of subsystem `l`, in local order.
    pub fn qubits(&self, l: usize) -> Vec<usize> {
        let o = self.offset(l);
        (o..o + self.subsystem_sizes[l]).collect()
    }

    pub fn lambda_total(&self) -> f64 {
        self.interactions.iter().map(|t| t.lambda.abs()).sum()
    }

    /// Splits a global string into per-subsystem local strings.
    pub fn split(&self, p: &PauliString) -> Result<Vec<PauliString>> {
        crate::error::check_qubits(self.n_qubits(), p.n_qubits())?;
        Ok((0..self.n_subsystems())
            .map(|l| p.restrict(&self.qubits(l)))
            .collect())
    }

    /// Embeds per-subsystem strings back into the full register.
    pub fn join(&self, factors: &[PauliString]) -> Result<PauliString> {
        let n = self.n_qubits();
        let mut x = 0u64;
        let mut z = 0u64;
        for (l, f) in factors.iter().enumerate() {
            let g = f.embed(n, &self.qubits(l))?;
            x |= g.x_mask();
            z |= g.z_mask();
        }
        PauliString::new(n, x, z)
    }

    /// `Σ_l H_l + Σ_j λ_j V_j + constant` on the full register.
    pub fn reassemble(&self) -> Result<PauliSum> {
        let n = self.n_qubits();
        let mut terms = Vec::new();
        if self.dropped_constant != 0.0 {
            terms.push((self.dropped_constant, PauliString::identity(n)));
        }
        for (l, h) in self.local_hams.iter().enumerate() {
            for (c, p) in h.embed(n, &self.qubits(l))?.terms() {
                terms.push((*c, *p));
            }
        }
        for t in &self.interactions {
            terms.push((t.lambda, self.join(&t.factors)?));
        }
        PauliSum::from_terms(n, terms)
    }

    /// Partitions an arbitrary full-register Hamiltonian into contiguous
    /// blocks of the given sizes.
    pub fn from_full(full: &PauliSum, cut: &[usize]) -> Result<Self> {
        let total: usize = cut.iter().sum();
        if total != full.n_qubits() || cut.contains(&0) {
            return invalid(format!(
                "`cut` {cut:?} must consist of positive sizes summing to {} qubits",
                full.n_qubits()
            ));
        }
        let mut sys = PartitionedSystem::new(
            cut.to_vec(),
            cut.iter().map(|&n| PauliSum::new(n)).collect(),
            Vec::new(),
        )?;
        let mut local_terms: Vec<Vec<(f64, PauliString)>> = vec![Vec::new(); cut.len()];
        for (c, p) in full.terms() {
            if p.is_identity() {
                sys.dropped_constant += c;
                continue;
            }
            let factors = sys.split(p)?;
            let touched: Vec<usize> = (0..cut.len()).filter(|&l| !factors[l].is_identity()).collect();
            if touched.len() == 1 {
                local_terms[touched[0]].push((*c, factors[touched[0]]));
            } else {
                sys.interactions.push(InteractionTerm::new(*c, factors)?);
            }
        }
        if sys.dropped_constant != 0.0 {
            log::info!(
                "dropping identity component {} from the partitioned Hamiltonian",
                sys.dropped_constant
            );
        }
        for (l, t) in local_terms.into_iter().enumerate() {
            sys.local_hams[l] = PauliSum::from_terms(cut[l], t)?;
        }
        Ok(sys)
    }
}

/// Partitions a model along `cut` (contiguous block sizes in qubit order).
pub fn partition(spec: &ModelSpec, cut: &[usize]) -> Result<PartitionedSystem> {
    let full = build_full(spec)?;
    let total: usize = cut.iter().sum();
    if total != spec.n_qubits() {
        return invalid(format!(
            "`cut` {cut:?} sums to {total} qubits but the model has {}",
            spec.n_qubits()
        ));
    }
    let mut sys = PartitionedSystem::from_full(&full, cut)?;
    if let ModelSpec::FermiHubbard { .. } = spec {
        let (_, constant) = hubbard::jw_terms(spec)?;
        sys.dropped_constant += constant;
    }
    Ok(sys)
}
