//! Observables as sums of products of per-subsystem operators.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{InitialPreset, ModelSpec, PartitionedSystem};
use crate::engine::EstimatorResult;
use crate::error::{check_qubits, invalid, PqsError, Result};
use crate::pauli::{LocalOp, Pauli, PauliString, PauliSum};

/// `Σ_k c_k ⊗_l O_{k,l}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSum {
    pub name: String,
    pub terms: Vec<(f64, Vec<LocalOp>)>,
}

impl ObservableSum {
    pub fn new(
        name: impl Into<String>,
        terms: Vec<(f64, Vec<LocalOp>)>,
        sizes: &[usize],
    ) -> Result<Self> {
        let obs = Self {
            name: name.into(),
            terms,
        };
        obs.validate(sizes)?;
        Ok(obs)
    }

    /// The all-identity observable (trace check).
    pub fn identity(name: impl Into<String>, n_subsystems: usize) -> Self {
        Self {
            name: name.into(),
            terms: vec![(1.0, vec![LocalOp::Identity; n_subsystems])],
        }
    }

    pub fn validate(&self, sizes: &[usize]) -> Result<()> {
        for (c, ops) in &self.terms {
            if !c.is_finite() {
                return invalid(format!("observable {} has a non-finite coefficient", self.name));
            }
            if ops.len() != sizes.len() {
                return invalid(format!(
                    "observable {} has {} factors for {} subsystems",
                    self.name,
                    ops.len(),
                    sizes.len()
                ));
            }
            for (op, &n) in ops.iter().zip(sizes) {
                match op {
                    LocalOp::Identity => {}
                    LocalOp::Pauli(h) => check_qubits(n, h.n_qubits())?,
                    LocalOp::Projector(s) => {
                        if *s >= 1usize << n {
                            return invalid(format!(
                                "observable {}: projector index {s} outside {n} qubits",
                                self.name
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Factorises a full-register Pauli sum over the partition. Terms living
    /// on a single subsystem are pooled into one local sum per subsystem;
    /// the identity component becomes an all-identity product.
    pub fn from_pauli_sum(
        name: impl Into<String>,
        full: &PauliSum,
        system: &PartitionedSystem,
    ) -> Result<Self> {
        check_qubits(system.n_qubits(), full.n_qubits())?;
        let nsub = system.n_subsystems();
        let sizes = system.subsystem_sizes();
        let mut constant = 0.0;
        let mut pooled: Vec<Vec<(f64, PauliString)>> = vec![Vec::new(); nsub];
        let mut products = Vec::new();
        for (c, p) in full.terms() {
            if p.is_identity() {
                constant += c;
                continue;
            }
            let factors = system.split(p)?;
            let touched: Vec<usize> = (0..nsub).filter(|&l| !factors[l].is_identity()).collect();
            if touched.len() == 1 {
                pooled[touched[0]].push((*c, factors[touched[0]]));
            } else {
                let ops = factors
                    .into_iter()
                    .map(|f| {
                        if f.is_identity() {
                            LocalOp::Identity
                        } else {
                            LocalOp::Pauli(PauliSum::single(1.0, f))
                        }
                    })
                    .collect();
                products.push((*c, ops));
            }
        }
        let mut terms = Vec::new();
        if constant != 0.0 {
            terms.push((constant, vec![LocalOp::Identity; nsub]));
        }
        for (l, t) in pooled.into_iter().enumerate() {
            if t.is_empty() {
                continue;
            }
            let mut ops = vec![LocalOp::Identity; nsub];
            ops[l] = LocalOp::Pauli(PauliSum::from_terms(sizes[l], t)?);
            terms.push((1.0, ops));
        }
        terms.extend(products);
        Self::new(name, terms, sizes)
    }
}

/// `⟨Z_i Z_j⟩ - ⟨Z_i⟩⟨Z_j⟩` assembled from three base estimates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedCorrelator {
    pub name: String,
    pub zz: usize,
    pub zi: usize,
    pub zj: usize,
}

/// Combines base estimates into a connected correlator. The standard error
/// treats the three inputs as independent.
pub fn correlator(
    name: &str,
    zz: &EstimatorResult,
    zi: &EstimatorResult,
    zj: &EstimatorResult,
) -> EstimatorResult {
    let mean = zz.mean - zi.mean * zj.mean;
    let stderr = (zz.stderr.powi(2)
        + (zj.mean * zi.stderr).powi(2)
        + (zi.mean * zj.stderr).powi(2))
    .sqrt();
    EstimatorResult {
        observable: name.to_string(),
        mean,
        stderr,
        ..zz.clone()
    }
}

/// Observable families addressable from a config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ObservableFamily {
    Identity,
    /// `n_j = (I - Z_j)/2` on every site (both sectors for Hubbard).
    Density,
    /// `(1/N) Σ Z_i`.
    Magnetization,
    /// `(1/(N-1)) Σ Z_i Z_{i+1}`.
    NnCorrelation,
    /// `n_i n_j` for all `i < j`.
    DensityDensity,
    ChargeDensity,
    SpinDensity,
    SeparationSpeed,
    /// `|⟨0|ψ(t)⟩|²` as the expectation of `⊗_l |0⟩⟨0|`.
    Loschmidt,
    /// Connected `Z Z` correlator between sites `j` and `j + d` (1-based).
    Correlator { site: usize, distance: usize },
}

impl FromStr for ObservableFamily {
    type Err = PqsError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "identity" => Self::Identity,
            "density" => Self::Density,
            "magnetization" => Self::Magnetization,
            "nn-correlation" => Self::NnCorrelation,
            "density-density" => Self::DensityDensity,
            "charge-density" => Self::ChargeDensity,
            "spin-density" => Self::SpinDensity,
            "separation-speed" => Self::SeparationSpeed,
            "loschmidt" => Self::Loschmidt,
            other => {
                let parts: Vec<&str> = other.split(':').collect();
                match parts.as_slice() {
                    ["correlator", j, d] => {
                        let site = j.parse().map_err(|_| bad_family(other))?;
                        let distance = d.parse().map_err(|_| bad_family(other))?;
                        Self::Correlator { site, distance }
                    }
                    _ => return Err(bad_family(other)),
                }
            }
        })
    }
}

fn bad_family(s: &str) -> PqsError {
    PqsError::InvalidArgument(format!(
        "unknown observable `{s}`; expected one of identity, density, magnetization, \
         nn-correlation, density-density, charge-density, spin-density, separation-speed, \
         loschmidt, correlator:<site>:<distance>"
    ))
}

impl TryFrom<String> for ObservableFamily {
    type Error = PqsError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ObservableFamily> for String {
    fn from(f: ObservableFamily) -> String {
        f.to_string()
    }
}

impl fmt::Display for ObservableFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "identity"),
            Self::Density => write!(f, "density"),
            Self::Magnetization => write!(f, "magnetization"),
            Self::NnCorrelation => write!(f, "nn-correlation"),
            Self::DensityDensity => write!(f, "density-density"),
            Self::ChargeDensity => write!(f, "charge-density"),
            Self::SpinDensity => write!(f, "spin-density"),
            Self::SeparationSpeed => write!(f, "separation-speed"),
            Self::Loschmidt => write!(f, "loschmidt"),
            Self::Correlator { site, distance } => write!(f, "correlator:{site}:{distance}"),
        }
    }
}

/// Linear observables plus correlators derived from them.
#[derive(Debug, Clone, Default)]
pub struct ObservableSet {
    pub observables: Vec<ObservableSum>,
    pub derived: Vec<DerivedCorrelator>,
}

impl ObservableSet {
    fn index_or_push(&mut self, obs: ObservableSum) -> usize {
        if let Some(k) = self.observables.iter().position(|o| o.name == obs.name) {
            return k;
        }
        self.observables.push(obs);
        self.observables.len() - 1
    }

    /// Appends derived correlators to per-`(observable, time)` results laid
    /// out time-major as produced by the engine.
    pub fn with_derived(&self, results: &[EstimatorResult]) -> Vec<EstimatorResult> {
        let nobs = self.observables.len();
        let mut out = Vec::with_capacity(results.len());
        for chunk in results.chunks(nobs.max(1)) {
            out.extend_from_slice(chunk);
            for d in &self.derived {
                out.push(correlator(&d.name, &chunk[d.zz], &chunk[d.zi], &chunk[d.zj]));
            }
        }
        out
    }
}

fn z(n: usize, q: usize) -> PauliString {
    PauliString::single(n, q, Pauli::Z).expect("site in range")
}

fn zz(n: usize, a: usize, b: usize) -> PauliString {
    PauliString::from_ops(n, &[(a, Pauli::Z), (b, Pauli::Z)]).expect("distinct sites")
}

/// `(I - Z_q)/2`.
fn number(n: usize, q: usize) -> Vec<(f64, PauliString)> {
    vec![(0.5, PauliString::identity(n)), (-0.5, z(n, q))]
}

/// Builds the requested families for a partitioned model.
pub fn build_observables(
    spec: &ModelSpec,
    system: &PartitionedSystem,
    families: &[ObservableFamily],
    initial: &InitialPreset,
) -> Result<ObservableSet> {
    let n = system.n_qubits();
    if n != spec.n_qubits() {
        return invalid("partition and model disagree on the qubit count");
    }
    let hub = matches!(spec, ModelSpec::FermiHubbard { .. });
    let mut set = ObservableSet::default();
    let sum = |name: String, terms: Vec<(f64, PauliString)>| -> Result<ObservableSum> {
        ObservableSum::from_pauli_sum(name, &PauliSum::from_terms(n, terms)?, system)
    };
    let hubbard_only = |fam: &ObservableFamily| -> Result<usize> {
        match spec {
            ModelSpec::FermiHubbard { l, .. } => Ok(*l),
            _ => Err(PqsError::Unsupported(format!(
                "observable `{fam}` is defined for fermi-hubbard models only"
            ))),
        }
    };
    for fam in families {
        match fam {
            ObservableFamily::Identity => {
                set.index_or_push(ObservableSum::identity("identity", system.n_subsystems()));
            }
            ObservableFamily::Density => {
                if hub {
                    let l = n / 2;
                    for (tag, base) in [("up", 0), ("dn", l)] {
                        for s in 0..l {
                            set.index_or_push(sum(format!("n_{tag}_{}", s + 1), number(n, base + s))?);
                        }
                    }
                } else {
                    for q in 0..n {
                        set.index_or_push(sum(format!("n_{}", q + 1), number(n, q))?);
                    }
                }
            }
            ObservableFamily::Magnetization => {
                let terms = (0..n).map(|q| (1.0 / n as f64, z(n, q))).collect();
                set.index_or_push(sum("M_z".into(), terms)?);
            }
            ObservableFamily::NnCorrelation => {
                let terms = (0..n - 1)
                    .map(|q| (1.0 / (n - 1) as f64, zz(n, q, q + 1)))
                    .collect();
                set.index_or_push(sum("C_nn".into(), terms)?);
            }
            ObservableFamily::DensityDensity => {
                for a in 0..n {
                    for b in a + 1..n {
                        // (I - Z_a)(I - Z_b)/4
                        let terms = vec![
                            (0.25, PauliString::identity(n)),
                            (-0.25, z(n, a)),
                            (-0.25, z(n, b)),
                            (0.25, zz(n, a, b)),
                        ];
                        set.index_or_push(sum(format!("rho_{}_{}", a + 1, b + 1), terms)?);
                    }
                }
            }
            ObservableFamily::ChargeDensity | ObservableFamily::SpinDensity => {
                let l = hubbard_only(fam)?;
                let (tag, sign) = if *fam == ObservableFamily::ChargeDensity {
                    ("c", 1.0)
                } else {
                    ("s", -1.0)
                };
                for s in 0..l {
                    let mut terms = number(n, s);
                    terms.extend(number(n, l + s).into_iter().map(|(c, p)| (sign * c, p)));
                    set.index_or_push(sum(format!("rho_{tag}_{}", s + 1), terms)?);
                }
            }
            ObservableFamily::SeparationSpeed => {
                let l = hubbard_only(fam)?;
                let centre = (l as f64 + 1.0) / 2.0;
                for (tag, sign) in [("c", 1.0), ("s", -1.0)] {
                    let mut terms = Vec::new();
                    for s in 0..l {
                        let w = ((s + 1) as f64 - centre).abs();
                        terms.extend(number(n, s).into_iter().map(|(c, p)| (w * c, p)));
                        terms.extend(number(n, l + s).into_iter().map(|(c, p)| (sign * w * c, p)));
                    }
                    set.index_or_push(sum(format!("kappa_{tag}"), terms)?);
                }
            }
            ObservableFamily::Loschmidt => {
                if !initial.is_all_zero() {
                    return Err(PqsError::Unsupported(
                        "the loschmidt observable assumes the all-zero initial state".into(),
                    ));
                }
                set.index_or_push(ObservableSum::new(
                    "G",
                    vec![(1.0, vec![LocalOp::Projector(0); system.n_subsystems()])],
                    system.subsystem_sizes(),
                )?);
            }
            ObservableFamily::Correlator { site, distance } => {
                let (i, j) = (*site, site + distance);
                if *site == 0 || *distance == 0 || j > n {
                    return invalid(format!(
                        "correlator sites {i} and {j} must be distinct and within 1..={n}"
                    ));
                }
                let zi = set.index_or_push(sum(format!("Z_{i}"), vec![(1.0, z(n, i - 1))])?);
                let zj = set.index_or_push(sum(format!("Z_{j}"), vec![(1.0, z(n, j - 1))])?);
                let zzk = set.index_or_push(sum(format!("ZZ_{i}_{j}"), vec![(1.0, zz(n, i - 1, j - 1))])?);
                let name = format!("C_{i}_{j}");
                if !set.derived.iter().any(|d| d.name == name) {
                    set.derived.push(DerivedCorrelator {
                        name,
                        zz: zzk,
                        zi,
                        zj,
                    });
                }
            }
        }
    }
    Ok(set)
}
