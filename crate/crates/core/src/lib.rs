//! Classical emulator for perturbative quantum simulation of partitioned
//! spin Hamiltonians.
//!
//! A Hamiltonian `H = Σ_l H_l + Σ_j λ_j V_j` is split into subsystem parts
//! `H_l` and cross-subsystem Pauli products `V_j`. The joint evolution is
//! reconstructed from per-subsystem statevectors alone by sampling random
//! Pauli insertions on the ket and bra sides of the density operator and
//! reweighting by the sampling overhead `e^{2λt}`, `λ = Σ_j |λ_j|`.
//!
//! Modules, bottom-up:
//!
//! * [`pauli`]: Pauli strings and sums, statevectors, bilinear forms.
//! * [`evolve`]: Krylov and dense time evolution.
//! * [`models`]: model Hamiltonians, partitions, initial states, observables.
//! * [`engine`]: trajectory sampling and the Monte Carlo estimators.
//! * [`verify`]: exact oracles, the Choi trace-norm cost bound, Dyson
//!   cost/error envelopes, Lieb-Robinson Bessel bound.

pub mod engine;
pub mod error;
pub mod evolve;
pub mod models;
pub mod pauli;
pub mod verify;

pub use error::{PqsError, Result};
