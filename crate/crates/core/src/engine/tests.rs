use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::evolve::evolve_dense;
use crate::models::{partition, ModelSpec};
use crate::pauli::{bilinear, Pauli, PauliString, PauliSum};

fn z(n: usize, q: usize) -> PauliString {
    PauliString::single(n, q, Pauli::Z).unwrap()
}

fn x(n: usize, q: usize) -> PauliString {
    PauliString::single(n, q, Pauli::X).unwrap()
}

fn plus() -> StateVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    StateVector::new(1, vec![C64::new(s, 0.0); 2]).unwrap()
}

/// Two free qubits coupled by `λ Z⊗Z`.
fn zz_pair(lambda: f64) -> PartitionedSystem {
    let term = InteractionTerm::new(lambda, vec![z(1, 0), z(1, 0)]).unwrap();
    PartitionedSystem::new(vec![1, 1], vec![PauliSum::new(1), PauliSum::new(1)], vec![term]).unwrap()
}

fn x_first() -> ObservableSum {
    ObservableSum::new(
        "X1",
        vec![(1.0, vec![LocalOp::Pauli(PauliSum::single(1.0, x(1, 0))), LocalOp::Identity])],
        &[1, 1],
    )
    .unwrap()
}

fn random_string<R: Rng>(n: usize, rng: &mut R, nontrivial: bool) -> PauliString {
    loop {
        let xm = rng.random::<u64>() & ((1 << n) - 1);
        let zm = rng.random::<u64>() & ((1 << n) - 1);
        let p = PauliString::new(n, xm, zm).unwrap();
        if !nontrivial || !p.is_identity() {
            return p;
        }
    }
}

fn random_system(sizes: &[usize], n_terms: usize, seed: u64) -> PartitionedSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hams = sizes
        .iter()
        .map(|&n| {
            let terms: Vec<_> = (0..3 * n)
                .map(|_| (rng.random_range(-1.0..1.0), random_string(n, &mut rng, true)))
                .collect();
            PauliSum::from_terms(n, terms).unwrap()
        })
        .collect();
    let terms = (0..n_terms)
        .map(|_| {
            let factors = sizes.iter().map(|&n| random_string(n, &mut rng, true)).collect();
            InteractionTerm::new(rng.random_range(-0.5..0.5), factors).unwrap()
        })
        .collect();
    PartitionedSystem::new(sizes.to_vec(), hams, terms).unwrap()
}

fn random_state<R: Rng>(n: usize, rng: &mut R) -> StateVector {
    let amps: Vec<C64> = (0..1 << n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::new(n, amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

fn mixed_observables(sizes: &[usize], seed: u64) -> Vec<ObservableSum> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let local = |rng: &mut ChaCha8Rng, n: usize| {
        LocalOp::Pauli(PauliSum::single(1.0, random_string(n, rng, true)))
    };
    let a = ObservableSum::new(
        "a",
        vec![
            (0.7, sizes.iter().map(|&n| local(&mut rng, n)).collect()),
            (-0.3, vec![LocalOp::Identity; sizes.len()]),
        ],
        sizes,
    )
    .unwrap();
    let mut ops = vec![LocalOp::Identity; sizes.len()];
    ops[0] = LocalOp::Projector(1);
    let b = ObservableSum::new("b", vec![(1.0, ops)], sizes).unwrap();
    vec![a, b, ObservableSum::identity("id", sizes.len())]
}

/// Per-trajectory contraction computed from dense subsystem propagators.
fn dense_contribution(
    system: &PartitionedSystem,
    initial: &[StateVector],
    obs: &ObservableSum,
    traj: &Trajectory,
    t: f64,
    weight: f64,
) -> C64 {
    let decomp = decompose(system);
    let evolve_side = |l: usize, side: Side| {
        let h = &system.local_hams()[l];
        let mut s = initial[l].clone();
        let mut now = 0.0;
        for j in traj.jumps.iter().filter(|j| j.time <= t && j.side == side) {
            let f = decomp.terms()[j.term].factors[l];
            if f.is_identity() {
                continue;
            }
            s = evolve_dense(&s, h, j.time - now).unwrap();
            s = crate::pauli::apply_pauli(&s, &f).unwrap();
            now = j.time;
        }
        evolve_dense(&s, h, t - now).unwrap()
    };
    let nsub = system.n_subsystems();
    let kets: Vec<_> = (0..nsub).map(|l| evolve_side(l, Side::Ket)).collect();
    let bras: Vec<_> = (0..nsub).map(|l| evolve_side(l, Side::Bra)).collect();
    let phase = traj
        .jumps
        .iter()
        .filter(|j| j.time <= t)
        .fold(C64::new(1.0, 0.0), |acc, j| acc * decomp.jump_phase(j.term, j.side));
    let sum: C64 = obs
        .terms
        .iter()
        .map(|(c, ops)| {
            ops.iter()
                .enumerate()
                .fold(C64::new(*c, 0.0), |acc, (l, op)| acc * bilinear(&bras[l], op, &kets[l]).unwrap())
        })
        .sum();
    sum * phase * weight
}

#[test]
fn decomposition_examples() {
    let spec = ModelSpec::Tfim {
        n: 8,
        j: 1.0,
        h: 1.0,
        trotter_steps: None,
    };
    let d = decompose(&partition(&spec, &[4, 4]).unwrap());
    assert_eq!(d.lambda_total(), 1.0);
    assert_eq!(d.rate(), 2.0);
    assert_abs_diff_eq!(d.overhead(1.0), 7.38905609893065, epsilon = 1e-12);

    let empty = ExplicitDecomposition::new(vec![]);
    assert_eq!(empty.rate(), 0.0);
    assert_eq!(empty.overhead(5.0), 1.0);

    let spec = ModelSpec::XxChain {
        n: 8,
        j: 1.0,
        j_boundary: Some(0.4),
        boundary_bond: None,
        onsite: vec![],
    };
    let d = decompose(&partition(&spec, &[4, 4]).unwrap());
    assert_abs_diff_eq!(d.lambda_total(), 0.8, epsilon = 1e-15);
    assert_eq!(d.term_probs(), &[0.5, 0.5]);
}

#[test]
fn jump_phases_follow_sign() {
    let d = ExplicitDecomposition::new(vec![
        InteractionTerm::new(0.3, vec![z(1, 0), z(1, 0)]).unwrap(),
        InteractionTerm::new(-0.2, vec![x(1, 0), x(1, 0)]).unwrap(),
    ]);
    assert_eq!(d.jump_phase(0, Side::Ket), C64::new(0.0, -1.0));
    assert_eq!(d.jump_phase(0, Side::Bra), C64::new(0.0, 1.0));
    assert_eq!(d.jump_phase(1, Side::Ket), C64::new(0.0, 1.0));
    assert_eq!(d.sample_term(0.0), 0);
    assert_eq!(d.sample_term(0.59), 0);
    assert_eq!(d.sample_term(0.61), 1);
    assert_eq!(d.sample_term(0.999_999), 1);
}

#[test]
fn jump_interval_inverts_survival() {
    assert_abs_diff_eq!(jump_interval((-2.0f64).exp(), 2.0), 1.0, epsilon = 1e-15);
    assert_eq!(jump_interval(1.0, 2.0), 0.0);
    assert!(jump_interval(0.5, 0.0).is_infinite());
}

#[test]
fn zero_rate_gives_empty_trajectory() {
    let d = ExplicitDecomposition::new(vec![]);
    let mut rng = trajectory_rng(1, 0);
    let t = sample_trajectory(&d, 3.0, &mut rng, None);
    assert!(t.jumps.is_empty());
    assert_eq!(t.phase(&d), C64::new(1.0, 0.0));
}

#[test]
fn mean_jump_count_matches_rate() {
    let d = decompose(&zz_pair(0.75));
    let horizon = 1.2;
    let n = 100_000;
    let total: usize = (0..n)
        .map(|i| sample_trajectory(&d, horizon, &mut trajectory_rng(9, i), None).jumps.len())
        .sum();
    let mean = total as f64 / n as f64;
    let at = d.rate() * horizon;
    assert!((mean - at).abs() <= 3.0 * (at / n as f64).sqrt(), "mean {mean} vs {at}");
}

#[test]
fn max_jumps_truncates() {
    let d = decompose(&zz_pair(2.0));
    for i in 0..200 {
        let full = sample_trajectory(&d, 3.0, &mut trajectory_rng(4, i), None);
        let cut = sample_trajectory(&d, 3.0, &mut trajectory_rng(4, i), Some(2));
        assert!(cut.jumps.len() <= 2);
        assert_eq!(cut.jumps[..], full.jumps[..cut.jumps.len()]);
    }
}

#[test]
fn dyson_sampler_respects_order() {
    let d = decompose(&zz_pair(0.5));
    let mut counts = [0usize; 4];
    let n = 40_000;
    for i in 0..n {
        let t = sample_dyson_trajectory(&d, 1.0, 3, &mut trajectory_rng(2, i));
        t.validate().unwrap();
        counts[t.jumps.len()] += 1;
    }
    // weights 1, 1, 1/2, 1/6 for αT = 1
    let norm = 1.0 + 1.0 + 0.5 + 1.0 / 6.0;
    for (k, w) in [1.0, 1.0, 0.5, 1.0 / 6.0].iter().enumerate() {
        let p = w / norm;
        let f = counts[k] as f64 / n as f64;
        assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "k={k}: {f} vs {p}");
    }
    let zero = sample_dyson_trajectory(&d, 1.0, 0, &mut trajectory_rng(2, 0));
    assert!(zero.jumps.is_empty());
}

#[test]
fn trajectory_validation() {
    let j = |time| Jump {
        time,
        term: 0,
        side: Side::Ket,
    };
    assert!(Trajectory::new(vec![j(0.2), j(0.5)], 1.0).is_ok());
    assert!(Trajectory::new(vec![j(0.5), j(0.2)], 1.0).is_err());
    assert!(Trajectory::new(vec![j(0.0)], 1.0).is_err());
    assert!(Trajectory::new(vec![j(1.0)], 1.0).is_err());
    assert!(Trajectory::new(vec![], -1.0).is_err());
}

#[test]
fn zero_jump_contribution_is_product_of_local_values() {
    let sys = random_system(&[2, 3], 2, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let init = vec![random_state(2, &mut rng), random_state(3, &mut rng)];
    let obs = mixed_observables(&[2, 3], 7);
    let grid = vec![0.0, 0.4, 1.0];
    let engine = Engine::new(&sys, &init, &obs, EngineOptions::new(1.0, grid.clone())).unwrap();
    let out = engine
        .run_trajectory(&Trajectory::empty(1.0), SamplingMode::default())
        .unwrap();
    let rate = engine.decomposition().rate();
    for (o, ob) in obs.iter().enumerate() {
        for (g, &t) in grid.iter().enumerate() {
            let expect = dense_contribution(&sys, &init, ob, &Trajectory::empty(1.0), t, (rate * t).exp());
            assert_abs_diff_eq!(out.contributions[o][g].re, expect.re, epsilon = 1e-10);
            assert_abs_diff_eq!(out.contributions[o][g].im, expect.im, epsilon = 1e-10);
        }
    }
    // identity observable: real weight only
    assert_abs_diff_eq!(out.contributions[2][2].re, (rate * 1.0).exp(), epsilon = 1e-10);
}

fn check_backend(method: LocalMethod, tol: f64) {
    let sizes = [2, 3];
    let sys = random_system(&sizes, 3, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let init = vec![random_state(2, &mut rng), random_state(3, &mut rng)];
    let obs = mixed_observables(&sizes, 13);
    let grid = vec![0.25, 0.5, 0.9];
    let opts = EngineOptions {
        local_method: method,
        ..EngineOptions::new(1.1, grid.clone())
    };
    let engine = Engine::new(&sys, &init, &obs, opts).unwrap();
    let decomp = engine.decomposition().clone();
    for i in 0..30 {
        let traj = sample_trajectory(&decomp, 1.1, &mut trajectory_rng(3, i), None);
        let out = engine.run_trajectory(&traj, SamplingMode::default()).unwrap();
        for (o, ob) in obs.iter().enumerate() {
            for (g, &t) in grid.iter().enumerate() {
                let expect = dense_contribution(&sys, &init, ob, &traj, t, decomp.overhead(t));
                let got = out.contributions[o][g];
                assert!((got - expect).norm() <= tol, "{method:?} traj {i} obs {o} t {t}: {got} vs {expect}");
            }
        }
        for s in out.branches.kets.iter().chain(&out.branches.bras) {
            assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-8);
        }
    }
}

#[test]
fn spectral_backend_matches_dense_trajectories() {
    check_backend(LocalMethod::Spectral, 1e-9);
}

#[test]
fn krylov_backend_matches_dense_trajectories() {
    check_backend(LocalMethod::Krylov, 1e-7);
}

#[test]
fn fine_trotter_backend_approaches_dense_trajectories() {
    check_backend(LocalMethod::Trotter { steps: 4000 }, 5e-3);
}

#[test]
fn trotter_single_step_is_a_product_of_rotations() {
    // one step, no jumps: state = Π_k e^{-i c_k P_k T} ψ0
    let n = 2;
    let h = PauliSum::from_terms(n, vec![(0.7, z(n, 0)), (0.4, x(n, 1)), (-0.3, x(n, 0))]).unwrap();
    let sys = PartitionedSystem::new(vec![n, 1], vec![h.clone(), PauliSum::new(1)], vec![]).unwrap();
    let init = vec![StateVector::basis(2, 0).unwrap(), StateVector::zero(1)];
    let opts = EngineOptions {
        local_method: LocalMethod::Trotter { steps: 1 },
        ..EngineOptions::new(0.8, vec![])
    };
    let engine = Engine::new(&sys, &init, &[], opts).unwrap();
    let out = engine.run_trajectory(&Trajectory::empty(0.8), SamplingMode::default()).unwrap();
    let mut expect = init[0].clone();
    for (c, p) in h.terms().iter().filter(|(_, p)| p.is_diagonal()).chain(h.terms().iter().filter(|(_, p)| !p.is_diagonal())) {
        expect = evolve_dense(&expect, &PauliSum::single(*c, *p), 0.8).unwrap();
    }
    assert!(out.branches.kets[0].distance(&expect).unwrap() < 1e-12);
}

#[test]
fn zz_pair_estimate_matches_analytic() {
    let lambda = 0.6;
    let sys = zz_pair(lambda);
    let init = vec![plus(), plus()];
    let grid = vec![0.0, 0.3, 0.6, 1.0];
    let obs = vec![x_first(), ObservableSum::identity("id", 2)];
    let res = estimate(&sys, &init, &obs, EngineOptions::new(1.0, grid.clone()), 40_000, 17, SamplingMode::default())
        .unwrap();
    assert_eq!(res.len(), 8);
    for (g, &t) in grid.iter().enumerate() {
        let x1 = &res[2 * g];
        let id = &res[2 * g + 1];
        assert_eq!(x1.observable, "X1");
        assert_eq!(x1.time, t);
        let exact = (2.0 * lambda * t).cos();
        assert!((x1.mean - exact).abs() <= 4.0 * x1.stderr + 1e-12, "t={t}: {} vs {exact}", x1.mean);
        assert!((id.mean - 1.0).abs() <= 4.0 * id.stderr + 1e-12);
        assert!(x1.imag_diagnostic <= 4.0 * x1.imag_stderr + 1e-12);
        assert_abs_diff_eq!(x1.overhead, (2.0 * lambda * t * 2.0).exp() / (2.0 * lambda * t).exp(), epsilon = 1e-12);
        assert_eq!(x1.n_samples, 40_000);
    }
}

#[test]
fn zero_interaction_is_exact() {
    let sys = random_system(&[2, 2], 0, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let init = vec![random_state(2, &mut rng), random_state(2, &mut rng)];
    let obs = mixed_observables(&[2, 2], 23);
    let grid = vec![0.5, 1.5];
    let res = estimate(&sys, &init, &obs, EngineOptions::new(1.5, grid.clone()), 16, 1, SamplingMode::default()).unwrap();
    for (g, &t) in grid.iter().enumerate() {
        for (o, ob) in obs.iter().enumerate() {
            let r = &res[g * obs.len() + o];
            let exact = dense_contribution(&sys, &init, ob, &Trajectory::empty(1.5), t, 1.0);
            assert_abs_diff_eq!(r.mean, exact.re, epsilon = 1e-8);
            assert_eq!(r.stderr, 0.0);
            assert_eq!(r.overhead, 1.0);
        }
    }
}

#[test]
fn dyson_order_zero_is_free_evolution() {
    let sys = random_system(&[2, 2], 2, 31);
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let init = vec![random_state(2, &mut rng), random_state(2, &mut rng)];
    let obs = mixed_observables(&[2, 2], 33);
    let grid = vec![0.4, 1.0];
    let res = estimate(&sys, &init, &obs, EngineOptions::new(1.0, grid.clone()), 8, 3, SamplingMode::Dyson { order: 0 })
        .unwrap();
    for (g, &t) in grid.iter().enumerate() {
        for (o, ob) in obs.iter().enumerate() {
            let r = &res[g * obs.len() + o];
            let free = dense_contribution(&sys, &init, ob, &Trajectory::empty(1.0), t, 1.0);
            assert_abs_diff_eq!(r.mean, free.re, epsilon = 1e-10);
            assert_eq!(r.overhead, 1.0);
        }
    }
}

#[test]
fn dyson_overheads_are_truncated_series() {
    let sys = zz_pair(0.5);
    let init = vec![plus(), plus()];
    let grid = vec![0.5, 1.0];
    let res = estimate(
        &sys,
        &init,
        &[x_first()],
        EngineOptions::new(1.0, grid),
        4,
        0,
        SamplingMode::Dyson { order: 2 },
    )
    .unwrap();
    assert_abs_diff_eq!(res[0].overhead, 1.0 + 0.5 + 0.125, epsilon = 1e-12);
    assert_abs_diff_eq!(res[1].overhead, 2.5, epsilon = 1e-12);
}

#[test]
fn high_order_dyson_matches_analytic() {
    // order 8 at αT = 1.2 truncates at ~1e-6
    let lambda = 0.6;
    let sys = zz_pair(lambda);
    let init = vec![plus(), plus()];
    let grid = vec![0.3, 1.0];
    let res = estimate(
        &sys,
        &init,
        &[x_first()],
        EngineOptions::new(1.0, grid.clone()),
        40_000,
        5,
        SamplingMode::Dyson { order: 8 },
    )
    .unwrap();
    for (r, t) in res.iter().zip(&grid) {
        let exact = (2.0 * lambda * t).cos();
        assert!((r.mean - exact).abs() <= 4.0 * r.stderr, "t={t}: {} vs {exact}", r.mean);
    }
}

#[test]
fn purity_of_zz_pair() {
    let lambda = 0.5;
    let t = std::f64::consts::PI / 8.0 / lambda;
    let sys = zz_pair(lambda);
    let init = vec![plus(), plus()];
    let r = estimate_purity(&sys, &init, 0, EngineOptions::new(t, vec![]), 40_000, 8).unwrap();
    assert!((r.mean - 0.75).abs() <= 4.0 * r.stderr, "{} ± {}", r.mean, r.stderr);
    assert_eq!(r.observable, "purity_0");

    // |+⟩ itself carries a norm rounding of one ulp
    let r = estimate_purity(&sys, &init, 1, EngineOptions::new(0.0, vec![]), 10, 8).unwrap();
    assert_abs_diff_eq!(r.mean, 1.0, epsilon = 1e-14);
    assert_eq!(r.stderr, 0.0);

    let free = random_system(&[2, 2], 0, 41);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let init = vec![random_state(2, &mut rng), random_state(2, &mut rng)];
    let r = estimate_purity(&free, &init, 0, EngineOptions::new(2.0, vec![]), 10, 8).unwrap();
    assert_abs_diff_eq!(r.mean, 1.0, epsilon = 1e-12);
    assert!(estimate_purity(&free, &init, 2, EngineOptions::new(2.0, vec![]), 10, 8).is_err());
}

#[test]
fn estimate_rejects_bad_inputs() {
    let sys = zz_pair(0.5);
    let init = vec![plus(), plus()];
    let obs = [x_first()];
    let opts = |grid: Vec<f64>| EngineOptions::new(1.0, grid);
    assert!(estimate(&sys, &init, &obs, opts(vec![0.5]), 1, 0, SamplingMode::default()).is_err());
    assert!(Engine::new(&sys, &init, &obs, opts(vec![0.5, 0.2])).is_err());
    assert!(Engine::new(&sys, &init, &obs, opts(vec![1.5])).is_err());
    assert!(Engine::new(&sys, &init[..1], &obs, opts(vec![])).is_err());
    let bad = StateVector::new(1, vec![C64::new(1.0, 0.0); 2]).unwrap();
    assert!(Engine::new(&sys, &[bad, plus()], &obs, opts(vec![])).is_err());
    let engine = Engine::new(&sys, &init, &obs, opts(vec![0.5])).unwrap();
    assert!(engine.run_trajectory(&Trajectory::empty(2.0), SamplingMode::default()).is_err());
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let sys = random_system(&[2, 2], 2, 51);
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let init = vec![random_state(2, &mut rng), random_state(2, &mut rng)];
    let obs = mixed_observables(&[2, 2], 53);
    let engine = Engine::new(&sys, &init, &obs, EngineOptions::new(1.0, vec![0.5, 1.0])).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| engine.estimate(5000, 77, SamplingMode::default()).unwrap())
    };
    assert_eq!(run(1), run(4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn term_probs_sum_to_one(lambdas in prop::collection::vec(-2.0f64..2.0, 1..8)) {
        let terms: Vec<_> = lambdas
            .iter()
            .filter(|l| l.abs() > 1e-6)
            .map(|&l| InteractionTerm::new(l, vec![z(1, 0), z(1, 0)]).unwrap())
            .collect();
        prop_assume!(!terms.is_empty());
        let d = ExplicitDecomposition::new(terms);
        prop_assert!((d.term_probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(d.rate(), 2.0 * d.lambda_total());
        prop_assert_eq!(d.overhead(0.0), 1.0);
    }

    #[test]
    fn sampled_trajectories_are_valid(seed in any::<u64>(), horizon in 0.0f64..3.0, cap in prop::option::of(0usize..4)) {
        let d = decompose(&zz_pair(0.9));
        let t = sample_trajectory(&d, horizon, &mut trajectory_rng(seed, 0), cap);
        prop_assert!(t.validate().is_ok());
        let ph = t.phase(&d);
        prop_assert!((ph.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reported_overhead_is_exponential(lambda in 0.01f64..1.0, horizon in 0.0f64..2.0) {
        let sys = zz_pair(lambda);
        let grid = vec![horizon / 2.0, horizon];
        prop_assume!(horizon > 0.0);
        let res = estimate(&sys, &[plus(), plus()], &[x_first()], EngineOptions::new(horizon, grid.clone()), 2, 0, SamplingMode::default()).unwrap();
        for (r, t) in res.iter().zip(&grid) {
            prop_assert!((r.overhead - (2.0 * lambda * t).exp()).abs() <= 1e-12 * r.overhead);
        }
    }
}
