use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vibrokit::averaging::{
    averaged_j, eigenvalue_invariance_check, order_study, synthetic_benchmark, transition_matrix, TransitionMethod,
    DEFAULT_QUADRATURE,
};
use vibrokit::bundled::bundled_config;
use vibrokit::certify::{
    build_s, certify, estimate_eps_star, is_hurwitz, is_m_matrix, lyapunov_residual, solve_lyapunov, CertifyOptions,
    EpsSearch,
};
use vibrokit::config::ExperimentConfig;
use vibrokit::design::{amplitude_scan, hurwitz_frontier};
use vibrokit::linalg::max_abs;
use vibrokit::network::{build_reduction, build_reduction_seeded, ClusterPartition, OscillatorNetwork};
use vibrokit::reduction::{compute_r, reduce_state, CompactDynamics, TOL_IDENTITY};
use vibrokit::simulate::{default_initial, simulate_full, simulate_reduced, verdict, StepConfig};
use vibrokit::synthetic::{complete_uniform_network, random_clustered_network, random_schedule, RandomNetworkSpec};
use vibrokit::vibration::VibrationSchedule;
use vibrokit::Error;

fn pair(a: f64, omega: f64) -> (OscillatorNetwork, ClusterPartition) {
    let net = OscillatorNetwork::from_edges(2, &[(0, 1, a)], &[omega, omega]).unwrap();
    (net, ClusterPartition::new(vec![vec![0, 1]], 2).unwrap())
}

/// `tan(d/2) = tan(d0/2) exp(-2 a t - c (1 - cos(t/eps)))` with `c = u01 + u10`.
fn pair_gap(d0: f64, a: f64, c: f64, eps: f64, t: f64) -> f64 {
    2.0 * ((d0 / 2.0).tan() * (-2.0 * a * t - c * (1.0 - (t / eps).cos())).exp()).atan()
}

#[test]
fn two_oscillators_match_closed_form() {
    let (net, part) = pair(1.0, 0.7);
    let d0 = 1.2;
    let zero = VibrationSchedule::new(0.1).unwrap();
    let traj = simulate_full(&net, &part, &zero, &[0.0, d0], &StepConfig::new(3.0, 1e-3)).unwrap();
    for (t, th) in traj.rows() {
        assert!((th[1] - th[0] - pair_gap(d0, 1.0, 0.0, 0.1, t)).abs() < 1e-8, "t = {t}");
    }

    let mut s = VibrationSchedule::new(0.05).unwrap();
    s.set(0, 1, 0.4).set(1, 0, 0.3);
    let traj = simulate_full(&net, &part, &s, &[0.0, d0], &StepConfig::new(3.0, 2.5e-4)).unwrap();
    for (t, th) in traj.rows() {
        assert!((th[1] - th[0] - pair_gap(d0, 1.0, 0.7, 0.05, t)).abs() < 1e-8, "t = {t}");
    }
}

#[test]
fn rk4_has_fourth_order() {
    let (net, part) = pair(1.0, 0.0);
    let d0 = 2.0;
    let zero = VibrationSchedule::new(0.1).unwrap();
    let err = |dt: f64| {
        let traj = simulate_full(&net, &part, &zero, &[0.0, d0], &StepConfig::new(4.0, dt)).unwrap();
        let th = traj.last();
        (th[1] - th[0] - pair_gap(d0, 1.0, 0.0, 0.1, 4.0)).abs()
    };
    let order = (err(0.1) / err(0.05)).log2();
    assert!(order >= 3.5, "observed order {order}");
}

#[test]
fn dither_has_zero_mean() {
    let mut s = VibrationSchedule::new(0.03).unwrap();
    s.set(0, 1, 2.5);
    let n = 1000;
    let mean: f64 = (0..n).map(|i| s.input(0, 1, i as f64 * s.period() / n as f64)).sum::<f64>() / n as f64;
    assert!(mean.abs() < 1e-12);
    assert_eq!(s.input(1, 0, 0.3), 0.0);
}

#[test]
fn intra_manifold_is_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let (net, part) = random_clustered_network(&mut rng, &RandomNetworkSpec { max_nodes: 12, ..Default::default() }).unwrap();
        let sched = random_schedule(&mut rng, &net, &part, 0.1, 2.0, 0.6).unwrap();
        let red = build_reduction(&net, &part).unwrap();
        let dynamics = CompactDynamics::new(&net, &red, compute_r(&red).unwrap());
        let (u1, u2) = sched.dither_vectors(&red).unwrap();
        let x0 = DVector::zeros(red.intra_dim());
        for _ in 0..20 {
            let y = DVector::from_fn(red.inter_dim(), |_, _| rng.gen_range(-PI..PI));
            let mut sample = DVector::zeros(u1.len() + u2.len());
            sample.rows_mut(0, u1.len()).copy_from(&u1);
            sample.rows_mut(u1.len(), u2.len()).copy_from(&u2);
            sample *= rng.gen_range(-1.0..1.0) / sched.epsilon();
            let field = dynamics.f_intra(&x0).unwrap() + dynamics.f_inter(&x0, &y).unwrap() + dynamics.f_ctr(&sample, &x0).unwrap();
            assert!(field.amax() < 1e-12, "{}", field.amax());
        }

        let zero = VibrationSchedule::new(0.1).unwrap();
        let none = DVector::zeros(u1.len());
        let y0: Vec<f64> = (0..red.inter_dim()).map(|_| rng.gen_range(-PI..PI)).collect();
        let traj = simulate_reduced(&dynamics, &zero, (&none, &none), x0.as_slice(), &y0, &StepConfig::new(5.0, 0.01)).unwrap();
        for (_, z) in traj.rows() {
            assert!(z[..red.intra_dim()].iter().all(|v| v.abs() < 1e-10));
        }
    }
}

#[test]
fn synchronized_phases_reduce_to_zero() {
    let cfg = bundled_config();
    let exp = cfg.build().unwrap();
    let red = build_reduction(&exp.network, &exp.partition).unwrap();
    let theta = default_initial(&exp.partition, 4, 0.0);
    let z = reduce_state(&red, &theta).unwrap();
    assert!(z.x.iter().all(|v| *v == 0.0));
}

#[test]
fn eps_star_is_grid_top_for_stable_network() {
    let (net, part) = complete_uniform_network(&[3, 3], 1.0, 0.05, &[0.0, 1.0]).unwrap();
    let zero = VibrationSchedule::new(0.02).unwrap();
    let search = EpsSearch { horizon: 20.0, ..EpsSearch::default() };
    let est = estimate_eps_star(&net, &part, &zero, &[0.01, 0.04, 0.16], &search).unwrap();
    assert_eq!(est.eps_star, 0.16);
    assert_eq!(est.next_unstable, None);
}

#[test]
fn eps_star_reports_unstable_network() {
    let cfg = bundled_config();
    let exp = cfg.build().unwrap();
    let zero = VibrationSchedule::new(0.02).unwrap();
    let search = EpsSearch { horizon: 150.0, record_every: 50, ..EpsSearch::default() };
    let err = estimate_eps_star(&exp.network, &exp.partition, &zero, &[0.01, 0.02], &search).unwrap_err();
    assert!(matches!(err, Error::NoStableEpsilon));
}

#[test]
fn weakly_coupled_network_is_certified_and_converges() {
    let (net, part) = complete_uniform_network(&[3, 4, 3], 1.0, 0.01, &[0.0, 2.0, -1.0]).unwrap();
    let zero = VibrationSchedule::new(0.02).unwrap();
    let cert = certify(&net, &part, &zero, &CertifyOptions::default()).unwrap();
    assert!(cert.hurwitz_j_bar);
    assert!(cert.theorem1_satisfied, "{:?}", cert.m_matrix);
    let theta0 = default_initial(&part, 1, 0.3);
    let traj = simulate_full(&net, &part, &zero, &theta0, &StepConfig::new(30.0, 1e-2)).unwrap();
    assert!(verdict(&traj, &part, 1e-2).unwrap().converged);
}

#[test]
fn bundled_certificate_improves_targeted_cluster() {
    let cfg = bundled_config();
    let exp = cfg.build().unwrap();
    let cert = certify(&exp.network, &exp.partition, &exp.schedule, &cfg.certify_options()).unwrap();
    let before = cert.robustness_uncontrolled();
    let after = cert.robustness_controlled();
    assert!(after[0].unwrap() > before[0].unwrap());
    assert_eq!(after[1], before[1]);
    assert_eq!(after[2], before[2]);
    assert!(cert.hurwitz_j_bar);
}

#[test]
fn complete_uniform_cluster_cannot_be_improved() {
    let (net, part) = complete_uniform_network(&[4, 3], 0.5, 0.1, &[0.0, 1.0]).unwrap();
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.3).collect();
    let d = amplitude_scan(&net, &part, &[0], &grid, FRAC_PI_2, 0.02, 512).unwrap();
    assert!(!d.improved);
    assert_eq!(d.selected_u, 0.0);
}

#[test]
fn design_scan_is_deterministic() {
    let cfg = bundled_config();
    let exp = cfg.build().unwrap();
    let run = || {
        let d = amplitude_scan(&exp.network, &exp.partition, &[0], &cfg.analysis.u_grid, FRAC_PI_2, 0.02, 1024).unwrap();
        serde_json::to_string(&d).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn lyapunov_large_dimensions() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for n in [10, 30, 50] {
        let a = DMatrix::from_fn(n, n, |i, j| rng.gen_range(-1.0..1.0) / (n as f64).sqrt() - if i == j { 2.0 } else { 0.0 });
        assert!(is_hurwitz(&a));
        let x = solve_lyapunov(&a).unwrap();
        assert!(lyapunov_residual(&a, &x) <= 1e-10, "n = {n}");
        assert!(max_abs(&(&x - x.transpose())) == 0.0);
    }
}

/// Entrywise assembly over the upper triangle of a symmetric `X`.
fn lyapunov_brute_force(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let idx = |i: usize, j: usize| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * n - i * (i + 1) / 2 + j
    };
    let m = n * (n + 1) / 2;
    let mut k = DMatrix::zeros(m, m);
    let mut rhs = DVector::zeros(m);
    for p in 0..n {
        for q in p..n {
            let row = idx(p, q);
            for r in 0..n {
                k[(row, idx(r, q))] += a[(r, p)];
                k[(row, idx(p, r))] += a[(r, q)];
            }
            rhs[row] = if p == q { -1.0 } else { 0.0 };
        }
    }
    let v = k.lu().solve(&rhs).unwrap();
    DMatrix::from_fn(n, n, |i, j| v[idx(i, j)])
}

fn lower_generator(d: usize, entries: &[f64]) -> DMatrix<f64> {
    let mut it = entries.iter().cycle();
    DMatrix::from_fn(d, d, |i, j| if i > j { *it.next().unwrap() } else { 0.0 })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lyapunov_matches_brute_force(n in 1usize..=6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
        let shift = a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        a -= DMatrix::identity(n, n) * (shift + rng.gen_range(0.1..1.0));
        let x = solve_lyapunov(&a).unwrap();
        let oracle = lyapunov_brute_force(&a);
        let scale = max_abs(&oracle).max(1.0);
        prop_assert!(max_abs(&(&x - &oracle)) <= 1e-9 * scale);
        prop_assert!(lyapunov_residual(&a, &x) <= 1e-10 * scale);
    }

    #[test]
    fn rotation_commutes_with_flow(seed in 0u64..1000, c in -10.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (net, part) = random_clustered_network(&mut rng, &RandomNetworkSpec { max_nodes: 10, ..Default::default() }).unwrap();
        let sched = random_schedule(&mut rng, &net, &part, 0.1, 1.0, 0.5).unwrap();
        let theta0: Vec<f64> = (0..net.len()).map(|_| rng.gen_range(-PI..PI)).collect();
        let shifted: Vec<f64> = theta0.iter().map(|t| t + c).collect();
        let cfg = StepConfig::new(2.0, 0.005);
        let a = simulate_full(&net, &part, &sched, &theta0, &cfg).unwrap();
        let b = simulate_full(&net, &part, &sched, &shifted, &cfg).unwrap();
        for (x, y) in a.last().iter().zip(b.last()) {
            prop_assert!((x + c - y).abs() < 1e-9);
        }
    }

    #[test]
    fn averaging_preserves_trace_and_spectrum(d in 2usize..=5, entries in prop::collection::vec(-2.0f64..2.0, 10), jv in prop::collection::vec(-3.0f64..3.0, 25), s0 in 0.0f64..6.3) {
        let p = lower_generator(d, &entries);
        let j = DMatrix::from_fn(d, d, |r, c| jv[r * 5 + c]);
        let phi = transition_matrix(std::slice::from_ref(&p), s0, TransitionMethod::ClosedForm).unwrap();
        let jbar = averaged_j(std::slice::from_ref(&j), &phi, DEFAULT_QUADRATURE).unwrap().remove(0);
        prop_assert!((jbar.trace() - j.trace()).abs() <= 1e-9 * max_abs(&jbar).max(1.0));
        let report = eigenvalue_invariance_check(&[j], &[p], &[s0, s0 + 1.0, s0 + 2.5], DEFAULT_QUADRATURE).unwrap();
        prop_assert!(report.passes, "deviation {}", report.max_deviation);
    }

    #[test]
    fn quadrature_doubling_is_converged(d in 2usize..=4, entries in prop::collection::vec(-1.5f64..1.5, 6), jv in prop::collection::vec(-3.0f64..3.0, 16)) {
        let p = lower_generator(d, &entries);
        let j = DMatrix::from_fn(d, d, |r, c| jv[r * 4 + c]);
        let phi = transition_matrix(&[p], FRAC_PI_2, TransitionMethod::ClosedForm).unwrap();
        let a = averaged_j(std::slice::from_ref(&j), &phi, DEFAULT_QUADRATURE).unwrap().remove(0);
        let b = averaged_j(std::slice::from_ref(&j), &phi, 2 * DEFAULT_QUADRATURE).unwrap().remove(0);
        prop_assert!(max_abs(&(a - b)) <= 1e-9);
    }

    #[test]
    fn numerical_transition_matches_closed_form(d in 2usize..=4, entries in prop::collection::vec(-1.0f64..1.0, 6), s0 in 0.0f64..6.3, s in -7.0f64..7.0) {
        let p = lower_generator(d, &entries);
        let closed = transition_matrix(std::slice::from_ref(&p), s0, TransitionMethod::ClosedForm).unwrap();
        let numerical = transition_matrix(&[p], s0, TransitionMethod::Numerical).unwrap();
        prop_assert!(max_abs(&(closed.eval(0, s) - numerical.eval(0, s))) <= 1e-8);
    }

    #[test]
    fn larger_gamma_never_creates_m_matrix(n in 1usize..=5, seed in any::<u64>(), grow in 1.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rob: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
        let gamma = DMatrix::from_fn(n, n, |_, _| rng.gen_range(0.0..0.8));
        let small = is_m_matrix(&build_s(&rob, &gamma).unwrap()).is_m_matrix;
        let large = is_m_matrix(&build_s(&rob, &(&gamma * grow)).unwrap()).is_m_matrix;
        prop_assert!(!large || small);
    }

    #[test]
    fn frontier_determinant_law(u in -4.0f64..4.0) {
        let j = DMatrix::from_row_slice(2, 2, &[-1.0, 4.0, 0.0, -2.0]);
        let pattern = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let f = hurwitz_frontier(&j, &pattern, &[u], FRAC_PI_2, DEFAULT_QUADRATURE).unwrap().remove(0);
        prop_assert!((f.determinant - (2.0 + 8.0 * u * u)).abs() <= 1e-9 * (1.0 + u * u));
        prop_assert!((f.trace + 3.0).abs() <= 1e-9);
        prop_assert!(f.hurwitz);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn reduction_identity_for_any_tree(seed in any::<u64>(), tree_seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (net, part) = random_clustered_network(&mut rng, &RandomNetworkSpec::default()).unwrap();
        let red = build_reduction_seeded(&net, &part, tree_seed).unwrap();
        let r = compute_r(&red).unwrap();
        prop_assert!(r.residual(&red) <= TOL_IDENTITY);
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), eps in 1e-3f64..1.0, horizon in 1.0f64..500.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (net, part) = random_clustered_network(&mut rng, &RandomNetworkSpec { max_nodes: 12, ..Default::default() }).unwrap();
        let sched = random_schedule(&mut rng, &net, &part, eps, 2.0, 0.5).unwrap();
        let mut cfg = bundled_config();
        cfg.name = format!("random-{seed}");
        cfg.network.nodes = net.len();
        cfg.network.edges = net.edges().iter().map(|e| (e.tail, e.head, e.weight)).collect();
        cfg.network.frequencies = net.frequencies().as_slice().to_vec();
        cfg.partition = part.clusters().to_vec();
        cfg.schedule = Some(sched);
        cfg.simulation.horizon = horizon;
        let back = ExperimentConfig::parse(&cfg.to_json()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.digest(), cfg.digest());
        prop_assert!(back.build().is_ok());
    }
}

#[test]
fn synthetic_order_study_is_first_order() {
    let (j, p, x0) = synthetic_benchmark();
    let study = order_study(&j, &p, &x0, 0.04, 2, 5.0, FRAC_PI_2).unwrap();
    assert_eq!(study.rows.len(), 3);
    assert!((study.observed_order - 1.0).abs() < 0.2, "{}", study.observed_order);
}
