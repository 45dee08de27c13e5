use imc_core::diagnostics::{misspec_residual, relative_error};
use imc_core::matrix::{self, FactorPair, ObservationSet, SideInfo};
use imc_core::solvers::{
    imc_gradient, imc_loss, interp_gradient, interp_loss, mc_gradient, mc_loss, project_c, solve_imc,
    solve_interp, solve_mc, spectral_init_imc, ProjectionMode, SolverConfig, StepRule,
};
use imc_core::synthetic::{add_noise, gen_ground_truth, sample_omega, Rng};
use imc_core::{Error, GroundTruth};

fn instance(seed: u64, n: usize, a: usize, r: usize, p: f64, sigma: f64) -> (GroundTruth, SideInfo, ObservationSet) {
    let mut rng = Rng::new(seed, 0);
    let (truth, si) = gen_ground_truth(n, n, a, a, r, &mut rng).unwrap();
    let omega = sample_omega(n, n, p, &mut rng).unwrap();
    let obs = add_noise(&truth.l_star, &omega, p, sigma, &mut rng).unwrap();
    (truth, si, obs)
}

fn random_pair(rows_a: usize, rows_b: usize, r: usize, rng: &mut Rng) -> FactorPair {
    FactorPair::new(rng.gaussian_matrix(rows_a, r), rng.gaussian_matrix(rows_b, r)).unwrap()
}

/// Central differences of `f` at `x`, entry by entry.
fn numeric_gradient(x: &FactorPair, f: &dyn Fn(&FactorPair) -> f64) -> FactorPair {
    let h = 1e-6;
    let mut g = FactorPair::zeros(x.a.nrows(), x.b.nrows(), x.a.ncols());
    for idx in 0..x.a.len() {
        let (mut up, mut dn) = (x.clone(), x.clone());
        up.a[idx] += h;
        dn.a[idx] -= h;
        g.a[idx] = (f(&up) - f(&dn)) / (2.0 * h);
    }
    for idx in 0..x.b.len() {
        let (mut up, mut dn) = (x.clone(), x.clone());
        up.b[idx] += h;
        dn.b[idx] -= h;
        g.b[idx] = (f(&up) - f(&dn)) / (2.0 * h);
    }
    g
}

/// Largest entrywise gap relative to the largest analytic entry.
fn gradient_gap(analytic: &FactorPair, numeric: &FactorPair) -> f64 {
    let scale = analytic.a.amax().max(analytic.b.amax()).max(1e-12);
    let gap = (&analytic.a - &numeric.a)
        .amax()
        .max((&analytic.b - &numeric.b).amax());
    gap / scale
}

#[test]
fn imc_gradient_matches_finite_differences() {
    for seed in 0..5 {
        let (_, si, obs) = instance(100 + seed, 12, 6, 2, 0.6, 0.1);
        let mut rng = Rng::new(seed, 9);
        let x = random_pair(6, 6, 2, &mut rng);
        let g = imc_gradient(&x, &obs, &si).unwrap();
        let fd = numeric_gradient(&x, &|f| imc_loss(f, &obs, &si).unwrap());
        assert!(gradient_gap(&g, &fd) < 1e-5, "seed {seed}: {}", gradient_gap(&g, &fd));
    }
}

#[test]
fn mc_gradient_matches_finite_differences() {
    for seed in 0..5 {
        let (_, _, obs) = instance(200 + seed, 12, 6, 2, 0.6, 0.1);
        let mut rng = Rng::new(seed, 9);
        let x = random_pair(12, 12, 2, &mut rng);
        let g = mc_gradient(&x, &obs).unwrap();
        let fd = numeric_gradient(&x, &|f| mc_loss(f, &obs).unwrap());
        assert!(gradient_gap(&g, &fd) < 1e-5);
    }
}

#[test]
fn interp_gradient_matches_finite_differences() {
    for seed in 0..5 {
        let (_, si, obs) = instance(300 + seed, 12, 6, 2, 0.6, 0.1);
        let mut rng = Rng::new(seed, 9);
        let x = random_pair(12, 12, 2, &mut rng);
        let g = interp_gradient(&x, &obs, &si, 0.7).unwrap();
        let fd = numeric_gradient(&x, &|f| interp_loss(f, &obs, &si, 0.7).unwrap());
        assert!(gradient_gap(&g, &fd) < 1e-5);
    }
}

#[test]
fn penalty_matches_dense_materialization() {
    let (_, si, obs) = instance(7, 12, 6, 2, 0.5, 0.0);
    let mut rng = Rng::new(7, 1);
    let x = random_pair(12, 12, 2, &mut rng);
    let l = &x.a * x.b.transpose();
    let outside = &l - si.x() * si.x().transpose() * &l * si.y() * si.y().transpose();
    let dense = mc_loss(&x, &obs).unwrap() + 0.7 * outside.norm_squared();
    let fast = interp_loss(&x, &obs, &si, 0.7).unwrap();
    assert!((dense - fast).abs() < 1e-10 * dense);
}

#[test]
fn loss_vanishes_at_balanced_truth() {
    let (truth, si, obs) = instance(1, 30, 8, 3, 0.4, 0.0);
    let loss = imc_loss(&truth.core_factors, &obs, &si).unwrap();
    assert!(loss < 1e-20, "{loss}");
    let g = imc_gradient(&truth.core_factors, &obs, &si).unwrap();
    assert!(g.a.amax().max(g.b.amax()) < 1e-12);
}

#[test]
fn unbalanced_truth_pays_only_the_balancing_term() {
    let (truth, si, obs) = instance(2, 30, 8, 3, 0.4, 0.0);
    let skewed = truth.core_factors.scale_by(2.0, 0.5);
    let sigma_sq: f64 = (0..truth.rank)
        .map(|k| truth.core_factors.a.column(k).norm_squared().powi(2))
        .sum();
    let expected = (15.0f64 / 4.0).powi(2) / 16.0 * sigma_sq;
    let loss = imc_loss(&skewed, &obs, &si).unwrap();
    assert!((loss - expected).abs() < 1e-10 * expected, "{loss} vs {expected}");
}

#[test]
fn empty_sample_leaves_only_balancing() {
    let si = SideInfo::identity(5, 4);
    let obs = ObservationSet::new(5, 4, 0.3, vec![]).unwrap();
    let mut rng = Rng::new(3, 0);
    let x = random_pair(5, 4, 2, &mut rng);
    let d = x.a.tr_mul(&x.a) - x.b.tr_mul(&x.b);
    let loss = imc_loss(&x, &obs, &si).unwrap();
    assert!((loss - d.norm_squared() / 16.0).abs() < 1e-12);
}

#[test]
fn losses_are_rotation_invariant() {
    let (_, si, obs) = instance(4, 12, 6, 3, 0.5, 0.05);
    let mut rng = Rng::new(4, 1);
    let x = random_pair(6, 6, 3, &mut rng);
    let rot = matrix::orthonormalize(&rng.gaussian_matrix(3, 3)).unwrap();
    let y = x.rotate(&rot);
    let (l0, l1) = (imc_loss(&x, &obs, &si).unwrap(), imc_loss(&y, &obs, &si).unwrap());
    assert!((l0 - l1).abs() < 1e-12 * l0.max(1.0));
}

#[test]
fn dimension_errors_name_the_mismatch() {
    let (_, si, obs) = instance(5, 12, 6, 2, 0.5, 0.0);
    let bad = FactorPair::zeros(5, 6, 2);
    let err = imc_loss(&bad, &obs, &si).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch(_)));
    assert!(err.to_string().contains("A has 5 rows"));
    assert!(interp_loss(&FactorPair::zeros(12, 12, 2), &obs, &si, -1.0).is_err());
}

#[test]
fn spectral_init_is_exact_with_every_entry() {
    let (truth, si, obs) = instance(6, 25, 6, 3, 1.0, 0.0);
    let init = spectral_init_imc(&obs, &si, 3).unwrap();
    let z0 = init.factors.product();
    assert!((&z0 - &truth.z).norm() < 1e-10);
    assert!(init.warnings.is_empty());
}

#[test]
fn spectral_init_is_the_best_rank_r_core() {
    let (_, si, obs) = instance(8, 25, 6, 2, 0.5, 0.3);
    let init = spectral_init_imc(&obs, &si, 2).unwrap();
    let w = si.x().tr_mul(&(obs.to_dense() * si.y())) / obs.p();
    let mut sv: Vec<f64> = w.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let tail: f64 = sv[2..].iter().map(|s| s * s).sum();
    let resid = (&w - init.factors.product()).norm_squared();
    assert!((resid - tail).abs() < 1e-10 * w.norm_squared());
    assert!((init.spectral_norm - sv[0]).abs() < 1e-12 * sv[0]);
}

#[test]
fn projection_leaves_feasible_points() {
    let (truth, si, _) = instance(9, 30, 8, 3, 0.5, 0.0);
    let (out, moved) = project_c(&truth.core_factors, &si, 1e6);
    assert!(!moved);
    assert_eq!(out, truth.core_factors);
}

#[test]
fn projection_with_identity_basis_clips_rows() {
    let si = SideInfo::identity(3, 2);
    let a = matrix::from_rows(3, 2, &[3.0, 4.0, 0.3, 0.4, 0.0, 0.0]).unwrap();
    let b = matrix::from_rows(2, 2, &[0.6, 0.8, 6.0, 8.0]).unwrap();
    let (out, moved) = project_c(&FactorPair::new(a, b).unwrap(), &si, 1.0);
    assert!(moved);
    let want_a = matrix::from_rows(3, 2, &[0.6, 0.8, 0.3, 0.4, 0.0, 0.0]).unwrap();
    let want_b = matrix::from_rows(2, 2, &[0.6, 0.8, 0.6, 0.8]).unwrap();
    assert!((out.a - want_a).amax() < 1e-15);
    assert!((out.b - want_b).amax() < 1e-15);
}

#[test]
fn projection_is_idempotent_and_feasible() {
    let (_, si, _) = instance(10, 40, 6, 2, 0.5, 0.0);
    let mut rng = Rng::new(10, 3);
    let x = random_pair(6, 6, 2, &mut rng).scale_by(5.0, 5.0);
    let radius = 0.5;
    let (once, moved) = project_c(&x, &si, radius);
    assert!(moved);
    assert!(matrix::two_inf_norm(&(si.x() * &once.a)) <= radius * (1.0 + 1e-9));
    assert!(matrix::two_inf_norm(&(si.y() * &once.b)) <= radius * (1.0 + 1e-9));
    let (twice, moved_again) = project_c(&once, &si, radius);
    assert!(!moved_again);
    assert_eq!(once, twice);
}

#[test]
fn full_sample_recovers_exactly() {
    let (truth, si, obs) = instance(11, 40, 10, 3, 1.0, 0.0);
    let trace = solve_imc(&obs, &si, &SolverConfig::with_rank(3), Some(&truth)).unwrap();
    assert!(relative_error(&trace.estimate, &truth.l_star).unwrap() < 1e-8);
}

#[test]
fn partial_sample_recovers_with_monotone_descent() {
    let (truth, si, obs) = instance(12, 60, 8, 2, 0.3, 0.0);
    let cfg = SolverConfig {
        track_error: true,
        ..SolverConfig::with_rank(2)
    };
    let trace = solve_imc(&obs, &si, &cfg, Some(&truth)).unwrap();
    assert!(relative_error(&trace.estimate, &truth.l_star).unwrap() < 1e-6);
    let losses = trace.losses();
    assert!(losses.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    let last = trace.records.last().unwrap().rel_error.unwrap();
    assert!((last - relative_error(&trace.estimate, &truth.l_star).unwrap()).abs() < 1e-9);
}

#[test]
fn descent_keeps_factors_balanced() {
    let (truth, si, obs) = instance(13, 40, 8, 3, 1.0, 0.0);
    let trace = solve_imc(&obs, &si, &SolverConfig::with_rank(3), Some(&truth)).unwrap();
    assert!(trace.factors.imbalance() < 1e-6 * truth.sigma_max);
}

#[test]
fn zero_lambda_is_the_baseline() {
    let (truth, si, obs) = instance(14, 30, 6, 2, 0.5, 0.01);
    let cfg = SolverConfig {
        max_iters: 100,
        ..SolverConfig::with_rank(2)
    };
    let mc = solve_mc(&obs, &cfg, Some(&truth)).unwrap();
    let interp = solve_interp(&obs, &si, 0.0, &cfg, Some(&truth)).unwrap();
    assert_eq!(mc.losses(), interp.losses());
    assert_eq!(mc.estimate, interp.estimate);
}

#[test]
fn large_lambda_stays_inside_the_side_information() {
    let (truth, si, obs) = instance(15, 30, 6, 2, 0.6, 0.0);
    let cfg = SolverConfig {
        max_iters: 3000,
        ..SolverConfig::with_rank(2)
    };
    let trace = solve_interp(&obs, &si, 100.0, &cfg, Some(&truth)).unwrap();
    let resid = misspec_residual(&trace.estimate, &si).unwrap();
    assert!(resid < 1e-2 * trace.estimate.norm(), "{resid}");
}

#[test]
fn oversized_step_reports_divergence() {
    let (truth, si, obs) = instance(16, 30, 6, 2, 0.5, 0.0);
    let cfg = SolverConfig {
        step: StepRule::Fixed(50.0),
        backtrack: false,
        ..SolverConfig::with_rank(2)
    };
    match solve_imc(&obs, &si, &cfg, Some(&truth)) {
        Err(Error::Diverged { step_size, .. }) => assert_eq!(step_size, 50.0),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn backtracking_tames_an_oversized_step() {
    let (truth, si, obs) = instance(16, 30, 6, 2, 0.5, 0.0);
    let cfg = SolverConfig {
        step: StepRule::Fixed(50.0),
        ..SolverConfig::with_rank(2)
    };
    let tr = solve_imc(&obs, &si, &cfg, Some(&truth)).unwrap();
    assert!(tr.step_halvings > 0);
    assert_eq!(tr.step_size, 50.0 / 2f64.powi(tr.step_halvings as i32));
    assert!(tr.losses().windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
}

#[test]
fn enforce_matches_monitor_when_constraint_is_slack() {
    let (truth, si, obs) = instance(17, 60, 8, 2, 0.3, 0.0);
    let mut cfg = SolverConfig {
        max_iters: 200,
        ..SolverConfig::with_rank(2)
    };
    let monitored = solve_imc(&obs, &si, &cfg, Some(&truth)).unwrap();
    assert!(!monitored.projection_ever_active());
    cfg.projection = ProjectionMode::Enforce;
    let enforced = solve_imc(&obs, &si, &cfg, Some(&truth)).unwrap();
    assert_eq!(monitored.losses(), enforced.losses());
    cfg.projection = ProjectionMode::Off;
    assert!(solve_imc(&obs, &si, &cfg, Some(&truth)).unwrap().radius.is_none());
}

#[test]
fn conservative_step_still_descends() {
    let (truth, si, obs) = instance(18, 30, 6, 2, 0.5, 0.0);
    let cfg = SolverConfig {
        step: StepRule::Conservative,
        max_iters: 20,
        ..SolverConfig::with_rank(2)
    };
    let trace = solve_imc(&obs, &si, &cfg, Some(&truth)).unwrap();
    assert!(trace.step_size < 1e-6);
    let l = trace.losses();
    assert!(l.last().unwrap() <= &l[0]);
}

#[test]
fn trace_serializes_one_row_per_iterate() {
    let (truth, si, obs) = instance(19, 20, 5, 2, 0.8, 0.0);
    let cfg = SolverConfig {
        max_iters: 5,
        rel_tol: 0.0,
        track_error: true,
        ..SolverConfig::with_rank(2)
    };
    let trace = solve_imc(&obs, &si, &cfg, Some(&truth)).unwrap();
    let csv = trace.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], imc_core::solvers::TRACE_HEADER);
    assert_eq!(lines.len(), 1 + 6);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    trace.write_csv(&path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), csv);
}

#[test]
fn solvers_reject_mismatched_truth() {
    let (_, si, obs) = instance(20, 20, 5, 2, 0.8, 0.0);
    let (other, _, _) = instance(21, 22, 5, 2, 0.8, 0.0);
    let cfg = SolverConfig::with_rank(2);
    assert!(solve_imc(&obs, &si, &cfg, Some(&other)).is_err());
    assert!(solve_mc(&obs, &cfg, Some(&other)).is_err());
}
