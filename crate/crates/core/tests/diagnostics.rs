use imc_core::diagnostics::{
    effective_noise, effective_noise_scale, incoherence, misspec_residual, relative_error, side_info_incoherence,
    InstanceReport,
};
use imc_core::matrix::{self, Entry, Matrix, ObservationSet, SideInfo};
use imc_core::synthetic::{gaussian_noise, gen_ground_truth, gen_inexact_side_info, principal_angles, sample_omega, Rng};

#[test]
fn truth_incoherence_is_in_range_and_sign_free() {
    let mut rng = Rng::new(1, 0);
    let (truth, _) = gen_ground_truth(200, 150, 20, 15, 5, &mut rng).unwrap();
    let mu = incoherence(&truth.l_star, 5).unwrap();
    assert!((1.0 - 1e-9..=150.0 / 5.0).contains(&mu));
    assert!((mu - truth.mu0).abs() < 1e-9);
    assert!((incoherence(&(-&truth.l_star), 5).unwrap() - mu).abs() < 1e-9);
    assert!((incoherence(&truth.l_star.transpose(), 5).unwrap() - mu).abs() < 1e-9);
}

#[test]
fn incoherence_is_basis_free_under_repeated_singular_values() {
    // two equal singular values: any rotation of the singular basis is valid
    let mut rng = Rng::new(2, 0);
    let u = matrix::orthonormalize(&rng.gaussian_matrix(30, 2)).unwrap();
    let v = matrix::orthonormalize(&rng.gaussian_matrix(25, 2)).unwrap();
    let m = &u * v.transpose();
    let direct = {
        let lev = |b: &Matrix| matrix::row_norms_sq(b).into_iter().fold(0.0, f64::max);
        (30.0 / 2.0 * lev(&u)).max(25.0 / 2.0 * lev(&v))
    };
    assert!((incoherence(&m, 2).unwrap() - direct).abs() < 1e-9);
}

#[test]
fn side_info_incoherence_respects_its_bounds() {
    for seed in 0..100 {
        let mut rng = Rng::new(3, seed);
        let x = matrix::orthonormalize(&rng.gaussian_matrix(40, 5)).unwrap();
        let y = matrix::orthonormalize(&rng.gaussian_matrix(30, 6)).unwrap();
        let (mu1, mu2) = side_info_incoherence(&SideInfo::new(x, y).unwrap());
        assert!(mu1 >= 1.0 - 1e-9 && mu1 <= 8.0 + 1e-9);
        assert!(mu2 >= 1.0 - 1e-9 && mu2 <= 5.0 + 1e-9);
    }
}

#[test]
fn effective_noise_matches_dense_product_on_full_sample() {
    let mut rng = Rng::new(4, 0);
    let (_, si) = gen_ground_truth(40, 30, 6, 5, 2, &mut rng).unwrap();
    let e = rng.gaussian_matrix(40, 30);
    let obs = ObservationSet::full(&e).unwrap();
    let dense = matrix::spectral_norm(&(si.x().tr_mul(&e) * si.y())).unwrap();
    assert!((effective_noise(&obs, &si).unwrap() - dense).abs() < 1e-12 * dense);
}

#[test]
fn effective_noise_is_far_below_ambient_noise() {
    let n = 200;
    let mut rng = Rng::new(5, 0);
    let (_, si) = gen_ground_truth(n, n, 20, 20, 5, &mut rng).unwrap();
    let omega = sample_omega(n, n, 1.0, &mut rng).unwrap();
    let noise = gaussian_noise(n, n, &omega, 1.0, 1.0, &mut rng).unwrap();
    let gamma = effective_noise(&noise, &si).unwrap();
    let ambient = matrix::spectral_norm(&noise.to_dense()).unwrap();
    assert!(gamma.is_finite() && gamma < 0.5 * ambient, "{gamma} vs {ambient}");
}

#[test]
fn effective_noise_scales_linearly_with_sigma() {
    let (n, p, trials) = (150, 0.1, 100);
    let mut rng = Rng::new(6, 0);
    let (_, si) = gen_ground_truth(n, n, 10, 10, 3, &mut rng).unwrap();
    let mean = |sigma: f64, stream: u64| {
        let mut total = 0.0;
        for t in 0..trials {
            let mut rng = Rng::new(6, stream + t);
            let omega = sample_omega(n, n, p, &mut rng).unwrap();
            let noise = gaussian_noise(n, n, &omega, p, sigma, &mut rng).unwrap();
            total += effective_noise(&noise, &si).unwrap();
        }
        total / trials as f64
    };
    let ratio = mean(2.0, 1000) / mean(1.0, 5000);
    assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
}

#[test]
fn effective_noise_stays_below_its_reference_scale() {
    let (n, a, p, sigma) = (300, 15, 0.05, 0.01);
    let mut rng = Rng::new(7, 0);
    let (_, si) = gen_ground_truth(n, n, a, a, 3, &mut rng).unwrap();
    let bound = 10.0 * effective_noise_scale(sigma, a, a, n, n, p);
    for t in 0..20 {
        let mut rng = Rng::new(7, 1 + t);
        let omega = sample_omega(n, n, p, &mut rng).unwrap();
        let noise = gaussian_noise(n, n, &omega, p, sigma, &mut rng).unwrap();
        assert!(effective_noise(&noise, &si).unwrap() <= bound);
    }
}

#[test]
fn relative_error_matches_double_loop() {
    let mut rng = Rng::new(8, 0);
    let a = rng.gaussian_matrix(7, 5);
    let b = rng.gaussian_matrix(7, 5);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..7 {
        for j in 0..5 {
            num += (a[(i, j)] - b[(i, j)]).powi(2);
            den += b[(i, j)].powi(2);
        }
    }
    assert!((relative_error(&a, &b).unwrap() - (num / den).sqrt()).abs() < 1e-14);
}

#[test]
fn misspec_residual_matches_dense_projection() {
    let mut rng = Rng::new(9, 0);
    let x = matrix::orthonormalize(&rng.gaussian_matrix(20, 4)).unwrap();
    let y = matrix::orthonormalize(&rng.gaussian_matrix(15, 3)).unwrap();
    let si = SideInfo::new(x.clone(), y.clone()).unwrap();
    let l = rng.gaussian_matrix(20, 15);
    let dense = (&l - &x * x.transpose() * &l * &y * y.transpose()).norm();
    assert!((misspec_residual(&l, &si).unwrap() - dense).abs() < 1e-9 * dense);
    let inside = si.lift(&rng.gaussian_matrix(4, 3));
    assert!(misspec_residual(&inside, &si).unwrap() < 1e-9 * inside.norm());
}

#[test]
fn misspec_residual_tracks_inexactness() {
    let mut rng = Rng::new(10, 0);
    let (truth, exact) = gen_ground_truth(80, 80, 8, 8, 3, &mut rng).unwrap();
    assert!(misspec_residual(&truth.l_star, &exact).unwrap() < 1e-9 * truth.l_star.norm());
    let x = gen_inexact_side_info(&truth.u_star, 8, 0.2, &mut rng).unwrap().x;
    let y = gen_inexact_side_info(&truth.v_star, 8, 0.2, &mut rng).unwrap().x;
    let angles = principal_angles(&x, &truth.u_star).unwrap();
    assert!((angles.last().unwrap().sin() - 0.2).abs() < 1e-10);
    let resid = misspec_residual(&truth.l_star, &SideInfo::new(x, y).unwrap()).unwrap();
    assert!(resid > 0.0 && resid < truth.l_star.norm());
}

#[test]
fn report_fields_are_consistent() {
    let mut rng = Rng::new(11, 0);
    let (truth, si) = gen_ground_truth(60, 50, 6, 5, 2, &mut rng).unwrap();
    let omega = sample_omega(60, 50, 0.3, &mut rng).unwrap();
    let noise = gaussian_noise(60, 50, &omega, 0.3, 0.0, &mut rng).unwrap();
    let rep = InstanceReport::new(&truth, &si, &noise).unwrap();
    assert_eq!(rep.gamma_e, 0.0);
    assert_eq!(rep.sample_count, omega.len());
    assert!(rep.mu0 >= 1.0 - 1e-9 && rep.mu1 >= 1.0 - 1e-9 && rep.mu2 >= 1.0 - 1e-9);
    assert!(rep.kappa >= 1.0 && rep.sample_ratio > 0.0);
    assert_eq!(rep.csv_row().split(',').count(), InstanceReport::CSV_HEADER.split(',').count());
    assert!(rep.to_string().contains("observed entries"));
    let e = ObservationSet::new(2, 2, 1.0, vec![Entry { i: 0, j: 0, v: 1.0 }]).unwrap();
    assert!(effective_noise(&e, &si).is_err());
}
