use nalgebra::DVector;
use proptest::prelude::*;

use spectral_confound::estimator::{estimate_from_covariance, estimate_theta};
use spectral_confound::genmodel::{generate_samples, sample_aprime_def2, sample_ground_truth};
use spectral_confound::rng::{normal_vector, seeded, uniform_on_sphere};
use spectral_confound::spectral::unit_direction;
use spectral_confound::{
    beta_from_theta, estimate_confounding, log_direction_density, CovarianceModel, Error, Stage,
    ThetaScale, UnitDirection,
};

/// Log-spaced eigenvalues over [1e-2, 1e3]. θ is only identifiable through
/// eigenvalues on both sides of it; narrower spectra (e.g. [0.5, 2]) recover
/// θ′ = 10 far less often.
fn spread(d: usize) -> CovarianceModel {
    let eig: Vec<f64> = (0..d)
        .map(|j| 1e-2 * 1e5f64.powf(j as f64 / (d - 1) as f64))
        .collect();
    CovarianceModel::diagonal(&eig, DVector::zeros(d)).unwrap()
}

#[test]
fn theta_recovered_at_moderate_dimension() {
    // θ′ = σ_c²/σ_a² = 10
    let cov = spread(200);
    let sc = 10f64.sqrt();
    let hits = (0..200)
        .filter(|&s| {
            let a = sample_aprime_def2(&cov, 1.0, sc, &mut seeded(s));
            let fit = estimate_theta(&unit_direction(&a, &cov).unwrap(), &cov).unwrap();
            let t = fit.theta.value();
            (5.0..=20.0).contains(&t)
        })
        .count();
    assert!(hits >= 180, "{hits}/200 within a factor 2");
}

fn beta_hats(confounded: bool) -> Vec<f64> {
    (0..100)
        .map(|s| {
            let truth = sample_ground_truth(10, 10, &mut seeded(1000 + s)).unwrap();
            let (a, c) = if confounded {
                (DVector::zeros(10), truth.c().clone())
            } else {
                (truth.a().clone(), DVector::zeros(10))
            };
            let truth = truth.with_coefficients(a, c).unwrap();
            let ds = generate_samples(&truth, 10_000, 0.0, 5000 + s).unwrap();
            estimate_confounding(&ds.data).unwrap().beta_hat
        })
        .collect()
}

#[test]
fn purely_causal_data_gives_small_beta() {
    let hats = beta_hats(false);
    let small = hats.iter().filter(|&&b| b < 0.2).count();
    assert!(small >= 80, "{small}/100 below 0.2");
}

#[test]
fn purely_confounded_data_gives_large_beta() {
    let hats = beta_hats(true);
    let large = hats.iter().filter(|&&b| b > 0.75).count();
    assert!(large >= 80, "{large}/100 above 0.75");
}

#[test]
fn stage_is_reported_on_failure() {
    let cov = CovarianceModel::diagonal(&[1.0, 2.0], DVector::zeros(2)).unwrap();
    let err = estimate_from_covariance(cov).unwrap_err();
    assert!(matches!(
        err,
        Error::AtStage {
            stage: Stage::Regression,
            ..
        }
    ));
    assert!(matches!(err.root(), Error::ZeroSignal));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn estimate_is_consistent(d in 2usize..15, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let eig: Vec<f64> = (0..d).map(|_| 0.05 + normal_vector(1, &mut rng)[0].abs() * 3.0).collect();
        let cov = CovarianceModel::diagonal(&eig, normal_vector(d, &mut rng)).unwrap();
        let est = estimate_from_covariance(cov.clone()).unwrap();
        // stored β̂ is exactly the closed form of the stored θ̂
        let t = est.tau_inv * est.theta_hat.value();
        prop_assert_eq!(est.beta_hat, t / (t + 1.0));
        prop_assert!((0.0..=1.0).contains(&est.beta_hat));
        // θ̂ attains the maximum of the profile, and θ = 0 was scanned
        let best = est.loglik_profile.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let at_hat = log_direction_density(est.theta_hat, &est.direction, &cov).unwrap();
        prop_assert!(at_hat >= best - 1e-12 * best.abs().max(1.0));
        prop_assert!(est.loglik_profile.iter().any(|p| p.0 == 0.0));
    }

    #[test]
    fn two_dimensional_fit_is_total(angle in 0.0f64..std::f64::consts::TAU, l2 in 0.01f64..100.0) {
        let cov = CovarianceModel::diagonal(&[1.0, l2], DVector::zeros(2)).unwrap();
        let dir = UnitDirection::new(DVector::from_vec(vec![angle.cos(), angle.sin()])).unwrap();
        let fit = estimate_theta(&dir, &cov).unwrap();
        prop_assert!(fit.theta.value().is_finite());
    }

    #[test]
    fn beta_monotone_in_theta(t1 in 0.0f64..1e3, dt in 1e-6f64..1e3, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let eig: Vec<f64> = (0..4).map(|_| 0.1 + uniform_on_sphere(1, &mut rng)[0].abs()).collect();
        let cov = CovarianceModel::diagonal(&eig, DVector::zeros(4)).unwrap();
        let b1 = beta_from_theta(ThetaScale::new(t1).unwrap(), &cov);
        let b2 = beta_from_theta(ThetaScale::new(t1 + dt).unwrap(), &cov);
        prop_assert!(b1 < b2 && b2 < 1.0 && b1 >= 0.0);
    }
}
