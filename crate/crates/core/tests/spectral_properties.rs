use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use spectral_confound::rng::{normal_matrix, normal_vector, seeded};
use spectral_confound::spectral::{centered, empirical_covariance, regression_vector};
use spectral_confound::{CovarianceModel, DataMatrix};

fn random_data(n: usize, d: usize, seed: u64) -> DataMatrix {
    let mut rng = seeded(seed);
    let mix = normal_matrix(d, d, &mut rng) + DMatrix::identity(d, d) * 2.0;
    let x = normal_matrix(n, d, &mut rng) * mix.transpose();
    let y = &x * normal_vector(d, &mut rng) + normal_vector(n, &mut rng);
    DataMatrix::new(x, y).unwrap()
}

fn orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    normal_matrix(d, d, &mut seeded(seed)).qr().q()
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reconstruction(d in 1usize..12, seed in any::<u64>()) {
        let g = normal_matrix(d, d + 3, &mut seeded(seed));
        let sigma = &g * g.transpose() + DMatrix::identity(d, d) * 0.01;
        let cov = CovarianceModel::from_sigma(sigma.clone(), DVector::zeros(d), 0).unwrap();
        prop_assert!(cov.reconstruction_error() <= 1e-10);
        let v = cov.eigenvectors();
        let rebuilt = v * DMatrix::from_diagonal(cov.eigenvalues()) * v.transpose();
        prop_assert!(rel(&rebuilt, &sigma) <= 1e-10);
        let lam = cov.eigenvalues();
        prop_assert!(lam.iter().zip(lam.iter().skip(1)).all(|(a, b)| a >= b));
        prop_assert!((cov.sigma_xx() - cov.sigma_xx().transpose()).amax() <= 1e-12);
    }

    #[test]
    fn rotation_equivariance(d in 1usize..8, seed in any::<u64>()) {
        let data = random_data(40 + 5 * d, d, seed);
        let u = orthogonal(d, seed ^ 0x5555);
        let cov = empirical_covariance(&data).unwrap();
        let rot = empirical_covariance(&data.rotated(&u).unwrap()).unwrap();
        let expected = &u * cov.sigma_xx() * u.transpose();
        prop_assert!((rot.sigma_xx() - &expected).amax() <= 1e-10 * expected.amax());
        let a = regression_vector(&cov).unwrap();
        let a_rot = regression_vector(&rot).unwrap();
        prop_assert!((a_rot - &u * &a).amax() <= 1e-10 * a.amax().max(1.0));
    }

    #[test]
    fn scale_covariance(d in 1usize..8, seed in any::<u64>(), log_c in -2.0f64..2.0) {
        let c = 10f64.powf(log_c);
        let data = random_data(60, d, seed);
        let cov = empirical_covariance(&data).unwrap();
        let sc = empirical_covariance(&data.scaled(c).unwrap()).unwrap();
        prop_assert!(rel(sc.sigma_xx(), &(cov.sigma_xx() * (c * c))) <= 1e-10);
        let sxy = cov.sigma_xy() * c;
        prop_assert!((sc.sigma_xy() - &sxy).norm() <= 1e-10 * sxy.norm());
        let a = regression_vector(&cov).unwrap() / c;
        prop_assert!((regression_vector(&sc).unwrap() - &a).norm() <= 1e-10 * a.norm());
    }

    #[test]
    fn regression_matches_least_squares(d in 1usize..8, seed in any::<u64>()) {
        let n = 10 * d + rand_n(seed);
        let data = random_data(n, d, seed);
        let a = regression_vector(&empirical_covariance(&data).unwrap()).unwrap();
        let (xc, yc) = centered(&data);
        let ls = xc.svd(true, true).solve(&yc, 1e-14).unwrap();
        prop_assert!((&a - &ls).norm() <= 1e-8 * ls.norm());
    }
}

fn rand_n(seed: u64) -> usize {
    (seed % 50) as usize
}
