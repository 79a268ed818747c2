//! Fixtures shared by the criterion benches in `benches/`.

use spectral_confound::genmodel::{generate_samples, sample_ground_truth};
use spectral_confound::rng::seeded;
use spectral_confound::spectral::empirical_covariance;
use spectral_confound::{CovarianceModel, DataMatrix};

/// Noiseless samples from a random d = ℓ model.
pub fn synthetic_data(d: usize, n: usize, seed: u64) -> DataMatrix {
    let truth = sample_ground_truth(d, d, &mut seeded(seed)).expect("valid dimensions");
    generate_samples(&truth, n, 0.0, seed.wrapping_add(1))
        .expect("n ≥ 2")
        .data
}

pub fn synthetic_covariance(d: usize, n: usize, seed: u64) -> CovarianceModel {
    empirical_covariance(&synthetic_data(d, n, seed)).expect("n > d")
}
