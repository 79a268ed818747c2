//! One-sided test of the null hypothesis θ = 0 (no confounding).
//!
//! The statistic T(ṽ) = (1/√d)(⟨ṽ, Σ_XX⁻¹ṽ⟩ − τ(Σ_XX⁻¹)) has mean zero when ṽ
//! is uniform on the sphere and grows when the regression direction piles up
//! in low-eigenvalue eigenspaces, which is what confounding does.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Stage};
use crate::rng::{seeded, standard_normal};
use crate::spectral::{
    empirical_covariance, regression_vector, unit_direction, CovarianceModel, DataMatrix,
    UnitDirection,
};

pub const MIN_NULL_COUNT: usize = 100;
pub const DEFAULT_NULL_COUNT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullMethod {
    /// Exact null: T evaluated on uniform points of the sphere.
    #[default]
    SphereMonteCarlo,
    /// Weighted sum of squared Gaussians approximating the null for moderate d.
    MixedChi2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub t_observed: f64,
    pub p_value: f64,
    pub null_samples: Vec<f64>,
    pub method: NullMethod,
    pub null_count: usize,
    pub seed: u64,
}

/// T(ṽ) evaluated in the eigenbasis of `cov`.
pub fn statistic_t(dir: &UnitDirection, cov: &CovarianceModel) -> Result<f64> {
    if dir.d() != cov.d() {
        return Err(Error::BadDimensions(format!(
            "direction has dimension {} but covariance has {}",
            dir.d(),
            cov.d()
        )));
    }
    let w = dir.coords(cov);
    Ok(statistic_from_coords(w.iter().copied(), cov))
}

fn statistic_from_coords<I: Iterator<Item = f64>>(coords: I, cov: &CovarianceModel) -> f64 {
    let d = cov.d() as f64;
    let mut quad = 0.0;
    let mut mass = 0.0;
    let mut trace = 0.0;
    for (w, &lam) in coords.zip(cov.eigenvalues().iter()) {
        let s = 1.0 / lam;
        let w2 = w * w;
        quad += w2 * s;
        mass += w2;
        trace += s;
    }
    (quad / mass - trace / d) / d.sqrt()
}

fn check_count(count: usize) -> Result<()> {
    if count < MIN_NULL_COUNT {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_NULL_COUNT} null samples, got {count}"
        )));
    }
    Ok(())
}

/// Exact null samples of T: ṽ uniform on the sphere.
///
/// The Gaussian vector is drawn directly in eigenbasis coordinates; the
/// uniform distribution is rotation invariant so this is the same law.
pub fn null_samples_sphere<R: Rng + ?Sized>(
    cov: &CovarianceModel,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_count(count)?;
    let d = cov.d();
    let mut g = vec![0.0; d];
    Ok((0..count)
        .map(|_| {
            g.iter_mut().for_each(|x| *x = standard_normal(rng));
            statistic_from_coords(g.iter().copied(), cov)
        })
        .collect())
}

/// Approximate null samples (1/√d)(Σ_j a_j² s_j − τ(Σ_XX⁻¹)) with s_j the
/// eigenvalues of Σ_XX⁻¹ and a_j ~ N(0, 1/d).
pub fn null_samples_mixed_chi2<R: Rng + ?Sized>(
    cov: &CovarianceModel,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_count(count)?;
    let d = cov.d() as f64;
    let weights: Vec<f64> = cov.eigenvalues().iter().map(|l| 1.0 / l).collect();
    let tau = weights.iter().sum::<f64>() / d;
    let sd = 1.0 / d.sqrt();
    Ok((0..count)
        .map(|_| {
            let sum: f64 = weights
                .iter()
                .map(|s| {
                    let a = sd * standard_normal(rng);
                    a * a * s
                })
                .sum();
            (sum - tau) / d.sqrt()
        })
        .collect())
}

/// Add-one Monte-Carlo upper-tail p-value (1 + #{null ≥ t}) / (1 + N).
pub fn p_value(t_observed: f64, null_samples: &[f64]) -> f64 {
    let exceed = null_samples.iter().filter(|&&t| t >= t_observed).count();
    (1 + exceed) as f64 / (1 + null_samples.len()) as f64
}

/// Runs the test on observational data.
pub fn test_nonconfounding(
    data: &DataMatrix,
    null_count: usize,
    method: NullMethod,
    seed: u64,
) -> Result<TestResult> {
    check_count(null_count)?;
    let cov = empirical_covariance(data).map_err(Error::at(Stage::Covariance))?;
    test_from_covariance(&cov, null_count, method, seed)
}

/// The test starting from precomputed second moments.
pub fn test_from_covariance(
    cov: &CovarianceModel,
    null_count: usize,
    method: NullMethod,
    seed: u64,
) -> Result<TestResult> {
    let a = regression_vector(cov).map_err(Error::at(Stage::Regression))?;
    let dir = unit_direction(&a, cov).map_err(Error::at(Stage::Direction))?;
    test_direction(&dir, cov, null_count, method, seed)
}

/// The test for an already formed regression direction.
pub fn test_direction(
    dir: &UnitDirection,
    cov: &CovarianceModel,
    null_count: usize,
    method: NullMethod,
    seed: u64,
) -> Result<TestResult> {
    let t_observed = statistic_t(dir, cov).map_err(Error::at(Stage::Statistic))?;
    let mut rng = seeded(seed);
    let null_samples = match method {
        NullMethod::SphereMonteCarlo => null_samples_sphere(cov, null_count, &mut rng)?,
        NullMethod::MixedChi2 => null_samples_mixed_chi2(cov, null_count, &mut rng)?,
    };
    Ok(TestResult {
        t_observed,
        p_value: p_value(t_observed, &null_samples),
        null_samples,
        method,
        null_count,
        seed,
    })
}
