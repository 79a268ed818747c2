//! Synthetic linear models with a known confounding strength.
//!
//! Latent sources Z ~ N(0, I_ℓ) are mixed into predictors X = M·Z and the
//! target is Y = aᵀX + cᵀZ (+ optional noise). The regression vector is then
//! a′ = a + M⁺ᵀc, where M⁺ᵀ is the transpose of the pseudo-inverse.

use nalgebra::{DMatrix, DVector, SVD};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{normal_matrix, normal_vector, seeded};
use crate::spectral::{CovarianceModel, DataMatrix};

/// Singular values below this fraction of the largest are dropped from M⁺.
const PINV_CUTOFF: f64 = 1e-12;
/// M must have smallest/largest singular value above this.
const FULL_RANK_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    m: DMatrix<f64>,
    a: DVector<f64>,
    c: DVector<f64>,
    sigma_a: f64,
    sigma_c: f64,
    pinv_t: DMatrix<f64>,
}

impl GroundTruth {
    /// `m` is d×ℓ with ℓ ≥ d and full row rank; `a` has length d, `c` length ℓ.
    pub fn new(
        m: DMatrix<f64>,
        a: DVector<f64>,
        c: DVector<f64>,
        sigma_a: f64,
        sigma_c: f64,
    ) -> Result<Self> {
        let (d, l) = m.shape();
        if d == 0 || l < d {
            return Err(Error::BadDimensions(format!(
                "mixing matrix is {d}×{l}; need ℓ ≥ d ≥ 1"
            )));
        }
        if a.len() != d || c.len() != l {
            return Err(Error::BadDimensions(format!(
                "a has length {} and c has length {} for a {d}×{l} mixing matrix",
                a.len(),
                c.len()
            )));
        }
        if !(sigma_a >= 0.0 && sigma_a.is_finite() && sigma_c >= 0.0 && sigma_c.is_finite()) {
            return Err(Error::InvalidArgument(
                "scales must be finite and nonnegative".into(),
            ));
        }
        if m.iter()
            .chain(a.iter())
            .chain(c.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument(
                "model entries must be finite".into(),
            ));
        }
        let pinv_t = pinv_transpose(&m)?;
        Ok(Self {
            m,
            a,
            c,
            sigma_a,
            sigma_c,
            pinv_t,
        })
    }

    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn a(&self) -> &DVector<f64> {
        &self.a
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn sigma_a(&self) -> f64 {
        self.sigma_a
    }

    pub fn sigma_c(&self) -> f64 {
        self.sigma_c
    }

    pub fn d(&self) -> usize {
        self.m.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.m.ncols()
    }

    /// M⁺ᵀ, the d×ℓ map sending confounding coefficients into regression space.
    pub fn pinv_t(&self) -> &DMatrix<f64> {
        &self.pinv_t
    }

    /// M⁺ᵀc, the part of a′ that is due to the confounder.
    pub fn confounding_term(&self) -> DVector<f64> {
        &self.pinv_t * &self.c
    }

    /// Population regression vector a′ = a + M⁺ᵀc.
    pub fn regression_vector(&self) -> DVector<f64> {
        &self.a + self.confounding_term()
    }

    /// Population Σ_XX = M·Mᵀ together with Σ_XY = Σ_XX·a′.
    pub fn covariance(&self) -> Result<CovarianceModel> {
        let sigma = &self.m * self.m.transpose();
        let sigma_xy = &sigma * self.regression_vector();
        CovarianceModel::from_sigma(sigma, sigma_xy, 0)
    }

    /// Same mixing and scales with different coefficient vectors.
    pub fn with_coefficients(&self, a: DVector<f64>, c: DVector<f64>) -> Result<Self> {
        if a.len() != self.d() || c.len() != self.latent_dim() {
            return Err(Error::BadDimensions("coefficient length mismatch".into()));
        }
        Ok(Self {
            a,
            c,
            ..self.clone()
        })
    }
}

fn pinv_transpose(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = SVD::new(m.clone(), true, true);
    let s = &svd.singular_values;
    let max = s.max();
    let min = s.min();
    if !(max > 0.0) || min <= FULL_RANK_EPS * max {
        return Err(Error::RankDeficient {
            ratio: if max > 0.0 { min / max } else { 0.0 },
        });
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    // M = U S Vᵀ  =>  M⁺ᵀ = U S⁺ Vᵀ
    let inv = s.map(|x| if x > PINV_CUTOFF * max { 1.0 / x } else { 0.0 });
    Ok(u * DMatrix::from_diagonal(&inv) * v_t)
}

/// A sampled dataset together with the model that produced it.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub data: DataMatrix,
    pub truth: GroundTruth,
    /// Structural confounding strength; `None` when a = 0 and c = 0.
    pub true_beta: Option<f64>,
    pub seed: u64,
}

/// Draws M with N(0,1) entries, σ_a, σ_c ~ U[0,1], a_j ~ N(0,σ_a²), c_j ~ N(0,σ_c²).
pub fn sample_ground_truth<R: Rng + ?Sized>(
    d: usize,
    l: usize,
    rng: &mut R,
) -> Result<GroundTruth> {
    if d == 0 || l < d {
        return Err(Error::BadDimensions(format!(
            "need ℓ ≥ d ≥ 1, got d = {d}, ℓ = {l}"
        )));
    }
    let m = normal_matrix(d, l, rng);
    let sigma_a: f64 = rng.gen();
    let sigma_c: f64 = rng.gen();
    let a = normal_vector(d, rng) * sigma_a;
    let c = normal_vector(l, rng) * sigma_c;
    GroundTruth::new(m, a, c, sigma_a, sigma_c)
}

/// β = ‖M⁺ᵀc‖² / (‖a‖² + ‖M⁺ᵀc‖²).
pub fn true_beta(truth: &GroundTruth) -> Result<f64> {
    let conf = truth.confounding_term().norm_squared();
    let causal = truth.a().norm_squared();
    if conf == 0.0 && causal == 0.0 {
        return Err(Error::DegenerateModel);
    }
    Ok(conf / (causal + conf))
}

/// Samples n rows of (X, Y) from the structural equations, seeded by `seed`.
/// `noise_sd` adds independent N(0, noise_sd²) noise to Y.
pub fn generate_samples(
    truth: &GroundTruth,
    n: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<SyntheticDataset> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need n ≥ 2 samples, got {n}"
        )));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidArgument(
            "noise_sd must be finite and nonnegative".into(),
        ));
    }
    let mut rng = seeded(seed);
    let l = truth.latent_dim();
    let z = normal_matrix(n, l, &mut rng);
    let x = &z * truth.m().transpose();
    let mut y = &x * truth.a() + &z * truth.c();
    if noise_sd > 0.0 {
        y += normal_vector(n, &mut rng) * noise_sd;
    }
    Ok(SyntheticDataset {
        data: DataMatrix::new(x, y)?,
        true_beta: true_beta(truth).ok(),
        truth: truth.clone(),
        seed,
    })
}

/// Fresh a, c drawn with the model's scales; returns a + M⁺ᵀc.
pub fn sample_aprime_def1<R: Rng + ?Sized>(truth: &GroundTruth, rng: &mut R) -> DVector<f64> {
    let a = normal_vector(truth.d(), rng) * truth.sigma_a();
    let c = normal_vector(truth.latent_dim(), rng) * truth.sigma_c();
    a + truth.pinv_t() * c
}

/// sqrt(σ_a² I + σ_c² Σ_XX⁻¹)·b with b ~ N(0, I_d); only Σ_XX is needed.
pub fn sample_aprime_def2<R: Rng + ?Sized>(
    cov: &CovarianceModel,
    sigma_a: f64,
    sigma_c: f64,
    rng: &mut R,
) -> DVector<f64> {
    let b = normal_vector(cov.d(), rng);
    let (va, vc) = (sigma_a * sigma_a, sigma_c * sigma_c);
    cov.apply_spectral(|l| (va + vc / l).sqrt(), &b)
}

/// X from a random square mixing of Gaussian sources, Y ~ N(0,1) drawn
/// independently of X. `true_beta` is recorded as 0.
pub fn overfit_dataset(d: usize, n: usize, seed: u64) -> Result<SyntheticDataset> {
    if d == 0 || n <= d + 1 {
        return Err(Error::InvalidArgument(format!(
            "need n > d + 1, got d = {d}, n = {n}"
        )));
    }
    let mut rng = seeded(seed);
    let m = normal_matrix(d, d, &mut rng);
    let z = normal_matrix(n, d, &mut rng);
    let x = &z * m.transpose();
    let y = normal_vector(n, &mut rng);
    let truth = GroundTruth::new(m, DVector::zeros(d), DVector::zeros(d), 0.0, 0.0)?;
    Ok(SyntheticDataset {
        data: DataMatrix::new(x, y)?,
        truth,
        true_beta: Some(0.0),
        seed,
    })
}

/// Unconfounded model Y = aᵀX + E with a_j ~ N(0,1), E ~ N(0, noise_sd²) and
/// M a random d×ℓ Gaussian mixing matrix.
pub fn causal_dataset(
    d: usize,
    l: usize,
    n: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<SyntheticDataset> {
    if d == 0 || l < d {
        return Err(Error::BadDimensions(format!(
            "need ℓ ≥ d ≥ 1, got d = {d}, ℓ = {l}"
        )));
    }
    let mut rng = seeded(seed);
    let m = normal_matrix(d, l, &mut rng);
    let a = normal_vector(d, &mut rng);
    let truth = GroundTruth::new(m, a, DVector::zeros(l), 1.0, 0.0)?;
    generate_samples(&truth, n, noise_sd, rng.gen())
}

/// The d×(n−1) mixing matrix under which regression on `data` looks like
/// pure confounding: Mᵀ = H·Xc/√n with H the Helmert basis of the
/// complement of the all-ones vector. Satisfies M·Mᵀ = Xcᵀ·Xc/n.
pub fn overfit_mixing_matrix(data: &DataMatrix) -> DMatrix<f64> {
    let (n, d) = (data.n(), data.d());
    let x = data.x();
    let scale = 1.0 / (n as f64).sqrt();
    let mut m = DMatrix::zeros(d, n - 1);
    for j in 0..d {
        // Helmert rows annihilate constants, so centering is implicit.
        let mut prefix = 0.0;
        for k in 1..n {
            prefix += x[(k - 1, j)];
            let kf = k as f64;
            m[(j, k - 1)] = (prefix - kf * x[(k, j)]) / (kf * (kf + 1.0)).sqrt() * scale;
        }
    }
    m
}
