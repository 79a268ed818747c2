//! Maximum-likelihood estimation of the confounding strength β.
//!
//! Under a rotation-invariant prior on the causal and confounding vectors,
//! the direction ṽ = a′/‖a′‖ of the regression vector has log density
//!
//! ```text
//! log p_θ(ṽ) = −½ [ log det R_θ + d·log ⟨ṽ, R_θ⁻¹ ṽ⟩ ],   R_θ = I + θ Σ_XX⁻¹
//! ```
//!
//! relative to the uniform measure on the sphere, where θ = σ_c²/σ_a². This
//! is the direction density of A = √R_θ, 1/(|det A|·‖A⁻¹ṽ‖^d), in log form.
//! Everything here is evaluated on eigenvalues and eigenbasis coordinates:
//! with r_j = 1 + θ/λ_j no d×d matrix is ever formed for R_θ.

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Stage};
use crate::spectral::{
    empirical_covariance, regression_vector, unit_direction, CovarianceModel, DataMatrix,
    UnitDirection,
};

/// Number of log-spaced θ values in the coarse scan (θ = 0 is scanned in addition).
pub const GRID_POINTS: usize = 200;
/// The scan spans [GRID_LOW, GRID_HIGH] × median eigenvalue.
pub const GRID_LOW: f64 = 1e-6;
pub const GRID_HIGH: f64 = 1e6;
/// Relative bracket width at which golden-section refinement stops.
pub const REFINE_RTOL: f64 = 1e-6;
const REFINE_MAX_ITER: usize = 200;
/// Condition number above which a matrix counts as singular for [`direction_density`].
pub const MAX_CONDITION: f64 = 1e12;

/// θ = σ_c²/σ_a², finite and nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThetaScale(f64);

impl ThetaScale {
    pub const ZERO: ThetaScale = ThetaScale(0.0);

    pub fn new(theta: f64) -> Result<Self> {
        if theta.is_finite() && theta >= 0.0 {
            Ok(Self(theta))
        } else {
            Err(Error::InvalidArgument(format!(
                "theta must be finite and ≥ 0, got {theta}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Output of [`estimate_confounding`] with every intermediate kept.
#[derive(Debug, Clone)]
pub struct BetaEstimate {
    pub theta_hat: ThetaScale,
    pub beta_hat: f64,
    /// τ(Σ_XX⁻¹)
    pub tau_inv: f64,
    /// Every (θ, log p_θ) pair evaluated, in evaluation order.
    pub loglik_profile: Vec<(f64, f64)>,
    pub direction: UnitDirection,
    /// The likelihood maximum sits at the top of the scanned range.
    pub at_boundary: bool,
    pub covariance: CovarianceModel,
    pub regression: DVector<f64>,
}

/// Result of the one-dimensional likelihood maximization.
#[derive(Debug, Clone)]
pub struct ThetaFit {
    pub theta: ThetaScale,
    pub loglik: f64,
    pub profile: Vec<(f64, f64)>,
    pub at_boundary: bool,
}

/// Squared eigenbasis coordinates paired with eigenvalues; the likelihood
/// only depends on these.
struct SpectralProfile<'a> {
    lambdas: &'a [f64],
    w2: Vec<f64>,
}

impl<'a> SpectralProfile<'a> {
    fn new(dir: &UnitDirection, cov: &'a CovarianceModel) -> Result<Self> {
        if dir.d() != cov.d() {
            return Err(Error::BadDimensions(format!(
                "direction has dimension {} but covariance has {}",
                dir.d(),
                cov.d()
            )));
        }
        let w = dir.coords(cov);
        Ok(Self {
            lambdas: cov.eigenvalues().as_slice(),
            w2: w.iter().map(|x| x * x).collect(),
        })
    }

    fn loglik(&self, theta: f64) -> Result<f64> {
        let d = self.lambdas.len() as f64;
        let mut log_det = 0.0;
        let mut quad = 0.0;
        let mut mass = 0.0;
        for (&lam, &w2) in self.lambdas.iter().zip(&self.w2) {
            let r = 1.0 + theta / lam;
            if !r.is_finite() {
                return Err(Error::NumericOverflow(format!(
                    "θ/λ overflows at θ = {theta:e}"
                )));
            }
            log_det += r.ln();
            quad += w2 / r;
            mass += w2;
        }
        // quad/mass instead of quad: exact at θ = 0 even if ‖w‖ ≠ 1 by rounding
        let value = -0.5 * (log_det + d * (quad / mass).ln());
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NumericOverflow(format!(
                "log density not finite at θ = {theta:e}"
            )))
        }
    }
}

/// log p_θ(ṽ) relative to the uniform distribution on the sphere.
pub fn log_direction_density(
    theta: ThetaScale,
    dir: &UnitDirection,
    cov: &CovarianceModel,
) -> Result<f64> {
    SpectralProfile::new(dir, cov)?.loglik(theta.value())
}

/// Density of Φ(v) = Av/‖Av‖ for v uniform on the sphere, relative to the
/// uniform measure: 1 / (|det A|·‖A⁻¹ṽ‖^d).
pub fn direction_density(a: &DMatrix<f64>, dir: &UnitDirection) -> Result<f64> {
    if dir.d() != a.nrows() {
        return Err(Error::BadDimensions(
            "matrix must match the direction".into(),
        ));
    }
    Ok(DirectionDensity::new(a)?.eval(dir.vector()))
}

/// [`direction_density`] with A⁻¹ and log|det A| factored out, for
/// evaluating many directions against one matrix.
#[derive(Debug, Clone)]
pub struct DirectionDensity {
    inverse: DMatrix<f64>,
    log_abs_det: f64,
}

impl DirectionDensity {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let d = a.nrows();
        if a.ncols() != d || d == 0 {
            return Err(Error::BadDimensions("matrix must be square".into()));
        }
        let sv = SVD::new(a.clone(), false, false).singular_values;
        let condition = sv.max() / sv.min();
        if !(condition < MAX_CONDITION) {
            return Err(Error::SingularMatrix { condition });
        }
        let lu = a.clone().lu();
        let log_abs_det = lu.determinant().abs().ln();
        let inverse = lu
            .try_inverse()
            .ok_or(Error::SingularMatrix { condition })?;
        Ok(Self {
            inverse,
            log_abs_det,
        })
    }

    pub fn d(&self) -> usize {
        self.inverse.nrows()
    }

    /// Density at the unit vector `v` (not renormalized).
    pub fn eval(&self, v: &DVector<f64>) -> f64 {
        self.log_eval(v).exp()
    }

    pub fn log_eval(&self, v: &DVector<f64>) -> f64 {
        let pre = &self.inverse * v;
        -(self.log_abs_det + self.d() as f64 * pre.norm().ln())
    }
}

/// Maximizes log p_θ(ṽ) over θ ∈ [0, θ_max].
///
/// Coarse scan over {0} ∪ 200 log-spaced points in [1e-6, 1e6]·λ_med, then
/// golden-section refinement on the interval bracketing the best scan point.
/// Ties go to the smaller θ.
pub fn estimate_theta(dir: &UnitDirection, cov: &CovarianceModel) -> Result<ThetaFit> {
    let profile_fn = SpectralProfile::new(dir, cov)?;
    let grid = theta_grid(cov.median_eigenvalue());
    let mut profile = Vec::with_capacity(grid.len() + 2 * REFINE_MAX_ITER);

    let mut best = 0;
    for (k, &theta) in grid.iter().enumerate() {
        let value = profile_fn.loglik(theta)?;
        profile.push((theta, value));
        if value > profile[best].1 {
            best = k;
        }
    }
    let last = grid.len() - 1;
    let at_boundary = best == last;
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(last)];
    let abs_tol = 1e-12 * grid[1];
    golden_section_max(&profile_fn, lo, hi, abs_tol, &mut profile)?;

    let (theta, loglik) =
        profile
            .iter()
            .copied()
            .fold((f64::NAN, f64::NEG_INFINITY), |(bt, bv), (t, v)| {
                if v > bv || (v == bv && t < bt) {
                    (t, v)
                } else {
                    (bt, bv)
                }
            });
    Ok(ThetaFit {
        theta: ThetaScale::new(theta)?,
        loglik,
        profile,
        at_boundary,
    })
}

/// {0} followed by the log-spaced scan points; the last entry is θ_max.
pub fn theta_grid(median_eigenvalue: f64) -> Vec<f64> {
    let lo = GRID_LOW.log10();
    let hi = GRID_HIGH.log10();
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    std::iter::once(0.0)
        .chain((0..GRID_POINTS).map(|k| median_eigenvalue * 10f64.powf(lo + step * k as f64)))
        .collect()
}

fn golden_section_max(
    f: &SpectralProfile<'_>,
    mut a: f64,
    mut b: f64,
    abs_tol: f64,
    profile: &mut Vec<(f64, f64)>,
) -> Result<()> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f.loglik(x1)?;
    let mut f2 = f.loglik(x2)?;
    profile.push((x1, f1));
    profile.push((x2, f2));
    for _ in 0..REFINE_MAX_ITER {
        let mid = 0.5 * (a + b);
        if b - a <= REFINE_RTOL * mid + abs_tol {
            break;
        }
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f.loglik(x1)?;
            profile.push((x1, f1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f.loglik(x2)?;
            profile.push((x2, f2));
        }
    }
    Ok(())
}

/// β ≈ τ(Σ_XX⁻¹)·θ / (τ(Σ_XX⁻¹)·θ + 1).
pub fn beta_from_theta(theta: ThetaScale, cov: &CovarianceModel) -> f64 {
    let t = cov.tau_inverse() * theta.value();
    t / (t + 1.0)
}

/// Covariance → regression vector → direction → θ̂ → β̂.
pub fn estimate_confounding(data: &DataMatrix) -> Result<BetaEstimate> {
    let cov = empirical_covariance(data).map_err(Error::at(Stage::Covariance))?;
    estimate_from_covariance(cov)
}

/// The estimation pipeline starting from precomputed second moments.
pub fn estimate_from_covariance(cov: CovarianceModel) -> Result<BetaEstimate> {
    let regression = regression_vector(&cov).map_err(Error::at(Stage::Regression))?;
    let direction = unit_direction(&regression, &cov).map_err(Error::at(Stage::Direction))?;
    let fit = estimate_theta(&direction, &cov).map_err(Error::at(Stage::Theta))?;
    let tau_inv = cov.tau_inverse();
    let beta_hat = beta_from_theta(fit.theta, &cov);
    Ok(BetaEstimate {
        theta_hat: fit.theta,
        beta_hat,
        tau_inv,
        loglik_profile: fit.profile,
        direction,
        at_boundary: fit.at_boundary,
        covariance: cov,
        regression,
    })
}

fn ratios(theta: ThetaScale, cov: &CovarianceModel) -> impl Iterator<Item = f64> + '_ {
    let t = theta.value();
    cov.eigenvalues().iter().map(move |&l| 1.0 + t / l)
}

fn tau<I: Iterator<Item = f64>>(values: I, d: usize) -> f64 {
    values.sum::<f64>() / d as f64
}

/// The concentration value ½[log det R_θ − log(τ(R_θ′R_θ⁻¹)/τ(R_θ′))] for
/// ṽ drawn from p_θ′, exactly in its commonly stated form.
///
/// This differs from the log density in sign on the determinant term and
/// lacks the factor d on the second term; [`leading_order_loglik`] is the
/// value the log density actually concentrates around at leading order.
pub fn concentrated_loglik(
    theta: ThetaScale,
    theta_prime: ThetaScale,
    cov: &CovarianceModel,
) -> f64 {
    let d = cov.d();
    let log_det: f64 = ratios(theta, cov).map(f64::ln).sum();
    let cross = tau(
        ratios(theta_prime, cov)
            .zip(ratios(theta, cov))
            .map(|(rp, r)| rp / r),
        d,
    );
    let base = tau(ratios(theta_prime, cov), d);
    0.5 * (log_det - (cross / base).ln())
}

/// −½[log det R_θ + d·log(τ(R_θ′R_θ⁻¹)/τ(R_θ′))]: the law-of-large-numbers
/// limit of ⟨ṽ, R_θ⁻¹ṽ⟩ substituted into [`log_direction_density`].
pub fn leading_order_loglik(
    theta: ThetaScale,
    theta_prime: ThetaScale,
    cov: &CovarianceModel,
) -> f64 {
    let d = cov.d();
    let log_det: f64 = ratios(theta, cov).map(f64::ln).sum();
    let cross = tau(
        ratios(theta_prime, cov)
            .zip(ratios(theta, cov))
            .map(|(rp, r)| rp / r),
        d,
    );
    let base = tau(ratios(theta_prime, cov), d);
    -0.5 * (log_det + d as f64 * (cross / base).ln())
}

/// Which form of the concentration probability bound to evaluate: as usually
/// stated, or the variant that falls out of the variance derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundForm {
    /// 1 − (1/(dε²))·(τ(R_θ²R_θ′⁻²)/τ(R_θR_θ′)² + τ(R_θ′²)/τ(R_θ′)²)
    #[default]
    Stated,
    /// 1 − (4/(dε²))·(τ(R_θ′²R_θ⁻²)/τ(R_θ′R_θ)² + τ(R_θ′²)/τ(R_θ′)²)
    Derived,
}

/// Lower bound on the probability that log p_θ(ṽ) lies within ε of the
/// concentration value. Returned raw; it may be negative.
pub fn concentration_bound(
    theta: ThetaScale,
    theta_prime: ThetaScale,
    cov: &CovarianceModel,
    epsilon: f64,
    form: BoundForm,
) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let d = cov.d();
    let pairs = || ratios(theta, cov).zip(ratios(theta_prime, cov));
    let product = tau(pairs().map(|(r, rp)| r * rp), d);
    let prime = tau(ratios(theta_prime, cov), d);
    let prime_sq = tau(ratios(theta_prime, cov).map(|rp| rp * rp), d);
    let (factor, quotient) = match form {
        BoundForm::Stated => (1.0, tau(pairs().map(|(r, rp)| (r / rp).powi(2)), d)),
        BoundForm::Derived => (4.0, tau(pairs().map(|(r, rp)| (rp / r).powi(2)), d)),
    };
    let spread = quotient / (product * product) + prime_sq / (prime * prime);
    Ok(1.0 - factor / (d as f64 * epsilon * epsilon) * spread)
}

/// Concentration value and probability bound for a (θ, θ′, ε) triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationDiagnostic {
    pub theta: ThetaScale,
    pub theta_prime: ThetaScale,
    pub concentrated_value: f64,
    pub epsilon: f64,
    pub probability_lower_bound: f64,
}

impl ConcentrationDiagnostic {
    pub fn new(
        theta: ThetaScale,
        theta_prime: ThetaScale,
        cov: &CovarianceModel,
        epsilon: f64,
        form: BoundForm,
    ) -> Result<Self> {
        Ok(Self {
            theta,
            theta_prime,
            concentrated_value: concentrated_loglik(theta, theta_prime, cov),
            epsilon,
            probability_lower_bound: concentration_bound(theta, theta_prime, cov, epsilon, form)?,
        })
    }

    /// The bound clamped to [0, 1] for display.
    pub fn reported_probability(&self) -> f64 {
        self.probability_lower_bound.clamp(0.0, 1.0)
    }
}
