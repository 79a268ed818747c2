//! Estimation and testing of hidden confounding in linear models.
//!
//! When a hidden common cause drives both a d-dimensional predictor X and a
//! target Y, the population regression vector a′ = Σ_XX⁻¹Σ_XY picks up a term
//! that is amplified along the low-eigenvalue eigenspaces of Σ_XX. Under a
//! rotation-invariant prior this non-generic alignment has a closed-form
//! likelihood in the single parameter θ = σ_c²/σ_a², from which the
//! confounding strength β ∈ [0, 1] follows.
//!
//! - [`spectral`]: covariance estimation and eigendecomposition
//! - [`genmodel`]: synthetic models with known β
//! - [`estimator`]: direction density, θ̂ and β̂, concentration diagnostics
//! - [`cdtest`]: the one-sided test of θ = 0
//! - [`harness`]: CSV ingestion, simulation studies and reports

// `!(x > 0.0)` is used on purpose so that NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cdtest;
pub mod error;
pub mod estimator;
pub mod genmodel;
pub mod harness;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use cdtest::{statistic_t, test_nonconfounding, NullMethod, TestResult};
pub use error::{Error, Result, Stage};
pub use estimator::{
    beta_from_theta, estimate_confounding, estimate_theta, log_direction_density, BetaEstimate,
    ThetaScale,
};
pub use genmodel::{GroundTruth, SyntheticDataset};
pub use spectral::{CovarianceModel, DataMatrix, UnitDirection};
