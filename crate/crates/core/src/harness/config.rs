use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cdtest::{NullMethod, DEFAULT_NULL_COUNT, MIN_NULL_COUNT};
use crate::error::{Error, Result};

/// Sample sizes scanned by the overfitting study unless overridden.
pub const DEFAULT_SAMPLE_SIZES: [usize; 4] = [20, 100, 1000, 10_000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Estimate,
    Test,
    Simulate,
    RejectionStudy,
    OverfitStudy,
    ShuffleTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub dim: usize,
    pub latent: usize,
    pub samples: usize,
    /// Sample sizes for the overfitting study.
    pub sample_sizes: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub alpha: f64,
    pub null_count: usize,
    pub null_method: NullMethod,
    pub noise_sd: f64,
    pub normalize: bool,
    pub input_path: Option<PathBuf>,
    pub target: Option<String>,
    pub output_path: Option<PathBuf>,
    /// Also run the test for each column in shuffle-target mode.
    pub with_test: bool,
}

impl ExperimentConfig {
    /// Defaults for `mode`: d = ℓ = 10, n = 10 000, 1000 runs, α = 0.05,
    /// 1000 exact null draws; noise 1 for the overfitting study, 0 otherwise.
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            dim: 10,
            latent: 10,
            samples: 10_000,
            sample_sizes: DEFAULT_SAMPLE_SIZES.to_vec(),
            runs: 1000,
            seed: 0,
            alpha: 0.05,
            null_count: DEFAULT_NULL_COUNT,
            null_method: NullMethod::SphereMonteCarlo,
            noise_sd: if mode == Mode::OverfitStudy { 1.0 } else { 0.0 },
            normalize: false,
            input_path: None,
            target: None,
            output_path: None,
            with_test: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.runs == 0 {
            return bad("runs must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.null_count < MIN_NULL_COUNT {
            return bad(format!(
                "null sample count must be at least {MIN_NULL_COUNT}"
            ));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise sd must be finite and nonnegative".into());
        }
        match self.mode {
            Mode::Simulate | Mode::RejectionStudy | Mode::OverfitStudy => {
                if self.dim == 0 {
                    return bad("dimension must be positive".into());
                }
                if self.latent < self.dim {
                    return bad(format!(
                        "latent dimension {} is smaller than dimension {}",
                        self.latent, self.dim
                    ));
                }
                let sizes: &[usize] = if self.mode == Mode::OverfitStudy {
                    &self.sample_sizes
                } else {
                    std::slice::from_ref(&self.samples)
                };
                if sizes.is_empty() {
                    return bad("no sample sizes given".into());
                }
                if let Some(n) = sizes.iter().find(|&&n| n <= self.dim + 1) {
                    return bad(format!("sample size {n} must exceed dimension + 1"));
                }
            }
            Mode::Estimate | Mode::Test | Mode::ShuffleTarget => {
                if self.input_path.is_none() {
                    return bad("an input file is required".into());
                }
                if self.mode != Mode::ShuffleTarget && self.target.is_none() {
                    return bad("a target column is required".into());
                }
            }
        }
        Ok(())
    }
}
