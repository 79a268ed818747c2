use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::config::{ExperimentConfig, Mode};
use super::ingest::{read_table, resolve_column, Table};
use super::report::{BetaBin, PValueGroup, Report, RunRecord, Summary};
use crate::cdtest::test_direction;
use crate::error::{Error, Result};
use crate::estimator::estimate_from_covariance;
use crate::genmodel::{causal_dataset, generate_samples, sample_ground_truth, true_beta};
use crate::rng::{derive_seed, seeded};
use crate::spectral::{centered, empirical_covariance, DataMatrix};
use crate::stats;

/// Equal-width bins of true β on [0, 1] in rejection summaries.
pub const BETA_BINS: usize = 10;
/// A study aborts when more than this fraction of its runs fail.
pub const MAX_FAILURE_FRACTION: f64 = 0.10;

/// Runs whatever `config.mode` asks for and stamps the elapsed time.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let start = Instant::now();
    let mut report = match config.mode {
        Mode::Estimate | Mode::Test => run_single(config)?,
        Mode::Simulate => run_simulation_study(config)?,
        Mode::RejectionStudy => run_rejection_study(config)?,
        Mode::OverfitStudy => run_overfit_study(config)?,
        Mode::ShuffleTarget => {
            let path = config.input_path.as_deref().expect("validated");
            let mut table = read_table(path)?;
            if config.normalize {
                table.normalize_columns(0..table.ncols())?;
            }
            shuffle_target_analysis(&table, config)?
        }
    };
    report.elapsed = Some(start.elapsed());
    Ok(report)
}

/// Estimation (and the test when requested) on `data`, filling `rec`.
fn analyse(
    rec: &mut RunRecord,
    data: &DataMatrix,
    config: &ExperimentConfig,
    test_seed: Option<u64>,
) -> Result<()> {
    let cov = empirical_covariance(data)?;
    if weak_signal(data, &cov) {
        rec.flags.push("weak_signal".into());
    }
    let est = estimate_from_covariance(cov)?;
    rec.beta_hat = Some(est.beta_hat);
    rec.theta_hat = Some(est.theta_hat.value());
    if est.at_boundary {
        rec.flags.push("boundary".into());
    }
    if let Some(seed) = test_seed {
        let t = test_direction(
            &est.direction,
            &est.covariance,
            config.null_count,
            config.null_method,
            seed,
        )?;
        rec.t_statistic = Some(t.t_observed);
        rec.p_value = Some(t.p_value);
    }
    Ok(())
}

/// Level below which the regression counts as detectably non-zero.
const WEAK_SIGNAL_LEVEL: f64 = 0.01;

/// The fitted regression is not distinguishable from an independent target:
/// under X ⫫ Y, n·R² is asymptotically χ²_d, and the upper tail at n·R²
/// exceeds 1 %.
fn weak_signal(data: &DataMatrix, cov: &crate::spectral::CovarianceModel) -> bool {
    let (_, yc) = centered(data);
    let var_y = yc.norm_squared() / data.n() as f64;
    if var_y == 0.0 {
        return true;
    }
    let a = cov.apply_spectral(|l| 1.0 / l, cov.sigma_xy());
    let r2 = a.dot(cov.sigma_xy()) / var_y;
    let chi2 = ChiSquared::new(data.d() as f64).expect("d ≥ 1");
    chi2.sf(data.n() as f64 * r2) > WEAK_SIGNAL_LEVEL
}

fn record_error(rec: &mut RunRecord, result: Result<()>) {
    if let Err(e) = result {
        if matches!(e.root(), Error::ZeroSignal) {
            rec.flags.push("zero_signal".into());
        }
        rec.error = Some(e.to_string());
    }
}

fn confounding_record(config: &ExperimentConfig, index: usize, with_test: bool) -> RunRecord {
    let seed = derive_seed(config.seed, index as u64);
    let mut rec = RunRecord::new(index, seed, config.samples, config.dim);
    let mut rng = seeded(seed);
    let result = (|| {
        let truth = sample_ground_truth(config.dim, config.latent, &mut rng)?;
        rec.true_beta = true_beta(&truth).ok();
        let data_seed: u64 = rng.gen();
        let test_seed: u64 = rng.gen();
        let ds = generate_samples(&truth, config.samples, config.noise_sd, data_seed)?;
        analyse(&mut rec, &ds.data, config, with_test.then_some(test_seed))
    })();
    record_error(&mut rec, result);
    rec
}

fn overfit_record(config: &ExperimentConfig, index: usize) -> RunRecord {
    let n = config.sample_sizes[index / config.runs];
    let seed = derive_seed(config.seed, index as u64);
    let mut rec = RunRecord::new(index, seed, n, config.dim);
    rec.true_beta = Some(0.0);
    let mut rng = seeded(seed);
    let data_seed: u64 = rng.gen();
    let test_seed: u64 = rng.gen();
    let result = causal_dataset(config.dim, config.latent, n, config.noise_sd, data_seed)
        .and_then(|ds| analyse(&mut rec, &ds.data, config, Some(test_seed)));
    record_error(&mut rec, result);
    rec
}

/// Recomputes the record with index `index` of a study in isolation.
pub fn regenerate_record(config: &ExperimentConfig, index: usize) -> Option<RunRecord> {
    match config.mode {
        Mode::Simulate => Some(confounding_record(config, index, false)),
        Mode::RejectionStudy => Some(confounding_record(config, index, true)),
        Mode::OverfitStudy => Some(overfit_record(config, index)),
        _ => None,
    }
}

fn collect_runs<F>(config: &ExperimentConfig, total: usize, make: F) -> Result<Report>
where
    F: Fn(usize) -> RunRecord + Sync + Send,
{
    let records: Vec<RunRecord> = (0..total).into_par_iter().map(make).collect();
    let failed = records.iter().filter(|r| r.failed()).count();
    if failed as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::TooManyFailures { failed, total });
    }
    let summary = summarize(&records, config.alpha);
    Ok(Report {
        config: config.clone(),
        records,
        summary,
        elapsed: None,
    })
}

/// Random ground truths → noiseless samples → β̂, paired with the true β.
pub fn run_simulation_study(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    collect_runs(config, config.runs, |i| {
        confounding_record(config, i, false)
    })
}

/// As the simulation study, plus the test for every run; rejection
/// fractions are binned by true β.
pub fn run_rejection_study(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    collect_runs(config, config.runs, |i| confounding_record(config, i, true))
}

/// Unconfounded models Y = aᵀX + E tested at each configured sample size;
/// `runs` records per sample size.
pub fn run_overfit_study(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let total = config.runs * config.sample_sizes.len();
    collect_runs(config, total, |i| overfit_record(config, i))
}

fn run_single(config: &ExperimentConfig) -> Result<Report> {
    let path = config.input_path.as_deref().expect("validated");
    let target = config.target.as_deref().expect("validated");
    let mut table = read_table(path)?;
    let t = resolve_column(target, &table)?;
    if config.normalize {
        table.normalize_columns((0..table.ncols()).filter(|&j| j != t))?;
    }
    let data = table.split_target(t)?;
    let mut rec = RunRecord::new(0, config.seed, data.n(), data.d());
    rec.label = Some(table.column_name(t));
    let test_seed = (config.mode == Mode::Test).then_some(config.seed);
    analyse(&mut rec, &data, config, test_seed)?;
    let summary = summarize(std::slice::from_ref(&rec), config.alpha);
    Ok(Report {
        config: config.clone(),
        records: vec![rec],
        summary,
        elapsed: None,
    })
}

/// Estimation on a single CSV file (`Mode::Estimate`).
pub fn run_estimate(config: &ExperimentConfig) -> Result<Report> {
    let mut c = config.clone();
    c.mode = Mode::Estimate;
    c.validate()?;
    run_single(&c)
}

/// Estimation plus the test on a single CSV file (`Mode::Test`).
pub fn run_test(config: &ExperimentConfig) -> Result<Report> {
    let mut c = config.clone();
    c.mode = Mode::Test;
    c.validate()?;
    run_single(&c)
}

/// Each column in turn as the target, the others as predictors. Per-column
/// failures are recorded, not fatal.
pub fn shuffle_target_analysis(table: &Table, config: &ExperimentConfig) -> Result<Report> {
    let k = table.ncols();
    if k < 3 {
        return Err(Error::InvalidArgument(format!(
            "shuffle-target needs at least 3 columns, got {k}"
        )));
    }
    let records: Vec<RunRecord> = (0..k)
        .into_par_iter()
        .map(|j| {
            let seed = derive_seed(config.seed, j as u64);
            let mut rec = RunRecord::new(j, seed, table.values.nrows(), k - 1);
            rec.label = Some(table.column_name(j));
            let result = table.split_target(j).and_then(|data| {
                analyse(&mut rec, &data, config, config.with_test.then_some(seed))
            });
            record_error(&mut rec, result);
            rec
        })
        .collect();
    let mut summary = summarize(&records, config.alpha);
    summary.beta_bins.clear();
    Ok(Report {
        config: config.clone(),
        records,
        summary,
        elapsed: None,
    })
}

fn fraction(hits: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| hits as f64 / total as f64)
}

/// Correlation of β and β̂, β-binned rejection fractions and per-n p-value
/// distributions over the successful records.
pub(crate) fn summarize(records: &[RunRecord], alpha: f64) -> Summary {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| !r.failed()).collect();
    let (betas, hats): (Vec<f64>, Vec<f64>) = ok
        .iter()
        .filter_map(|r| Some((r.true_beta?, r.beta_hat?)))
        .unzip();
    let pearson_beta = stats::pearson(&betas, &hats);

    let p_values: Vec<f64> = ok.iter().filter_map(|r| r.p_value).collect();
    let rejection_rate = fraction(
        p_values.iter().filter(|&&p| p <= alpha).count(),
        p_values.len(),
    );

    let has_spread = betas.iter().any(|&b| b > 0.0);
    let beta_bins = if has_spread {
        (0..BETA_BINS)
            .map(|k| {
                let lo = k as f64 / BETA_BINS as f64;
                let hi = (k + 1) as f64 / BETA_BINS as f64;
                let members: Vec<&&RunRecord> = ok
                    .iter()
                    .filter(|r| {
                        r.true_beta
                            .is_some_and(|b| b >= lo && (b < hi || (k + 1 == BETA_BINS && b <= hi)))
                    })
                    .collect();
                let hats: Vec<f64> = members.iter().filter_map(|r| r.beta_hat).collect();
                let ps: Vec<f64> = members.iter().filter_map(|r| r.p_value).collect();
                let reject = |a: f64| fraction(ps.iter().filter(|&&p| p <= a).count(), ps.len());
                BetaBin {
                    lo,
                    hi,
                    count: members.len(),
                    median_beta_hat: (!hats.is_empty()).then(|| stats::median(&hats)),
                    reject_at_0_10: reject(0.10),
                    reject_at_0_05: reject(0.05),
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut sizes: Vec<usize> = Vec::new();
    for r in &ok {
        if r.p_value.is_some() && !sizes.contains(&r.n) {
            sizes.push(r.n);
        }
    }
    let p_value_groups = sizes
        .into_iter()
        .map(|n| {
            let ps: Vec<f64> = ok
                .iter()
                .filter(|r| r.n == n)
                .filter_map(|r| r.p_value)
                .collect();
            let ks = stats::ks_uniform(&ps);
            PValueGroup {
                n,
                count: ps.len(),
                histogram: stats::unit_histogram(&ps, 10),
                fraction_below_alpha: ps.iter().filter(|&&p| p <= alpha).count() as f64
                    / ps.len() as f64,
                ks_uniform_statistic: ks.statistic,
                ks_uniform_p_value: ks.p_value,
            }
        })
        .collect();

    Summary {
        runs: records.len(),
        failures: records.len() - ok.len(),
        pearson_beta,
        rejection_rate,
        beta_bins,
        p_value_groups,
    }
}
