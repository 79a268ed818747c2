use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::Result;

/// One analysed dataset: a simulation run, or one column in shuffle-target mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub label: Option<String>,
    pub n: usize,
    pub d: usize,
    pub true_beta: Option<f64>,
    pub beta_hat: Option<f64>,
    pub theta_hat: Option<f64>,
    pub t_statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub flags: Vec<String>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn new(run: usize, seed: u64, n: usize, d: usize) -> Self {
        Self {
            run,
            seed,
            label: None,
            n,
            d,
            true_beta: None,
            beta_hat: None,
            theta_hat: None,
            t_statistic: None,
            p_value: None,
            flags: Vec::new(),
            error: None,
        }
    }

    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Runs whose true β falls in [lo, hi).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub median_beta_hat: Option<f64>,
    pub reject_at_0_10: Option<f64>,
    pub reject_at_0_05: Option<f64>,
}

/// P-value distribution for one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueGroup {
    pub n: usize,
    pub count: usize,
    /// Ten equal-width bins on [0, 1].
    pub histogram: Vec<usize>,
    pub fraction_below_alpha: f64,
    pub ks_uniform_statistic: f64,
    pub ks_uniform_p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub failures: usize,
    pub pearson_beta: Option<f64>,
    /// Fraction of tested records with p ≤ α.
    pub rejection_rate: Option<f64>,
    pub beta_bins: Vec<BetaBin>,
    pub p_value_groups: Vec<PValueGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
    pub summary: Summary,
    /// Wall-clock time; kept out of the serialized form so that reports are
    /// byte-identical across runs.
    #[serde(skip)]
    pub elapsed: Option<Duration>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Scientific notation with 17 significant digits; parses back to the same f64.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct SigDigits;

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// `out.csv` → `out.summary.csv`.
pub fn summary_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.summary.csv"))
}

pub fn emit_report(report: &Report, path: &Path, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Json => {
            let mut out = BufWriter::new(File::create(path)?);
            write_json(report, &mut out)?;
            out.flush()?;
        }
        OutputFormat::Csv => {
            write_records_csv(report, File::create(path)?)?;
            write_summary_csv(&report.summary, File::create(summary_path(path))?)?;
        }
    }
    Ok(())
}

/// Single JSON object with a trailing newline.
pub fn write_json<W: Write>(report: &Report, mut out: W) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigits);
    report.serialize(&mut ser)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(format_f64).unwrap_or_default()
}

pub fn write_records_csv<W: Write>(report: &Report, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "run",
        "seed",
        "label",
        "n",
        "d",
        "true_beta",
        "beta_hat",
        "theta_hat",
        "t_statistic",
        "p_value",
        "flags",
        "error",
    ])?;
    for r in &report.records {
        w.write_record([
            r.run.to_string(),
            r.seed.to_string(),
            r.label.clone().unwrap_or_default(),
            r.n.to_string(),
            r.d.to_string(),
            opt(r.true_beta),
            opt(r.beta_hat),
            opt(r.theta_hat),
            opt(r.t_statistic),
            opt(r.p_value),
            r.flags.join(";"),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: one `metric,value` row per summary number.
pub fn write_summary_csv<W: Write>(summary: &Summary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "value"])?;
    let mut row = |k: String, v: String| w.write_record([k, v]);
    row("runs".into(), summary.runs.to_string())?;
    row("failures".into(), summary.failures.to_string())?;
    row("pearson_beta".into(), opt(summary.pearson_beta))?;
    row("rejection_rate".into(), opt(summary.rejection_rate))?;
    for b in &summary.beta_bins {
        let key = format!("beta_bin[{:.1}:{:.1})", b.lo, b.hi);
        row(format!("{key}.count"), b.count.to_string())?;
        row(format!("{key}.median_beta_hat"), opt(b.median_beta_hat))?;
        row(format!("{key}.reject_at_0.10"), opt(b.reject_at_0_10))?;
        row(format!("{key}.reject_at_0.05"), opt(b.reject_at_0_05))?;
    }
    for g in &summary.p_value_groups {
        let key = format!("n={}", g.n);
        row(format!("{key}.count"), g.count.to_string())?;
        for (k, c) in g.histogram.iter().enumerate() {
            row(format!("{key}.histogram[{k}]"), c.to_string())?;
        }
        row(
            format!("{key}.fraction_below_alpha"),
            format_f64(g.fraction_below_alpha),
        )?;
        row(
            format!("{key}.ks_uniform_statistic"),
            format_f64(g.ks_uniform_statistic),
        )?;
        row(
            format!("{key}.ks_uniform_p_value"),
            format_f64(g.ks_uniform_p_value),
        )?;
    }
    w.flush()?;
    Ok(())
}
