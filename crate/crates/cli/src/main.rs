use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spectral_confound::harness::{
    self, emit_report, summary_path, write_json, write_records_csv, write_summary_csv,
    ExperimentConfig, Mode, OutputFormat, Report,
};
use spectral_confound::{Error, NullMethod};

#[derive(Parser, Debug)]
#[command(
    name = "spectral-confound",
    version,
    about = "Estimate and test hidden confounding in linear models from the covariance spectrum"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the confounding strength β̂ for one CSV file.
    Estimate(DataArgs),
    /// Estimate β̂ and test the null hypothesis of no confounding.
    Test(DataArgs),
    /// Random confounded models: true β against β̂.
    Simulate(SimArgs),
    /// Random confounded models with the test; rejection rates binned by β.
    Rejections(SimArgs),
    /// Unconfounded models with noise; p-value distribution per sample size.
    Overfit(SimArgs),
    /// Every column of a CSV file in turn as the target.
    ShuffleTarget(ShuffleArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Comma-separated numeric file; a non-numeric first row is a header.
    #[arg(long)]
    input: PathBuf,
    /// Target column, by header name or 0-based index.
    #[arg(long)]
    target: String,
    /// Scale every predictor column to unit sample variance.
    #[arg(long)]
    normalize: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct ShuffleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    normalize: bool,
    /// Also run the test for every column.
    #[arg(long)]
    with_test: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct SimArgs {
    /// Observed dimension d.
    #[arg(long, default_value_t = 10)]
    dim: usize,
    /// Latent dimension ℓ (defaults to d).
    #[arg(long)]
    latent: Option<usize>,
    /// Sample size; `overfit` accepts a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    samples: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1000)]
    runs: usize,
    /// Standard deviation of the additive noise on Y
    /// (default 0, or 1 for `overfit`).
    #[arg(long)]
    noise_sd: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct CommonArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Number of null draws for the Monte-Carlo p-value.
    #[arg(long, default_value_t = 1000)]
    null_samples: usize,
    #[arg(long, value_enum, default_value_t = NullArg::Sphere)]
    null_method: NullArg,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NullArg {
    Sphere,
    Chi2,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl CommonArgs {
    fn apply(&self, config: &mut ExperimentConfig) {
        config.seed = self.seed;
        config.alpha = self.alpha;
        config.null_count = self.null_samples;
        config.null_method = match self.null_method {
            NullArg::Sphere => NullMethod::SphereMonteCarlo,
            NullArg::Chi2 => NullMethod::MixedChi2,
        };
        config.output_path = self.output.clone();
    }

    fn format(&self) -> OutputFormat {
        match self.format {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Csv => OutputFormat::Csv,
        }
    }
}

fn build_config(command: &Command) -> Result<(ExperimentConfig, OutputFormat), String> {
    match command {
        Command::Estimate(a) | Command::Test(a) => {
            let mode = if matches!(command, Command::Test(_)) {
                Mode::Test
            } else {
                Mode::Estimate
            };
            let mut c = ExperimentConfig::new(mode);
            c.input_path = Some(a.input.clone());
            c.target = Some(a.target.clone());
            c.normalize = a.normalize;
            a.common.apply(&mut c);
            Ok((c, a.common.format()))
        }
        Command::ShuffleTarget(a) => {
            let mut c = ExperimentConfig::new(Mode::ShuffleTarget);
            c.input_path = Some(a.input.clone());
            c.normalize = a.normalize;
            c.with_test = a.with_test;
            a.common.apply(&mut c);
            Ok((c, a.common.format()))
        }
        Command::Simulate(a) | Command::Rejections(a) | Command::Overfit(a) => {
            let mode = match command {
                Command::Simulate(_) => Mode::Simulate,
                Command::Rejections(_) => Mode::RejectionStudy,
                _ => Mode::OverfitStudy,
            };
            let mut c = ExperimentConfig::new(mode);
            c.dim = a.dim;
            c.latent = a.latent.unwrap_or(a.dim);
            c.runs = a.runs;
            if let Some(sd) = a.noise_sd {
                c.noise_sd = sd;
            }
            if let Some(samples) = &a.samples {
                if mode == Mode::OverfitStudy {
                    c.sample_sizes = samples.clone();
                } else if let [n] = samples[..] {
                    c.samples = n;
                } else {
                    return Err("--samples takes a single value except for `overfit`".into());
                }
            }
            a.common.apply(&mut c);
            Ok((c, a.common.format()))
        }
    }
}

fn write_report(report: &Report, format: OutputFormat) -> spectral_confound::Result<()> {
    if let Some(path) = &report.config.output_path {
        emit_report(report, path, format)?;
        if format == OutputFormat::Csv {
            eprintln!("summary written to {}", summary_path(path).display());
        }
        return Ok(());
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match format {
        OutputFormat::Json => write_json(report, &mut out)?,
        OutputFormat::Csv => {
            write_records_csv(report, &mut out)?;
            writeln!(out)?;
            write_summary_csv(&report.summary, &mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::InvalidArgument(_) => 1,
        e if e.is_numeric() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (config, format) = match build_config(&cli.command) {
        Ok(built) => built,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let result = harness::run(&config).and_then(|report| {
        write_report(&report, format)?;
        Ok(report)
    });
    match result {
        Ok(report) => {
            let failures = report.summary.failures;
            let secs = report.elapsed.map(|d| d.as_secs_f64()).unwrap_or_default();
            eprintln!(
                "{} record(s), {failures} failed, {secs:.2} s",
                report.records.len()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
