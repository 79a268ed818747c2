//! Experiment runner: CSV ingestion, single-dataset analyses, the simulation
//! studies and report emission.

mod config;
mod ingest;
mod report;
mod studies;

pub use config::{ExperimentConfig, Mode, DEFAULT_SAMPLE_SIZES};
pub use ingest::{ingest_csv, read_table, resolve_column, Table};
pub use report::{
    emit_report, format_f64, summary_path, write_json, write_records_csv, write_summary_csv,
    BetaBin, OutputFormat, PValueGroup, Report, RunRecord, Summary,
};
pub use studies::{
    regenerate_record, run, run_estimate, run_overfit_study, run_rejection_study,
    run_simulation_study, run_test, shuffle_target_analysis, BETA_BINS, MAX_FAILURE_FRACTION,
};
