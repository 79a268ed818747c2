use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use spectral_confound::estimate_confounding;
use spectral_confound::harness::{
    ingest_csv, read_table, regenerate_record, run, run_overfit_study, run_simulation_study,
    shuffle_target_analysis, write_json, ExperimentConfig, Mode, Report, Table,
};
use spectral_confound::rng::{normal_matrix, seeded};
use spectral_confound::stats::{mean, std_dev};

fn write_matrix(path: &Path, names: &[&str], values: &DMatrix<f64>) {
    let mut f = std::fs::File::create(path).unwrap();
    writeln!(f, "{}", names.join(",")).unwrap();
    for row in values.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(f, "{}", cells.join(",")).unwrap();
    }
}

fn json(report: &Report) -> Vec<u8> {
    let mut buf = Vec::new();
    write_json(report, &mut buf).unwrap();
    buf
}

fn small(mode: Mode) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(mode);
    c.runs = 6;
    c.samples = 2000;
    c.null_count = 200;
    c.seed = 42;
    c
}

#[test]
fn same_config_same_bytes() {
    for mode in [Mode::Simulate, Mode::RejectionStudy] {
        let c = small(mode);
        assert_eq!(json(&run(&c).unwrap()), json(&run(&c).unwrap()));
    }
    let mut c = small(Mode::OverfitStudy);
    c.sample_sizes = vec![20, 100];
    let a = run(&c).unwrap();
    assert_eq!(json(&a), json(&run(&c).unwrap()));
    assert_eq!(a.records.len(), 12);
}

#[test]
fn json_round_trips() {
    let report = run(&small(Mode::RejectionStudy)).unwrap();
    let back: Report = serde_json::from_slice(&json(&report)).unwrap();
    assert_eq!(back.records, report.records);
    assert_eq!(back.summary, report.summary);
    assert_eq!(back.config, report.config);
}

#[test]
fn records_regenerate_in_isolation() {
    let mut over = small(Mode::OverfitStudy);
    over.sample_sizes = vec![30, 300];
    for c in [small(Mode::Simulate), small(Mode::RejectionStudy), over] {
        let report = run(&c).unwrap();
        for (i, rec) in report.records.iter().enumerate() {
            assert_eq!(
                regenerate_record(&c, i).as_ref(),
                Some(rec),
                "{:?} run {i}",
                c.mode
            );
        }
    }
}

#[test]
fn normalize_is_neutral_for_equal_variances() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = seeded(3);
    let mut values = normal_matrix(500, 5, &mut rng) * normal_matrix(5, 5, &mut rng);
    // rescale every column to standard deviation 2.5
    for mut col in values.column_iter_mut() {
        let v: Vec<f64> = col.iter().copied().collect();
        let (m, s) = (mean(&v), std_dev(&v));
        col.apply(|x| *x = (*x - m) / s * 2.5);
    }
    let path = dir.path().join("eq.csv");
    write_matrix(&path, &["a", "b", "c", "d", "y"], &values);
    let raw = estimate_confounding(&ingest_csv(&path, "y", false).unwrap()).unwrap();
    let norm = estimate_confounding(&ingest_csv(&path, "y", true).unwrap()).unwrap();
    assert!((raw.beta_hat - norm.beta_hat).abs() <= 1e-6);
}

#[test]
fn exact_linear_target_is_unconfounded() {
    // Independent columns of increasing spread; y loads mostly on the widest
    // one, so ṽ sits in the large-eigenvalue directions.
    let mut rng = seeded(8);
    let mut values = normal_matrix(5000, 4, &mut rng);
    for (j, sd) in [1.0, 2.0, 3.0].into_iter().enumerate() {
        values.column_mut(j).scale_mut(sd);
    }
    let y = values.column(0) * 0.1 + values.column(1) * 0.2 + values.column(2);
    values.set_column(3, &y);
    let table = Table {
        names: Some(vec!["x1".into(), "x2".into(), "x3".into(), "y".into()]),
        values,
    };
    let mut c = ExperimentConfig::new(Mode::ShuffleTarget);
    c.seed = 1;
    let report = shuffle_target_analysis(&table, &c).unwrap();
    assert_eq!(report.records.len(), 4);
    assert_eq!(report.records[3].beta_hat, Some(0.0));
}

#[test]
fn independent_columns_are_flagged() {
    // β̂ itself is arbitrary here (0 or the boundary, depending on noise)
    for seed in 0..5 {
        let table = Table {
            names: None,
            values: normal_matrix(100_000, 3, &mut seeded(seed)),
        };
        let config = ExperimentConfig::new(Mode::ShuffleTarget);
        let report = shuffle_target_analysis(&table, &config).unwrap();
        for rec in &report.records {
            let flagged = rec
                .flags
                .iter()
                .any(|f| f == "weak_signal" || f == "zero_signal");
            assert!(flagged, "seed {seed}: {rec:?}");
        }
    }
}

#[test]
fn higher_dimension_does_not_hurt() {
    let corr = |d: usize| {
        let mut c = ExperimentConfig::new(Mode::Simulate);
        c.dim = d;
        c.latent = d;
        c.runs = 100;
        c.seed = 7;
        run_simulation_study(&c)
            .unwrap()
            .summary
            .pearson_beta
            .unwrap()
    };
    let (c10, c50) = (corr(10), corr(50));
    assert!(c50 >= c10 - 0.05, "d = 50: {c50}, d = 10: {c10}");
}

#[test]
fn moderate_samples_still_overfit() {
    let mut c = ExperimentConfig::new(Mode::OverfitStudy);
    c.sample_sizes = vec![100, 1000];
    c.runs = 500;
    c.seed = 5;
    let report = run_overfit_study(&c).unwrap();
    for g in &report.summary.p_value_groups {
        let f = g.fraction_below_alpha;
        let se = (0.05 * 0.95 / g.count as f64).sqrt();
        assert!(f > 0.05 + 3.0 * se, "n = {}: {f}", g.n);
    }
}

#[test]
fn tables_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    std::fs::write(&path, "a,b,y\n1,2,3\n2,1,4\n0,5,1\n7,3,3\n").unwrap();
    let t = read_table(&path).unwrap();
    assert_eq!(t.ncols(), 3);
    let data = ingest_csv(&path, "y", false).unwrap();
    assert_eq!(data.d(), 2);
    assert_eq!(data.x().column(1).as_slice(), &[2.0, 1.0, 5.0, 3.0]);
}
