use std::fs;

use pdflow::harness::config::ExperimentConfig;
use pdflow::harness::figures::{self, Recipe};
use pdflow::harness::run::run;
use pdflow::harness::verify::{verify, Suite, VerifyOptions};

#[test]
fn same_config_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for (k, text) in [
        "problem = quadratic-nd\nseed = 7\ngamma = 1\nN = 200",
        "problem = lasso-demo\nseed = 3\nN = 50",
        "model = icpdps-rescaled\ngamma = 1\nrho = 1\nT = 3",
        "algo = nag\ntau = 1e-3\nN = 300",
    ]
    .iter()
    .enumerate()
    {
        let mut cfg = ExperimentConfig::from_kv_str(text).unwrap();
        cfg.set("output", dir.path().join(format!("a{k}.csv")).to_str().unwrap()).unwrap();
        let a = run(&cfg, dir.path()).unwrap();
        cfg.set("output", dir.path().join(format!("b{k}.csv")).to_str().unwrap()).unwrap();
        let b = run(&cfg, dir.path()).unwrap();
        assert_eq!(fs::read(&a.path).unwrap(), fs::read(&b.path).unwrap(), "{text}");
    }
}

#[test]
fn seeds_change_random_problems() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for seed in ["1", "2"] {
        let mut cfg = ExperimentConfig::from_kv_str("problem = quadratic-nd\nN = 5").unwrap();
        cfg.set("seed", seed).unwrap();
        cfg.set("output", dir.path().join(format!("s{seed}.csv")).to_str().unwrap()).unwrap();
        paths.push(run(&cfg, dir.path()).unwrap().path);
    }
    assert_ne!(fs::read(&paths[0]).unwrap(), fs::read(&paths[1]).unwrap());
}

#[test]
fn csv_cells_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_kv_str("gamma = 1\nrho = 1\nN = 10").unwrap();
    let summary = run(&cfg, dir.path()).unwrap();
    assert_eq!(summary.path, dir.path().join("quadratic1d_icpdps.csv"));
    let mut reader = csv::Reader::from_path(&summary.path).unwrap();
    let header = reader.headers().unwrap().clone();
    assert_eq!(&header[3], "x_1");
    assert_eq!(header.len(), 10);
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 11);
    let x1: f64 = rows[1][3].parse().unwrap();
    assert_eq!(x1, 0.0);
    let eta1: f64 = rows[1][6].parse().unwrap();
    assert!((eta1 - 1.0 / 3.0).abs() < 1e-15);
    assert!(rows[1][3].contains('e'));
}

#[test]
fn figure_bundles_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for recipe in Recipe::ALL {
        let (_, fa) = figures::figure(recipe, a.path()).unwrap();
        let (_, fb) = figures::figure(recipe, b.path()).unwrap();
        assert_eq!(fa.len(), fb.len());
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(x.file_name(), y.file_name());
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
        }
    }
    assert!(a.path().join("fig1").join("fig1_ode_rescaled.csv").exists());
}

#[test]
fn lyapunov_reports_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let report = verify(
        Suite::Lyapunov,
        &VerifyOptions {
            inject_fault: false,
            report_dir: Some(dir.path().to_path_buf()),
        },
    )
    .unwrap();
    assert!(report.checks.iter().any(|c| c.name.starts_with("rescaled-monotone")));
    let text = fs::read_to_string(dir.path().join("gap_decay_gamma1_rho1.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "time,value,bound,pass");
}
