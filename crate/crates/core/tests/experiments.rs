use std::path::PathBuf;

use partkrls::harness::config::{LocalKernel, PartitionRule};
use partkrls::harness::report::{read_report, ROWS_FILE};
use partkrls::harness::{
    emit_report, run_improved_bound_experiment, run_rate_experiment, run_timing_benchmark,
    Estimator, ExperimentConfig, ExperimentKind, LambdaRule, ScheduleConfig, TaskConfig,
};
use partkrls::synth::NoiseModel;
use partkrls::theory::{rate_exponent, ModelParams};
use partkrls::KernelSpec;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn small_sobolev(
    estimators: Vec<Estimator>,
    n_grid: Vec<usize>,
    replications: usize,
) -> ExperimentConfig {
    ExperimentConfig {
        experiment: ExperimentKind::Rate,
        task: TaskConfig::Sobolev {
            r: 0.5,
            radius: 1.0,
            k_trunc: 100,
            noise: NoiseModel::Gaussian { sigma: 0.01 },
        },
        params: ModelParams::new(0.5, 0.5, 1.0, 0.01, 0.01).unwrap(),
        kernel: KernelSpec::brownian(),
        local_kernel: LocalKernel::Shared,
        estimators,
        n_grid,
        replications,
        schedule: ScheduleConfig::Auto {
            lambda_scale: 0.03,
            lambda_rule: LambdaRule::Pure,
            partition_rule: PartitionRule::Schedule,
        },
        n_test: 2000,
        master_seed: 7,
        output: PathBuf::from("unused"),
    }
}

fn small_piecewise(r_low: f64, r_high: f64, exceptional: Vec<usize>) -> ExperimentConfig {
    ExperimentConfig {
        experiment: ExperimentKind::ImprovedBound,
        task: TaskConfig::Piecewise {
            r_low,
            r_high,
            radius_low: 0.25,
            radius_high: 1.0,
            cells: 8,
            exceptional,
            k_trunc: 100,
            noise: NoiseModel::Gaussian { sigma: 0.05 },
        },
        params: ModelParams::new(r_high, 0.5, 1.0, 0.05, 0.05)
            .unwrap()
            .with_split_smoothness(r_low, r_high)
            .unwrap(),
        kernel: KernelSpec::brownian(),
        local_kernel: LocalKernel::Anchored,
        estimators: vec![Estimator::Localized],
        n_grid: vec![128, 256],
        replications: 3,
        schedule: ScheduleConfig::Auto {
            lambda_scale: 0.03,
            lambda_rule: LambdaRule::Pure,
            partition_rule: PartitionRule::Task,
        },
        n_test: 1000,
        master_seed: 11,
        output: PathBuf::from("unused"),
    }
}

#[test]
fn shipped_configs_parse() {
    for name in ["rate_sobolev.json", "improved_bound.json", "timing.json"] {
        let config = ExperimentConfig::load(&configs_dir().join(name)).unwrap();
        let back = ExperimentConfig::from_json(&config.to_json().unwrap()).unwrap();
        assert_eq!(back, config, "{name}");
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let text = std::fs::read_to_string(configs_dir().join("timing.json")).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["surprise"] = serde_json::json!(1);
    assert!(ExperimentConfig::from_json(&value.to_string()).is_err());
}

#[test]
fn invalid_grids_are_rejected() {
    let mut config = small_sobolev(vec![Estimator::Krls], vec![256, 128], 1);
    assert!(config.validate().is_err());
    config.n_grid = vec![128, 128];
    assert!(config.validate().is_err());
    config.n_grid = vec![128];
    config.replications = 0;
    assert!(config.validate().is_err());
}

#[test]
fn single_unit_gives_one_row() {
    let config = small_sobolev(vec![Estimator::Krls], vec![100], 1);
    let report = run_rate_experiment(&config).unwrap();
    assert_eq!(report.rows.len(), 1);
    let row = &report.rows[0];
    assert_eq!(
        (row.estimator, row.n, row.m, row.l, row.rep),
        (Estimator::Krls, 100, 1, 0, 0)
    );
    assert!(row.mise.unwrap() > 0.0);
    assert!(row.warning.is_empty());
    assert!(report.slope(Estimator::Krls).is_none());
}

#[test]
fn rows_cover_every_unit_and_runs_are_deterministic() {
    let config = small_sobolev(Estimator::ALL.to_vec(), vec![64, 128], 2);
    let first = run_rate_experiment(&config).unwrap();
    let second = run_rate_experiment(&config).unwrap();
    assert_eq!(first.rows.len(), 5 * 2 * 2);
    assert_eq!(first.summary.failures, 0);
    for (a, b) in first.rows.iter().zip(&second.rows) {
        assert_eq!((a.estimator, a.n, a.rep), (b.estimator, b.n, b.rep));
        assert_eq!(a.mise.unwrap().to_bits(), b.mise.unwrap().to_bits());
    }
    assert_eq!(
        first.summary.theoretical_exponent,
        rate_exponent(&config.params)
    );
}

#[test]
fn krls_slope_is_negative() {
    let config = small_sobolev(vec![Estimator::Krls], vec![64, 128, 256, 512, 1024], 3);
    let report = run_rate_experiment(&config).unwrap();
    assert!(report.slope(Estimator::Krls).unwrap().slope < 0.0);
}

#[test]
fn scheduled_shapes_are_recorded() {
    let config = small_sobolev(
        vec![Estimator::Localized, Estimator::LocalizedNystrom],
        vec![1024],
        1,
    );
    let report = run_rate_experiment(&config).unwrap();
    for row in &report.rows {
        assert_eq!(row.m, 16);
        assert!(row.min_cell_count >= 1);
        let expected_l = if row.estimator == Estimator::LocalizedNystrom {
            64
        } else {
            0
        };
        assert_eq!(row.l, expected_l);
        assert!((row.lambda - 0.03 * 0.0625).abs() < 1e-15);
    }
}

#[test]
fn empty_cells_are_flagged() {
    let mut config = small_sobolev(vec![Estimator::Localized], vec![20], 1);
    config.schedule = ScheduleConfig::Explicit {
        lambda: vec![1e-2],
        m: vec![200],
        l: vec![1],
    };
    let report = run_rate_experiment(&config).unwrap();
    let row = &report.rows[0];
    assert_eq!(row.min_cell_count, 0);
    assert!(row.warning.starts_with("empty_cells="));
    assert!(row.mise.is_some());
}

#[test]
fn degenerate_shapes_still_produce_rows() {
    let mut config = small_sobolev(
        vec![Estimator::DistributedAvg, Estimator::Nystrom],
        vec![20],
        1,
    );
    config.schedule = ScheduleConfig::Explicit {
        lambda: vec![1e-3],
        m: vec![50],
        l: vec![50],
    };
    let report = run_rate_experiment(&config).unwrap();
    assert_eq!(report.summary.failures, 0);
    let avg = &report.rows[0];
    assert_eq!(
        (avg.estimator, avg.m, avg.min_cell_count),
        (Estimator::DistributedAvg, 20, 1)
    );
    let nys = &report.rows[1];
    assert_eq!((nys.estimator, nys.l), (Estimator::Nystrom, 20));
}

#[test]
fn emitted_report_round_trips() {
    let config = small_sobolev(
        vec![Estimator::Krls, Estimator::Localized],
        vec![64, 128],
        2,
    );
    let report = run_rate_experiment(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();
    assert_eq!(read_report(dir.path()).unwrap(), report);
    let text = std::fs::read_to_string(dir.path().join(ROWS_FILE)).unwrap();
    assert!(
        text.starts_with("estimator,n,m,l,lambda,rep,mise,fit_seconds,min_cell_count,warning\n")
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["theoretical_exponent"].as_f64().unwrap(), 0.8);
}

#[test]
fn equal_smoothness_runs_coincide() {
    let config = small_piecewise(0.5, 0.5, vec![0]);
    let report = run_improved_bound_experiment(&config).unwrap();
    assert_eq!(report.high.rows.len(), report.low.rows.len());
    for (h, l) in report.high.rows.iter().zip(&report.low.rows) {
        assert_eq!(h.lambda, l.lambda);
        assert_eq!(h.mise.unwrap().to_bits(), l.mise.unwrap().to_bits());
    }
    assert!(report.comparisons.iter().all(|c| c.mean_difference == 0.0));
}

#[test]
fn no_exceptional_cells_matches_plain_rate_run() {
    let config = small_piecewise(0.1, 0.5, vec![]);
    let improved = run_improved_bound_experiment(&config).unwrap();
    let mut plain = config.clone();
    plain.experiment = ExperimentKind::Rate;
    plain.params = ModelParams::new(0.5, 0.5, 1.0, 0.05, 0.05).unwrap();
    let rate = run_rate_experiment(&plain).unwrap();
    assert_eq!(improved.high.rows.len(), rate.rows.len());
    for (a, b) in improved.high.rows.iter().zip(&rate.rows) {
        assert_eq!(a.lambda, b.lambda);
        assert_eq!(a.mise.unwrap().to_bits(), b.mise.unwrap().to_bits());
    }
}

#[test]
fn improved_bound_needs_split_parameters() {
    let mut config = small_piecewise(0.1, 0.5, vec![0]);
    config.params = ModelParams::new(0.5, 0.5, 1.0, 0.05, 0.05).unwrap();
    assert!(config.validate().is_err());
}

#[test]
fn timing_rows_are_positive() {
    let config = small_sobolev(
        vec![Estimator::Krls, Estimator::LocalizedNystrom],
        vec![128, 512],
        1,
    );
    let table = run_timing_benchmark(&config, 3).unwrap();
    assert_eq!(table.rows.len(), 4);
    for row in &table.rows {
        assert!(row.median_seconds > 0.0);
        assert!(row.min_seconds <= row.median_seconds && row.median_seconds <= row.max_seconds);
    }
    assert_eq!(table.scaling.len(), 2);
}
