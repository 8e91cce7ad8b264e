use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_partkrls"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_task(dir: &Path) -> PathBuf {
    let path = dir.join("task.json");
    std::fs::write(
        &path,
        r#"{"kind":"sobolev","r":0.5,"radius":1.0,"k_trunc":50,"noise":{"kind":"gaussian","sigma":0.01}}"#,
    )
    .unwrap();
    path
}

fn small_config(dir: &Path, estimators: &str) -> PathBuf {
    let path = dir.join("config.json");
    let text = format!(
        r#"{{
  "experiment": "rate",
  "task": {{"kind":"sobolev","r":0.5,"radius":1.0,"k_trunc":50,"noise":{{"kind":"gaussian","sigma":0.01}}}},
  "params": {{"r":0.5,"gamma":0.5,"radius":1.0,"sigma":0.01,"noise_bound":0.01,"split_smoothness":null}},
  "kernel": {{"family":"brownian","domain":{{"lo":[0.0],"hi":[1.0]}}}},
  "local_kernel": "shared",
  "estimators": [{estimators}],
  "n_grid": [64, 128],
  "replications": 2,
  "schedule": {{"mode":"auto","lambda_scale":0.03,"lambda_rule":"pure","partition_rule":"schedule"}},
  "n_test": 500,
  "master_seed": 3,
  "output": "{}"
}}"#,
        dir.join("out").display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn synth_fit_predict_round() {
    let dir = tempfile::tempdir().unwrap();
    let task = write_task(dir.path());
    let data = dir.path().join("train.csv");
    let out = run(&[
        "synth",
        "--task",
        s(&task),
        "--n",
        "200",
        "--seed",
        "4",
        "--out",
        s(&data),
        "--dump",
        s(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("task.json").exists());
    let text = std::fs::read_to_string(&data).unwrap();
    assert!(text.starts_with("x0,y\n"));
    assert_eq!(text.lines().count(), 201);

    let model = dir.path().join("model.json");
    let out = run(&[
        "fit",
        "--data",
        s(&data),
        "--estimator",
        "localized_nystrom",
        "--kernel",
        "brownian",
        "--lambda",
        "1e-3",
        "--cells",
        "4",
        "--landmarks",
        "20",
        "--anchored",
        "--out",
        s(&model),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let preds = dir.path().join("preds.csv");
    let out = run(&[
        "predict",
        "--model",
        s(&model),
        "--points",
        s(&data),
        "--out",
        s(&preds),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut reader = csv::Reader::from_path(&preds).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        vec!["x0", "y"]
    );
    assert_eq!(reader.records().count(), 200);
}

#[test]
fn every_estimator_fits_from_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let task = write_task(dir.path());
    let data = dir.path().join("train.csv");
    assert!(
        run(&["synth", "--task", s(&task), "--n", "120", "--out", s(&data)])
            .status
            .success()
    );
    for estimator in [
        "krls",
        "localized",
        "nystrom",
        "localized_nystrom",
        "distributed_avg",
    ] {
        let model = dir.path().join(format!("{estimator}.json"));
        let out = run(&[
            "fit",
            "--data",
            s(&data),
            "--estimator",
            estimator,
            "--kernel",
            "gaussian:0.2",
            "--lambda",
            "1e-2",
            "--cells",
            "3",
            "--landmarks",
            "15",
            "--out",
            s(&model),
        ]);
        assert!(
            out.status.success(),
            "{estimator}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn experiment_writes_rows_and_report_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), r#""krls", "localized""#);
    let out = run(&["experiment", "--config", s(&config)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = dir.path().join("out/rows.csv");
    let text = std::fs::read_to_string(&rows).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "estimator,n,m,l,lambda,rep,mise,fit_seconds,min_cell_count,warning"
    );
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);
    assert!(dir.path().join("out/summary.json").exists());
    assert!(dir.path().join("out/task.json").exists());

    let out = run(&["report", "--rows", s(&rows)]);
    assert!(out.status.success());
    let digest: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(digest["rows"], 8);
    assert_eq!(digest["failures"], 0);
}

#[test]
fn bench_writes_timing_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), r#""krls""#);
    let out = run(&[
        "bench",
        "--config",
        s(&config),
        "--repeats",
        "3",
        "--output",
        s(&dir.path().join("t")),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut reader = csv::Reader::from_path(dir.path().join("t/timing.csv")).unwrap();
    assert_eq!(reader.records().count(), 2);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"experiment": "rate"}"#).unwrap();
    assert_eq!(
        run(&["experiment", "--config", s(&bad)]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&[
            "experiment",
            "--config",
            s(&dir.path().join("missing.json"))
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn failed_rows_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let rows = dir.path().join("rows.csv");
    std::fs::write(
        &rows,
        "estimator,n,m,l,lambda,rep,mise,fit_seconds,min_cell_count,warning\n\
         krls,64,1,0,0.01,0,0.5,0.001,64,\n\
         krls,128,1,0,0.01,0,,0.001,128,error: ill-conditioned\n",
    )
    .unwrap();
    let out = run(&["report", "--rows", s(&rows)]);
    assert_eq!(out.status.code(), Some(2));
}
