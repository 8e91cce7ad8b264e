//! On-disk layout of experiment results: `rows.csv` plus `summary.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bench::TimingTable;
use super::config::Estimator;
use super::experiment::{
    sort_rows, summarize, ImprovedBoundReport, PairedComparison, RateReport, RateRow, ReportSummary,
};
use crate::error::Result;
use crate::synth::SyntheticTask;

pub const ROWS_HEADER: [&str; 10] = [
    "estimator",
    "n",
    "m",
    "l",
    "lambda",
    "rep",
    "mise",
    "fit_seconds",
    "min_cell_count",
    "warning",
];

pub const ROWS_FILE: &str = "rows.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const COMPARISON_FILE: &str = "comparison.json";
pub const TASK_FILE: &str = "task.json";
pub const TIMING_FILE: &str = "timing.csv";
pub const TIMING_SUMMARY_FILE: &str = "timing.json";

pub fn write_rows(path: &Path, rows: &[RateRow]) -> Result<()> {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    writer.write_record(ROWS_HEADER)?;
    for row in &sorted {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<RateRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != ROWS_HEADER {
        return Err(crate::error::Error::contract(format!(
            "unexpected rows header: {}",
            header.join(",")
        )));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(Into::into))
        .collect()
}

/// Writes `rows.csv` and `summary.json` into `dir`, replacing earlier files.
pub fn emit_report(report: &RateReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_rows(&dir.join(ROWS_FILE), &report.rows)?;
    fs::write(
        dir.join(SUMMARY_FILE),
        serde_json::to_string_pretty(&report.summary)?,
    )?;
    Ok(())
}

pub fn read_report(dir: &Path) -> Result<RateReport> {
    let rows = read_rows(&dir.join(ROWS_FILE))?;
    let summary: ReportSummary =
        serde_json::from_str(&fs::read_to_string(dir.join(SUMMARY_FILE))?)?;
    Ok(RateReport { rows, summary })
}

/// The two runs go to `high/` and `low/`, the paired statistics to
/// `comparison.json`.
pub fn emit_improved_report(report: &ImprovedBoundReport, dir: &Path) -> Result<()> {
    emit_report(&report.high, &dir.join("high"))?;
    emit_report(&report.low, &dir.join("low"))?;
    fs::write(
        dir.join(COMPARISON_FILE),
        serde_json::to_string_pretty(&report.comparisons)?,
    )?;
    Ok(())
}

pub fn read_improved_report(dir: &Path) -> Result<ImprovedBoundReport> {
    let comparisons: Vec<PairedComparison> =
        serde_json::from_str(&fs::read_to_string(dir.join(COMPARISON_FILE))?)?;
    Ok(ImprovedBoundReport {
        high: read_report(&dir.join("high"))?,
        low: read_report(&dir.join("low"))?,
        comparisons,
    })
}

/// Dumps the task, including every expansion coefficient.
pub fn emit_task(task: &SyntheticTask, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(TASK_FILE), serde_json::to_string_pretty(task)?)?;
    Ok(())
}

pub fn emit_timing(table: &TimingTable, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut writer = csv::Writer::from_path(dir.join(TIMING_FILE))?;
    for row in &table.rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    fs::write(
        dir.join(TIMING_SUMMARY_FILE),
        serde_json::to_string_pretty(&table.scaling)?,
    )?;
    Ok(())
}

/// Statistics recomputed from a rows file alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowsDigest {
    pub rows: usize,
    pub failures: usize,
    pub warnings: usize,
    pub estimators: Vec<super::experiment::EstimatorSummary>,
}

pub fn digest_rows(rows: &[RateRow]) -> RowsDigest {
    let mut estimators: Vec<Estimator> = rows.iter().map(|r| r.estimator).collect();
    estimators.sort();
    estimators.dedup();
    RowsDigest {
        rows: rows.len(),
        failures: rows.iter().filter(|r| r.mise.is_none()).count(),
        warnings: rows.iter().filter(|r| !r.warning.is_empty()).count(),
        estimators: summarize(rows, &estimators),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::EstimatorSummary;
    use crate::harness::slope::SlopeFit;

    fn row(
        estimator: Estimator,
        n: usize,
        rep: usize,
        mise: Option<f64>,
        warning: &str,
    ) -> RateRow {
        RateRow {
            estimator,
            n,
            m: 4,
            l: 0,
            lambda: 0.1 / 3.0,
            rep,
            mise,
            fit_seconds: 0.012345678901234,
            min_cell_count: n / 4,
            warning: warning.to_owned(),
        }
    }

    fn sample_report() -> RateReport {
        let rows = vec![
            row(Estimator::Localized, 64, 1, Some(1.0 / 7.0), ""),
            row(Estimator::Krls, 64, 0, Some(0.1), ""),
            row(
                Estimator::Localized,
                64,
                0,
                None,
                "error: cell 2: \"bad\", really",
            ),
            row(Estimator::Krls, 128, 0, Some(0.05), "empty_cells=1"),
        ];
        RateReport {
            rows,
            summary: ReportSummary {
                theoretical_exponent: 0.8,
                estimators: vec![EstimatorSummary {
                    estimator: Estimator::Krls,
                    mean_mise: vec![(64, 0.1), (128, 0.05)],
                    fit: Some(SlopeFit {
                        slope: -1.0,
                        stderr: 0.0,
                        intercept: 0.3,
                    }),
                }],
                diagnostics: vec![],
                failures: 1,
            },
        }
    }

    #[test]
    fn header_only_for_empty_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        write_rows(&path, &[]).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "estimator,n,m,l,lambda,rep,mise,fit_seconds,min_cell_count,warning\n"
        );
        assert!(read_rows(&path).unwrap().is_empty());
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut report = sample_report();
        emit_report(&report, dir.path()).unwrap();
        // emission twice overwrites
        emit_report(&report, dir.path()).unwrap();
        let back = read_report(dir.path()).unwrap();
        sort_rows(&mut report.rows);
        assert_eq!(back, report);
    }

    #[test]
    fn rows_are_sorted_by_key() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(&sample_report(), dir.path()).unwrap();
        let rows = read_rows(&dir.path().join(ROWS_FILE)).unwrap();
        let keys: Vec<(&str, usize, usize)> = rows
            .iter()
            .map(|r| (r.estimator.name(), r.n, r.rep))
            .collect();
        assert_eq!(
            keys,
            vec![
                ("krls", 64, 0),
                ("krls", 128, 0),
                ("localized", 64, 0),
                ("localized", 64, 1)
            ]
        );
        assert_eq!(rows[2].mise, None);
    }

    #[test]
    fn digest_counts() {
        let d = digest_rows(&sample_report().rows);
        assert_eq!((d.rows, d.failures, d.warnings), (4, 1, 2));
        assert_eq!(d.estimators.len(), 2);
        let krls = &d.estimators[0];
        assert!((krls.fit.unwrap().slope + 1.0).abs() < 1e-12);
    }
}
