//! Fit-time measurements per estimator and sample size.

use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use super::config::{Estimator, ExperimentConfig};
use super::experiment::{draw_training_set, fit_estimator, grid_points, unit_seeds};
use super::slope::{fit_loglog_slope, SlopeFit};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub estimator: Estimator,
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub lambda: f64,
    pub median_seconds: f64,
    pub min_seconds: f64,
    pub max_seconds: f64,
    pub repeats: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingScaling {
    pub estimator: Estimator,
    /// Exponent of fit time versus `n`; absent with a single grid point.
    pub fit: Option<SlopeFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingTable {
    pub rows: Vec<TimingRow>,
    pub scaling: Vec<TimingScaling>,
}

impl TimingTable {
    pub fn median(&self, estimator: Estimator, n: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.n == n)
            .map(|r| r.median_seconds)
    }
}

pub const DEFAULT_TIMING_REPEATS: usize = 5;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Times `repeats` fits of every estimator at every grid point on the data of
/// replication 0. All fits run on a single worker thread.
pub fn run_timing_benchmark(config: &ExperimentConfig, repeats: usize) -> Result<TimingTable> {
    config.validate()?;
    if repeats == 0 {
        return Err(Error::contract("at least one timing repeat is required"));
    }
    let task = config.task.build()?;
    let points = grid_points(config, &config.params, &config.params)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::contract(format!("cannot build timing thread pool: {e}")))?;
    let mut rows = Vec::new();
    for &estimator in &config.estimators {
        for gp in &points {
            let seeds = unit_seeds(config.master_seed, estimator, gp.n, 0);
            let (xs, y) = draw_training_set(&task, gp.n, &seeds)?;
            let mut times = Vec::with_capacity(repeats);
            let mut shape = (gp.m, gp.l);
            for _ in 0..repeats {
                let start = Instant::now();
                let outcome =
                    pool.install(|| fit_estimator(estimator, config, gp, &xs, &y, seeds.fit))?;
                times.push(start.elapsed().as_secs_f64());
                shape = (outcome.m, outcome.l);
            }
            let min_seconds = times.iter().copied().fold(f64::INFINITY, f64::min);
            let max_seconds = times.iter().copied().fold(0.0, f64::max);
            let median_seconds = median(&mut times);
            info!("{estimator} n={} median fit {median_seconds:.4}s", gp.n);
            rows.push(TimingRow {
                estimator,
                n: gp.n,
                m: shape.0,
                l: shape.1,
                lambda: gp.lambda,
                median_seconds,
                min_seconds,
                max_seconds,
                repeats,
            });
        }
    }
    let scaling = config
        .estimators
        .iter()
        .map(|&estimator| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.estimator == estimator)
                .map(|r| (r.n as f64, r.median_seconds))
                .collect();
            TimingScaling {
                estimator,
                fit: fit_loglog_slope(&pts).ok(),
            }
        })
        .collect();
    Ok(TimingTable { rows, scaling })
}
