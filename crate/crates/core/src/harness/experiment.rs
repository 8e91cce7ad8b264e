//! Rate experiments: for every estimator, sample size and replication, draw
//! data, fit with scheduled parameters and record the test error.

use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::config::{
    Estimator, ExperimentConfig, LambdaRule, LocalKernel, PartitionRule, ScheduleConfig,
};
use super::record::AnyModel;
use super::slope::{fit_loglog_slope, SlopeFit};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::krls::fit_krls;
use crate::localized::{fit_distributed_average, fit_localized, fit_localized_nystrom};
use crate::nystrom::fit_nystrom;
use crate::partition::Partition;
use crate::points::Points;
use crate::seeding::{derive_seed, tag_of};
use crate::synth::{gen_inputs, mise_estimate, sample_labels, SyntheticTask};
use crate::theory::{
    l_schedule, lambda_schedule, m_schedule, n0_sufficient, noise_adjusted_lambda_schedule,
    rate_exponent, ModelParams,
};

/// One fit of one estimator on one replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub estimator: Estimator,
    pub n: usize,
    /// Number of cells (1 for unpartitioned estimators).
    pub m: usize,
    /// Landmarks per fit (0 when no subsampling is used).
    pub l: usize,
    pub lambda: f64,
    pub rep: usize,
    /// Absent when the fit failed.
    pub mise: Option<f64>,
    pub fit_seconds: f64,
    pub min_cell_count: usize,
    pub warning: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    /// `(n, mean mise over successful replications)`.
    pub mean_mise: Vec<(usize, f64)>,
    /// Absent with fewer than two usable grid points.
    pub fit: Option<SlopeFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDiagnostic {
    pub n: usize,
    pub lambda: f64,
    pub m: usize,
    pub l: usize,
    /// Sample size from which the localized bound is guaranteed, with equal
    /// cell weights and unit capacity constant.
    pub n0_sufficient: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub theoretical_exponent: f64,
    pub estimators: Vec<EstimatorSummary>,
    pub diagnostics: Vec<GridDiagnostic>,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub summary: ReportSummary,
}

impl RateReport {
    pub fn slope(&self, estimator: Estimator) -> Option<SlopeFit> {
        self.summary
            .estimators
            .iter()
            .find(|s| s.estimator == estimator)
            .and_then(|s| s.fit)
    }

    pub fn mean_mise(&self, estimator: Estimator) -> Vec<(usize, f64)> {
        self.summary
            .estimators
            .iter()
            .find(|s| s.estimator == estimator)
            .map(|s| s.mean_mise.clone())
            .unwrap_or_default()
    }
}

/// Parameters in force at one grid point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub n: usize,
    pub lambda: f64,
    pub m: usize,
    pub l: usize,
}

fn task_cells(config: &ExperimentConfig) -> Result<Partition> {
    config
        .task
        .partition()
        .unwrap_or_else(|| Err(Error::contract("task has no cells")))
}

/// Grid points with `λ` from `lambda_params` and `m`, `l` from `shape_params`.
pub fn grid_points(
    config: &ExperimentConfig,
    lambda_params: &ModelParams,
    shape_params: &ModelParams,
) -> Result<Vec<GridPoint>> {
    match &config.schedule {
        ScheduleConfig::Auto {
            lambda_scale,
            lambda_rule,
            partition_rule,
        } => config
            .n_grid
            .iter()
            .map(|&n| {
                let base = match lambda_rule {
                    LambdaRule::Pure => lambda_schedule(n, lambda_params),
                    LambdaRule::NoiseAdjusted => noise_adjusted_lambda_schedule(n, lambda_params),
                };
                let m = match partition_rule {
                    PartitionRule::Schedule => m_schedule(n, shape_params),
                    PartitionRule::Task => task_cells(config)?.num_cells(),
                };
                Ok(GridPoint {
                    n,
                    lambda: lambda_scale * base,
                    m,
                    l: l_schedule(n, shape_params),
                })
            })
            .collect(),
        ScheduleConfig::Explicit { lambda, m, l } => Ok(config
            .n_grid
            .iter()
            .enumerate()
            .map(|(i, &n)| GridPoint {
                n,
                lambda: lambda[i],
                m: m[i],
                l: l[i],
            })
            .collect()),
    }
}

/// Partition used by the cell-based estimators at a grid point.
pub fn estimator_partition(config: &ExperimentConfig, gp: &GridPoint) -> Result<Partition> {
    match &config.schedule {
        ScheduleConfig::Auto {
            partition_rule: PartitionRule::Task,
            ..
        } => task_cells(config),
        _ => Partition::intervals(0.0, 1.0, gp.m),
    }
}

/// Per-cell kernels: the global kernel, or its restriction to each cell box.
pub fn local_specs(
    kernel: &KernelSpec,
    partition: &Partition,
    mode: LocalKernel,
) -> Result<Vec<KernelSpec>> {
    (0..partition.num_cells())
        .map(|j| match mode {
            LocalKernel::Shared => Ok(kernel.clone()),
            LocalKernel::Anchored => kernel.with_domain(partition.cell_box(j)?),
        })
        .collect()
}

/// Outcome of a single estimator fit.
pub struct FitOutcome {
    pub model: AnyModel,
    pub m: usize,
    pub l: usize,
    pub min_cell_count: usize,
    pub warning: String,
}

/// Fits `estimator` with the parameters of `gp`.
pub fn fit_estimator(
    estimator: Estimator,
    config: &ExperimentConfig,
    gp: &GridPoint,
    xs: &Points,
    y: &[f64],
    seed: u64,
) -> Result<FitOutcome> {
    let n = xs.len();
    let kernel = &config.kernel;
    let cells_warning = |counts: &[usize]| {
        let empty = counts.iter().filter(|&&c| c == 0).count();
        if empty > 0 {
            format!("empty_cells={empty}")
        } else {
            String::new()
        }
    };
    match estimator {
        Estimator::Krls => Ok(FitOutcome {
            model: AnyModel::Krls(fit_krls(xs, y, gp.lambda, kernel)?),
            m: 1,
            l: 0,
            min_cell_count: n,
            warning: String::new(),
        }),
        Estimator::Nystrom => {
            let l = gp.l.min(n);
            Ok(FitOutcome {
                model: AnyModel::Nystrom(fit_nystrom(xs, y, gp.lambda, l, seed, kernel)?),
                m: 1,
                l,
                min_cell_count: n,
                warning: String::new(),
            })
        }
        Estimator::Localized | Estimator::LocalizedNystrom => {
            let partition = estimator_partition(config, gp)?;
            let specs = local_specs(kernel, &partition, config.local_kernel)?;
            let m = partition.num_cells();
            let (model, l) = if estimator == Estimator::Localized {
                let fitted = fit_localized(xs, y, &partition, gp.lambda, &specs)?;
                (fitted, 0)
            } else {
                let fitted =
                    fit_localized_nystrom(xs, y, &partition, gp.lambda, gp.l, seed, &specs)?;
                (fitted, gp.l)
            };
            let mut warning = cells_warning(&model.cell_stats.counts);
            if estimator == Estimator::LocalizedNystrom {
                let short = model
                    .cell_stats
                    .counts
                    .iter()
                    .filter(|&&c| c > 0 && c < gp.l)
                    .count();
                if short > 0 {
                    if !warning.is_empty() {
                        warning.push(';');
                    }
                    warning.push_str(&format!("cells_below_l={short}"));
                }
            }
            let min_cell_count = model.cell_stats.min_count();
            let model = if estimator == Estimator::Localized {
                AnyModel::Localized(model)
            } else {
                AnyModel::LocalizedNystrom(model)
            };
            Ok(FitOutcome {
                model,
                m,
                l,
                min_cell_count,
                warning,
            })
        }
        Estimator::DistributedAvg => {
            let m = gp.m.min(n);
            Ok(FitOutcome {
                model: AnyModel::DistributedAvg(fit_distributed_average(
                    xs, y, m, gp.lambda, kernel, seed,
                )?),
                m,
                l: 0,
                min_cell_count: n / m,
                warning: String::new(),
            })
        }
    }
}

/// Seeds of one `(estimator, n, rep)` unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnitSeeds {
    pub inputs: u64,
    pub labels: u64,
    pub test: u64,
    pub fit: u64,
}

pub fn unit_seeds(master: u64, estimator: Estimator, n: usize, rep: usize) -> UnitSeeds {
    let unit = derive_seed(master, &[tag_of(estimator.name()), n as u64, rep as u64]);
    UnitSeeds {
        inputs: derive_seed(unit, &[1]),
        labels: derive_seed(unit, &[2]),
        test: derive_seed(unit, &[3]),
        fit: derive_seed(unit, &[4]),
    }
}

pub fn draw_training_set(
    task: &SyntheticTask,
    n: usize,
    seeds: &UnitSeeds,
) -> Result<(Points, Vec<f64>)> {
    let xs = gen_inputs(task, n, seeds.inputs);
    let y = sample_labels(task, &xs, seeds.labels)?;
    Ok((xs, y))
}

fn run_unit(
    estimator: Estimator,
    config: &ExperimentConfig,
    task: &SyntheticTask,
    gp: &GridPoint,
    rep: usize,
) -> RateRow {
    let seeds = unit_seeds(config.master_seed, estimator, gp.n, rep);
    let mut row = RateRow {
        estimator,
        n: gp.n,
        m: if estimator.uses_cells() { gp.m } else { 1 },
        l: if estimator.uses_landmarks() { gp.l } else { 0 },
        lambda: gp.lambda,
        rep,
        mise: None,
        fit_seconds: 0.0,
        min_cell_count: 0,
        warning: String::new(),
    };
    let result = (|| -> Result<()> {
        let (xs, y) = draw_training_set(task, gp.n, &seeds)?;
        let start = Instant::now();
        let outcome = fit_estimator(estimator, config, gp, &xs, &y, seeds.fit)?;
        row.fit_seconds = start.elapsed().as_secs_f64();
        drop((xs, y));
        row.m = outcome.m;
        row.l = outcome.l;
        row.min_cell_count = outcome.min_cell_count;
        row.warning = outcome.warning;
        row.mise = Some(mise_estimate(
            &outcome.model,
            task,
            config.n_test,
            seeds.test,
        )?);
        Ok(())
    })();
    if let Err(e) = result {
        warn!("{estimator} n={} rep={rep}: {e}", gp.n);
        row.mise = None;
        if !row.warning.is_empty() {
            row.warning.push(';');
        }
        row.warning.push_str(&format!("error: {e}"));
    }
    row
}

/// Sorts rows by estimator, `n`, replication.
pub fn sort_rows(rows: &mut [RateRow]) {
    rows.sort_by(|a, b| (a.estimator.name(), a.n, a.rep).cmp(&(b.estimator.name(), b.n, b.rep)));
}

/// Per-estimator mean error per `n` and the fitted log-log slope.
pub fn summarize(rows: &[RateRow], estimators: &[Estimator]) -> Vec<EstimatorSummary> {
    estimators
        .iter()
        .map(|&estimator| {
            let mut ns: Vec<usize> = rows
                .iter()
                .filter(|r| r.estimator == estimator)
                .map(|r| r.n)
                .collect();
            ns.sort_unstable();
            ns.dedup();
            let mean_mise: Vec<(usize, f64)> = ns
                .into_iter()
                .filter_map(|n| {
                    let values: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.estimator == estimator && r.n == n)
                        .filter_map(|r| r.mise)
                        .collect();
                    (!values.is_empty())
                        .then(|| (n, values.iter().sum::<f64>() / values.len() as f64))
                })
                .collect();
            let points: Vec<(f64, f64)> = mean_mise.iter().map(|&(n, v)| (n as f64, v)).collect();
            let fit = if points.len() >= 2 {
                fit_loglog_slope(&points).ok()
            } else {
                None
            };
            EstimatorSummary {
                estimator,
                mean_mise,
                fit,
            }
        })
        .collect()
}

fn diagnostics(points: &[GridPoint], params: &ModelParams) -> Vec<GridDiagnostic> {
    points
        .iter()
        .map(|gp| GridDiagnostic {
            n: gp.n,
            lambda: gp.lambda,
            m: gp.m,
            l: gp.l,
            n0_sufficient: n0_sufficient(gp.m, params, 1.0 / gp.m as f64, 1.0),
        })
        .collect()
}

fn run_with(
    config: &ExperimentConfig,
    task: &SyntheticTask,
    lambda_params: &ModelParams,
    shape_params: &ModelParams,
) -> Result<RateReport> {
    let points = grid_points(config, lambda_params, shape_params)?;
    let mut rows = Vec::with_capacity(points.len() * config.replications * config.estimators.len());
    for &estimator in &config.estimators {
        for gp in &points {
            for rep in 0..config.replications {
                let row = run_unit(estimator, config, task, gp, rep);
                info!(
                    "{estimator} n={} rep={rep} mise={:?} fit={:.3}s",
                    gp.n, row.mise, row.fit_seconds
                );
                rows.push(row);
            }
        }
    }
    sort_rows(&mut rows);
    let failures = rows.iter().filter(|r| r.mise.is_none()).count();
    let summary = ReportSummary {
        theoretical_exponent: rate_exponent(lambda_params),
        estimators: summarize(&rows, &config.estimators),
        diagnostics: diagnostics(&points, lambda_params),
        failures,
    };
    Ok(RateReport { rows, summary })
}

/// Runs every configured estimator over the `n` grid.
pub fn run_rate_experiment(config: &ExperimentConfig) -> Result<RateReport> {
    config.validate()?;
    let task = config.task.build()?;
    run_with(config, &task, &config.params, &config.params)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub estimator: Estimator,
    pub n: usize,
    pub mean_high: f64,
    pub mean_low: f64,
    /// Mean of `mise_low − mise_high` over paired replications.
    pub mean_difference: f64,
    pub stderr: f64,
    /// `mean_difference / stderr`.
    pub z: f64,
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImprovedBoundReport {
    /// `λ` scheduled with `r_h`.
    pub high: RateReport,
    /// `λ` scheduled with `r_l`.
    pub low: RateReport,
    pub comparisons: Vec<PairedComparison>,
}

/// Runs the configured estimators twice on identical data: once with `λ`
/// scheduled for the high smoothness `r_h`, once for the low smoothness `r_l`.
/// Cell counts and landmark numbers follow `r_h` in both runs.
pub fn run_improved_bound_experiment(config: &ExperimentConfig) -> Result<ImprovedBoundReport> {
    config.validate()?;
    let task = config.task.build()?;
    let high_params = config.params.high_smoothness()?;
    let low_params = config.params.low_smoothness()?;
    let high = run_with(config, &task, &high_params, &high_params)?;
    let low = run_with(config, &task, &low_params, &high_params)?;
    let comparisons = paired_comparisons(&high.rows, &low.rows, &config.estimators, &config.n_grid);
    Ok(ImprovedBoundReport {
        high,
        low,
        comparisons,
    })
}

pub fn paired_comparisons(
    high: &[RateRow],
    low: &[RateRow],
    estimators: &[Estimator],
    n_grid: &[usize],
) -> Vec<PairedComparison> {
    let mut out = Vec::new();
    for &estimator in estimators {
        for &n in n_grid {
            let pairs: Vec<(f64, f64)> = high
                .iter()
                .filter(|r| r.estimator == estimator && r.n == n)
                .filter_map(|h| {
                    let l = low
                        .iter()
                        .find(|r| r.estimator == estimator && r.n == n && r.rep == h.rep)?;
                    Some((h.mise?, l.mise?))
                })
                .collect();
            if pairs.is_empty() {
                continue;
            }
            let k = pairs.len() as f64;
            let mean_high = pairs.iter().map(|p| p.0).sum::<f64>() / k;
            let mean_low = pairs.iter().map(|p| p.1).sum::<f64>() / k;
            let diffs: Vec<f64> = pairs.iter().map(|(h, l)| l - h).collect();
            let mean_difference = diffs.iter().sum::<f64>() / k;
            let stderr = if pairs.len() > 1 {
                let var = diffs
                    .iter()
                    .map(|d| (d - mean_difference).powi(2))
                    .sum::<f64>()
                    / (k - 1.0);
                (var / k).sqrt()
            } else {
                f64::NAN
            };
            out.push(PairedComparison {
                estimator,
                n,
                mean_high,
                mean_low,
                mean_difference,
                stderr,
                z: mean_difference / stderr,
                pairs: pairs.len(),
            });
        }
    }
    out
}
