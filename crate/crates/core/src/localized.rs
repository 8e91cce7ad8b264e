//! Partition-based estimators: one KRLS or Nyström fit per cell, summed over
//! cells, plus the direct-sum kernel and the random-split averaging baseline.

use log::{info, warn};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::krls::{fit_krls, KrlsModel, Predictor};
use crate::nystrom::{fit_nystrom, NystromModel};
use crate::partition::{split_dataset, CellStats, Partition};
use crate::points::Points;
use crate::seeding::{derive_seed, rng_from};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalModel {
    /// Stand-in for a cell that received no training data.
    Zero,
    Krls(KrlsModel),
    Nystrom(NystromModel),
}

impl LocalModel {
    pub fn is_zero(&self) -> bool {
        matches!(self, LocalModel::Zero)
    }

    /// Number of expansion centers.
    pub fn size(&self) -> usize {
        match self {
            LocalModel::Zero => 0,
            LocalModel::Krls(m) => m.len(),
            LocalModel::Nystrom(m) => m.len(),
        }
    }
}

impl Predictor for LocalModel {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            LocalModel::Zero => Ok(0.0),
            LocalModel::Krls(m) => m.predict(x),
            LocalModel::Nystrom(m) => m.predict(x),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizedModel {
    pub partition: Partition,
    pub locals: Vec<LocalModel>,
    pub lambda: f64,
    pub cell_stats: CellStats,
}

impl LocalizedModel {
    pub fn num_cells(&self) -> usize {
        self.locals.len()
    }

    /// True when every cell produced a fitted (nonzero) local model.
    pub fn all_cells_fitted(&self) -> bool {
        self.locals.iter().all(|l| !l.is_zero())
    }
}

impl Predictor for LocalizedModel {
    /// Only the model of the cell containing `x` contributes.
    fn predict(&self, x: &[f64]) -> Result<f64> {
        let cell = self.partition.assign(x)?;
        self.locals[cell].predict(x).map_err(|e| e.in_cell(cell))
    }
}

fn check_specs(partition: &Partition, specs: &[KernelSpec]) -> Result<()> {
    if specs.len() != partition.num_cells() {
        return Err(Error::contract(format!(
            "{} kernel specs for {} cells",
            specs.len(),
            partition.num_cells()
        )));
    }
    Ok(())
}

fn fit_cells<F>(
    xs: &Points,
    y: &[f64],
    partition: &Partition,
    lambda: f64,
    specs: &[KernelSpec],
    fit_cell: F,
) -> Result<LocalizedModel>
where
    F: Fn(usize, &Points, &[f64], &KernelSpec) -> Result<LocalModel> + Sync,
{
    check_specs(partition, specs)?;
    let split = split_dataset(partition, xs, y)?;
    let locals = split
        .cells
        .par_iter()
        .enumerate()
        .map(|(j, cell)| {
            if cell.xs.is_empty() {
                warn!("cell {j} has no training points; using the zero estimator");
                Ok(LocalModel::Zero)
            } else {
                fit_cell(j, &cell.xs, &cell.y, &specs[j]).map_err(|e| e.in_cell(j))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LocalizedModel {
        partition: partition.clone(),
        locals,
        lambda,
        cell_stats: split.stats,
    })
}

/// Exact KRLS on every cell with a common `lambda`.
pub fn fit_localized(
    xs: &Points,
    y: &[f64],
    partition: &Partition,
    lambda: f64,
    specs: &[KernelSpec],
) -> Result<LocalizedModel> {
    fit_cells(xs, y, partition, lambda, specs, |_, cx, cy, spec| {
        fit_krls(cx, cy, lambda, spec).map(LocalModel::Krls)
    })
}

/// Nyström KRLS with `l` landmarks on every cell. Cells holding fewer than
/// `l` points use all of them. The seed of cell `j` is derived from
/// `(seed, j)`, so results do not depend on the order cells are processed in.
pub fn fit_localized_nystrom(
    xs: &Points,
    y: &[f64],
    partition: &Partition,
    lambda: f64,
    l: usize,
    seed: u64,
    specs: &[KernelSpec],
) -> Result<LocalizedModel> {
    if l == 0 {
        return Err(Error::contract(
            "at least one landmark per cell is required",
        ));
    }
    fit_cells(xs, y, partition, lambda, specs, |j, cx, cy, spec| {
        let local_l = if cx.len() < l {
            info!(
                "cell {j} holds {} points, fewer than l = {l}; using all of them",
                cx.len()
            );
            cx.len()
        } else {
            l
        };
        fit_nystrom(cx, cy, lambda, local_l, cell_seed(seed, j), spec).map(LocalModel::Nystrom)
    })
}

pub fn cell_seed(seed: u64, cell: usize) -> u64 {
    derive_seed(seed, &[cell as u64])
}

/// `K(x, x') = Σ_j p_j⁻¹ K_j(x, x')`, restricted to pairs in the same cell.
pub fn direct_sum_kernel(
    partition: &Partition,
    specs: &[KernelSpec],
    weights: &[f64],
    x: &[f64],
    x_prime: &[f64],
) -> Result<f64> {
    check_specs(partition, specs)?;
    if weights.len() != specs.len() {
        return Err(Error::contract("one weight per cell is required"));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::contract(
            "cell weights must be nonnegative and sum to one",
        ));
    }
    let j = partition.assign(x)?;
    let j_prime = partition.assign(x_prime)?;
    for cell in [j, j_prime] {
        if weights[cell] <= 0.0 {
            return Err(Error::contract(format!(
                "cell {cell} contains a point but has zero weight"
            )));
        }
    }
    if j != j_prime {
        return Ok(0.0);
    }
    Ok(specs[j].eval(x, x_prime)? / weights[j])
}

/// Mean of independent KRLS fits on disjoint chunks of the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedModel {
    pub chunks: Vec<KrlsModel>,
}

impl Predictor for AveragedModel {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut sum = 0.0;
        for chunk in &self.chunks {
            sum += chunk.predict(x)?;
        }
        Ok(sum / self.chunks.len() as f64)
    }
}

/// Random equal-size split into `m` chunks (sizes differ by at most one),
/// one KRLS fit per chunk, predictions averaged.
pub fn fit_distributed_average(
    xs: &Points,
    y: &[f64],
    m: usize,
    lambda: f64,
    spec: &KernelSpec,
    seed: u64,
) -> Result<AveragedModel> {
    if xs.len() != y.len() {
        return Err(Error::contract(format!(
            "{} inputs but {} labels",
            xs.len(),
            y.len()
        )));
    }
    if m == 0 || m > xs.len() {
        return Err(Error::contract(format!(
            "cannot split {} points into {m} chunks",
            xs.len()
        )));
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.shuffle(&mut rng_from(seed));
    let base = xs.len() / m;
    let extra = xs.len() % m;
    let mut chunks = Vec::with_capacity(m);
    let mut start = 0;
    for c in 0..m {
        let size = base + usize::from(c < extra);
        let idx = &order[start..start + size];
        start += size;
        chunks.push((
            xs.select(idx),
            idx.iter().map(|&i| y[i]).collect::<Vec<_>>(),
        ));
    }
    fit_distributed_chunks(&chunks, lambda, spec)
}

/// Averaging estimator over caller-supplied chunks.
pub fn fit_distributed_chunks(
    chunks: &[(Points, Vec<f64>)],
    lambda: f64,
    spec: &KernelSpec,
) -> Result<AveragedModel> {
    if chunks.is_empty() {
        return Err(Error::EmptyInput("chunks"));
    }
    let models = chunks
        .par_iter()
        .enumerate()
        .map(|(j, (cx, cy))| fit_krls(cx, cy, lambda, spec).map_err(|e| e.in_cell(j)))
        .collect::<Result<Vec<_>>>()?;
    Ok(AveragedModel { chunks: models })
}
