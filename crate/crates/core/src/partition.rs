//! Disjoint partitions of the input domain, cell assignment and dataset
//! splitting.
//!
//! Grid cells are half-open `[a, b)` along every axis except the last cell of
//! each axis, which is closed at the top. Grid cells are numbered row-major
//! (the first axis varies slowest). Voronoi ties go to the lowest center index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::BoxDomain;
use crate::points::Points;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Partition {
    Grid {
        domain: BoxDomain,
        cells_per_dim: Vec<usize>,
    },
    Voronoi {
        domain: BoxDomain,
        centers: Points,
    },
}

pub fn build_grid_partition(domain: BoxDomain, cells_per_dim: Vec<usize>) -> Result<Partition> {
    if cells_per_dim.len() != domain.dim() {
        return Err(Error::contract(format!(
            "{} cell counts for a {}-dimensional box",
            cells_per_dim.len(),
            domain.dim()
        )));
    }
    if cells_per_dim.contains(&0) {
        return Err(Error::contract("every axis needs at least one cell"));
    }
    Ok(Partition::Grid {
        domain,
        cells_per_dim,
    })
}

pub fn build_voronoi_partition(domain: BoxDomain, centers: Points) -> Result<Partition> {
    if centers.is_empty() {
        return Err(Error::EmptyInput("voronoi centers"));
    }
    if centers.dim() != domain.dim() {
        return Err(Error::contract(
            "voronoi centers and domain differ in dimension",
        ));
    }
    Ok(Partition::Voronoi { domain, centers })
}

impl Partition {
    /// `m` equal cells on `[lo, hi]`.
    pub fn intervals(lo: f64, hi: f64, m: usize) -> Result<Self> {
        build_grid_partition(BoxDomain::interval(lo, hi)?, vec![m])
    }

    pub fn domain(&self) -> &BoxDomain {
        match self {
            Partition::Grid { domain, .. } | Partition::Voronoi { domain, .. } => domain,
        }
    }

    pub fn num_cells(&self) -> usize {
        match self {
            Partition::Grid { cells_per_dim, .. } => cells_per_dim.iter().product(),
            Partition::Voronoi { centers, .. } => centers.len(),
        }
    }

    pub fn assign(&self, x: &[f64]) -> Result<usize> {
        self.domain().check(x)?;
        Ok(self.assign_unchecked(x))
    }

    pub(crate) fn assign_unchecked(&self, x: &[f64]) -> usize {
        match self {
            Partition::Grid {
                domain,
                cells_per_dim,
            } => {
                let mut cell = 0;
                for (d, &c) in cells_per_dim.iter().enumerate() {
                    cell = cell * c + axis_index(domain.lo()[d], domain.hi()[d], c, x[d]);
                }
                cell
            }
            Partition::Voronoi { centers, .. } => {
                let mut best = 0;
                let mut best_dist = f64::INFINITY;
                for (j, c) in centers.iter().enumerate() {
                    let dist: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                    if dist < best_dist {
                        best = j;
                        best_dist = dist;
                    }
                }
                best
            }
        }
    }

    /// Bounding box of a grid cell. Voronoi cells have no box.
    pub fn cell_box(&self, cell: usize) -> Result<BoxDomain> {
        match self {
            Partition::Grid {
                domain,
                cells_per_dim,
            } => {
                if cell >= self.num_cells() {
                    return Err(Error::contract(format!("cell {cell} out of range")));
                }
                let mut rest = cell;
                let mut lo = vec![0.0; domain.dim()];
                let mut hi = vec![0.0; domain.dim()];
                for d in (0..domain.dim()).rev() {
                    let c = cells_per_dim[d];
                    let k = rest % c;
                    rest /= c;
                    lo[d] = edge(domain.lo()[d], domain.hi()[d], c, k);
                    hi[d] = edge(domain.lo()[d], domain.hi()[d], c, k + 1);
                }
                BoxDomain::new(lo, hi)
            }
            Partition::Voronoi { .. } => Err(Error::contract("voronoi cells are not boxes")),
        }
    }

    /// Fraction of the domain volume in each grid cell, i.e. the cell
    /// probabilities under a uniform marginal.
    pub fn uniform_cell_measures(&self) -> Result<Vec<f64>> {
        let total = self.domain().volume();
        (0..self.num_cells())
            .map(|j| self.cell_box(j).map(|b| b.volume() / total))
            .collect()
    }
}

fn edge(lo: f64, hi: f64, cells: usize, k: usize) -> f64 {
    if k == cells {
        hi
    } else {
        lo + (hi - lo) * k as f64 / cells as f64
    }
}

/// Cell index along one axis, consistent with [`edge`].
fn axis_index(lo: f64, hi: f64, cells: usize, x: f64) -> usize {
    let guess = ((x - lo) / (hi - lo) * cells as f64).floor();
    let mut k = if guess.is_finite() && guess > 0.0 {
        (guess as usize).min(cells - 1)
    } else {
        0
    };
    while k > 0 && x < edge(lo, hi, cells, k) {
        k -= 1;
    }
    while k + 1 < cells && x >= edge(lo, hi, cells, k + 1) {
        k += 1;
    }
    k
}

/// Per-cell counts, empirical weights and index sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub counts: Vec<usize>,
    /// `n_j / n`, with the last entry set to `1 − Σ others`.
    pub weights: Vec<f64>,
    pub index_sets: Vec<Vec<usize>>,
}

impl CellStats {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn min_count(&self) -> usize {
        self.counts.iter().copied().min().unwrap_or(0)
    }

    pub fn min_nonempty_count(&self) -> Option<usize> {
        self.counts.iter().copied().filter(|&c| c > 0).min()
    }

    pub fn empty_cells(&self) -> Vec<usize> {
        (0..self.counts.len())
            .filter(|&j| self.counts[j] == 0)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellData {
    pub xs: Points,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitDataset {
    pub stats: CellStats,
    pub cells: Vec<CellData>,
}

pub fn cell_stats(partition: &Partition, xs: &Points) -> Result<CellStats> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("points to split"));
    }
    let m = partition.num_cells();
    let mut index_sets = vec![Vec::new(); m];
    for (i, x) in xs.iter().enumerate() {
        index_sets[partition.assign(x)?].push(i);
    }
    let n = xs.len() as f64;
    let counts: Vec<usize> = index_sets.iter().map(Vec::len).collect();
    let mut weights: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let head: f64 = weights[..m - 1].iter().sum();
    weights[m - 1] = 1.0 - head;
    Ok(CellStats {
        counts,
        weights,
        index_sets,
    })
}

/// Splits `(X, y)` by cell, preserving the original order within each cell.
pub fn split_dataset(partition: &Partition, xs: &Points, y: &[f64]) -> Result<SplitDataset> {
    if xs.len() != y.len() {
        return Err(Error::contract(format!(
            "{} inputs but {} labels",
            xs.len(),
            y.len()
        )));
    }
    let stats = cell_stats(partition, xs)?;
    let cells = stats
        .index_sets
        .iter()
        .map(|idx| CellData {
            xs: xs.select(idx),
            y: idx.iter().map(|&i| y[i]).collect(),
        })
        .collect();
    Ok(SplitDataset { stats, cells })
}
