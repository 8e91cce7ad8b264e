//! Synthetic regression tasks with known regularity.
//!
//! Targets are finite expansions in the Mercer basis of the Brownian kernel
//! `min(x, x')` under the uniform distribution on an interval `[a, a + w]`:
//! eigenvalues `w·μ_k` with `μ_k = ((k − ½)π)⁻²` and eigenfunctions
//! `√2 sin((k − ½)π (x − a)/w)`. With `f = Σ c_k φ_k`, the regularity
//! `‖T^{-r} f‖_H ≤ R` reads `Σ c_k² (w μ_k)^{-2r-1} ≤ R²`.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{BoxDomain, KernelSpec};
use crate::krls::Predictor;
use crate::partition::Partition;
use crate::points::Points;
use crate::seeding::rng_from;

/// Slack exponent that keeps the regularity series strictly convergent.
const COEFFICIENT_SLACK: f64 = 0.51;

pub const DEFAULT_TRUNCATION: usize = 200;

/// `μ_k = ((k − ½)π)⁻²` for `k ≥ 1`.
pub fn brownian_eigenvalue(k: usize) -> f64 {
    let f = (k as f64 - 0.5) * PI;
    1.0 / (f * f)
}

/// Finite sine expansion on an interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineExpansion {
    pub lo: f64,
    pub hi: f64,
    pub coefficients: Vec<f64>,
}

impl SineExpansion {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.lo) / self.width();
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| c * SQRT_2 * ((i as f64 + 0.5) * PI * t).sin())
            .sum()
    }

    /// `(Σ c_k² (w μ_k)^{-2r-1})^{1/2}`.
    pub fn source_norm(&self, r: f64) -> f64 {
        let w = self.width();
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| c * c * (w * brownian_eigenvalue(i + 1)).powf(-2.0 * r - 1.0))
            .sum::<f64>()
            .sqrt()
    }

    /// `‖f‖²` in `L²` of the uniform distribution on the interval.
    pub fn mean_square(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }
}

/// Coefficients `c_k ∝ (w μ_k)^{r+½} k^{-0.51}`, scaled to source norm `radius`.
fn regular_expansion(
    lo: f64,
    hi: f64,
    r: f64,
    radius: f64,
    k_trunc: usize,
) -> Result<SineExpansion> {
    if !(r > 0.0 && r <= 0.5) {
        return Err(Error::contract(format!("r must lie in (0, 1/2], got {r}")));
    }
    if k_trunc == 0 {
        return Err(Error::contract("at least one mode is required"));
    }
    if !(radius >= 0.0) {
        return Err(Error::contract("radius must be nonnegative"));
    }
    let w = hi - lo;
    let raw: Vec<f64> = (1..=k_trunc)
        .map(|k| (w * brownian_eigenvalue(k)).powf(r + 0.5) * (k as f64).powf(-COEFFICIENT_SLACK))
        .collect();
    let unscaled = SineExpansion {
        lo,
        hi,
        coefficients: raw,
    };
    let scale = radius / unscaled.source_norm(r);
    Ok(SineExpansion {
        coefficients: unscaled.coefficients.iter().map(|c| c * scale).collect(),
        ..unscaled
    })
}

/// Bound on `sup |f_∞ − f_K|` where `f_∞` continues the coefficient profile
/// of `expansion` (order `r`) past its truncation point.
fn truncation_sup_error(expansion: &SineExpansion, r: f64) -> f64 {
    let k_trunc = expansion.coefficients.len();
    let w = expansion.width();
    let c_last = expansion.coefficients[k_trunc - 1];
    let profile =
        |k: usize| (w * brownian_eigenvalue(k)).powf(r + 0.5) * (k as f64).powf(-COEFFICIENT_SLACK);
    let scale = c_last / profile(k_trunc);
    let explicit_end = k_trunc + 100_000;
    let mut tail: f64 = (k_trunc + 1..=explicit_end).map(profile).sum();
    // Remaining terms decay like k^{-p}; bound them by the integral.
    let p = 2.0 * r + 1.0 + COEFFICIENT_SLACK;
    tail += profile(explicit_end) * explicit_end as f64 / (p - 1.0);
    SQRT_2 * scale.abs() * tail
}

/// Regression function with known regularity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Sobolev {
        expansion: SineExpansion,
    },
    /// One expansion per grid cell, each in the basis of its own cell.
    Piecewise {
        partition: Partition,
        pieces: Vec<SineExpansion>,
    },
}

impl Target {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            Target::Sobolev { expansion } => {
                let domain = BoxDomain::interval(expansion.lo, expansion.hi)?;
                domain.check(x)?;
                Ok(expansion.eval(x[0]))
            }
            Target::Piecewise { partition, pieces } => {
                let j = partition.assign(x)?;
                Ok(pieces[j].eval(x[0]))
            }
        }
    }

    /// `∫ f² dν` under the uniform distribution on the target's interval.
    pub fn mean_square(&self) -> Result<f64> {
        match self {
            Target::Sobolev { expansion } => Ok(expansion.mean_square()),
            Target::Piecewise { partition, pieces } => {
                let measures = partition.uniform_cell_measures()?;
                Ok(pieces
                    .iter()
                    .zip(measures)
                    .map(|(p, w)| w * p.mean_square())
                    .sum())
            }
        }
    }
}

/// A smooth target: `Σ_{k ≤ K} c_k √2 sin((k − ½)πx)` on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SobolevTarget {
    pub target: Target,
    pub truncation_sup_error: f64,
}

pub fn make_sobolev_target(r: f64, radius: f64, k_trunc: usize) -> Result<SobolevTarget> {
    let expansion = regular_expansion(0.0, 1.0, r, radius, k_trunc)?;
    let truncation_sup_error = truncation_sup_error(&expansion, r);
    Ok(SobolevTarget {
        target: Target::Sobolev { expansion },
        truncation_sup_error,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseTarget {
    pub target: Target,
    pub exceptional: Vec<usize>,
    /// `ν(∪_{j∈E} X_j)` under the uniform marginal.
    pub exceptional_mass: f64,
    pub truncation_sup_error: f64,
}

/// Cell-by-cell target on a one-dimensional grid: order `r_low` with radius
/// `radius_low` on the cells in `exceptional`, order `r_high` with radius
/// `radius_high` elsewhere. No continuity across cells is imposed.
pub fn make_piecewise_target(
    r_low: f64,
    r_high: f64,
    radius_low: f64,
    radius_high: f64,
    partition: &Partition,
    exceptional: &[usize],
    k_trunc: usize,
) -> Result<PiecewiseTarget> {
    if partition.domain().dim() != 1 {
        return Err(Error::contract("piecewise targets are one-dimensional"));
    }
    let m = partition.num_cells();
    if let Some(&bad) = exceptional.iter().find(|&&j| j >= m) {
        return Err(Error::contract(format!(
            "exceptional cell {bad} out of range"
        )));
    }
    if r_low > r_high {
        return Err(Error::contract("r_l must not exceed r_h"));
    }
    let mut pieces = Vec::with_capacity(m);
    let mut worst_tail: f64 = 0.0;
    for j in 0..m {
        let cell = partition.cell_box(j)?;
        let (r, radius) = if exceptional.contains(&j) {
            (r_low, radius_low)
        } else {
            (r_high, radius_high)
        };
        let piece = regular_expansion(cell.lo()[0], cell.hi()[0], r, radius, k_trunc)?;
        worst_tail = worst_tail.max(truncation_sup_error(&piece, r));
        pieces.push(piece);
    }
    let measures = partition.uniform_cell_measures()?;
    let mut exceptional_sorted = exceptional.to_vec();
    exceptional_sorted.sort_unstable();
    exceptional_sorted.dedup();
    let exceptional_mass = exceptional_sorted.iter().map(|&j| measures[j]).sum();
    Ok(PiecewiseTarget {
        target: Target::Piecewise {
            partition: partition.clone(),
            pieces,
        },
        exceptional: exceptional_sorted,
        exceptional_mass,
        truncation_sup_error: worst_tail,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Uniform { domain: BoxDomain },
}

impl Marginal {
    pub fn domain(&self) -> &BoxDomain {
        match self {
            Marginal::Uniform { domain } => domain,
        }
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Points {
        let domain = self.domain();
        let d = domain.dim();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            for k in 0..d {
                let (a, b) = (domain.lo()[k], domain.hi()[k]);
                data.push(a + (b - a) * rng.random::<f64>());
            }
        }
        Points::new(d, data).expect("dimension is positive")
    }
}

/// Additive noise. Gaussian noise with scale `σ` satisfies the Bernstein
/// moment condition with `M = σ`; uniform noise on `[−M, M]` is bounded by `M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    Gaussian { sigma: f64 },
    UniformBounded { bound: f64 },
}

impl NoiseModel {
    fn validate(&self) -> Result<()> {
        let v = match self {
            NoiseModel::Gaussian { sigma } => *sigma,
            NoiseModel::UniformBounded { bound } => *bound,
        };
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::contract(format!(
                "noise scale must be nonnegative, got {v}"
            )));
        }
        Ok(())
    }

    /// Bernstein parameters `(σ, M)`.
    pub fn bernstein(&self) -> (f64, f64) {
        match self {
            NoiseModel::Gaussian { sigma } => (*sigma, *sigma),
            NoiseModel::UniformBounded { bound } => (*bound / 3f64.sqrt(), *bound),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularity {
    Uniform {
        r: f64,
        radius: f64,
    },
    Split {
        r_low: f64,
        r_high: f64,
        radius_low: f64,
        radius_high: f64,
        exceptional: Vec<usize>,
        exceptional_mass: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub marginal: Marginal,
    pub target: Target,
    pub regularity: Regularity,
    pub noise: NoiseModel,
    /// Kernel whose spectrum defines the regularity.
    pub kernel: KernelSpec,
    pub gamma: f64,
    pub truncation_sup_error: f64,
}

impl SyntheticTask {
    /// Smooth task on `[0, 1]` with the Brownian kernel (capacity ½).
    pub fn sobolev(r: f64, radius: f64, k_trunc: usize, noise: NoiseModel) -> Result<Self> {
        let built = make_sobolev_target(r, radius, k_trunc)?;
        let task = Self {
            marginal: Marginal::Uniform {
                domain: BoxDomain::unit(1),
            },
            target: built.target,
            regularity: Regularity::Uniform { r, radius },
            noise,
            kernel: KernelSpec::brownian(),
            gamma: 0.5,
            truncation_sup_error: built.truncation_sup_error,
        };
        task.validate()?;
        Ok(task)
    }

    /// Cell-wise task on `[0, 1]` with an exceptional set of rough cells.
    #[allow(clippy::too_many_arguments)]
    pub fn piecewise(
        r_low: f64,
        r_high: f64,
        radius_low: f64,
        radius_high: f64,
        partition: &Partition,
        exceptional: &[usize],
        k_trunc: usize,
        noise: NoiseModel,
    ) -> Result<Self> {
        if partition.domain() != &BoxDomain::unit(1) {
            return Err(Error::contract("piecewise tasks live on [0, 1]"));
        }
        let built = make_piecewise_target(
            r_low,
            r_high,
            radius_low,
            radius_high,
            partition,
            exceptional,
            k_trunc,
        )?;
        let task = Self {
            marginal: Marginal::Uniform {
                domain: BoxDomain::unit(1),
            },
            target: built.target,
            regularity: Regularity::Split {
                r_low,
                r_high,
                radius_low,
                radius_high,
                exceptional: built.exceptional,
                exceptional_mass: built.exceptional_mass,
            },
            noise,
            kernel: KernelSpec::brownian(),
            gamma: 0.5,
            truncation_sup_error: built.truncation_sup_error,
        };
        task.validate()?;
        Ok(task)
    }

    /// Re-checks the regularity of every expansion to relative precision 1e-10.
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        let close = |got: f64, want: f64| (got - want).abs() <= 1e-10 * want.max(f64::MIN_POSITIVE);
        match (&self.target, &self.regularity) {
            (Target::Sobolev { expansion }, Regularity::Uniform { r, radius }) => {
                let norm = expansion.source_norm(*r);
                if !close(norm, *radius) {
                    return Err(Error::contract(format!(
                        "target regularity norm {norm} differs from radius {radius}"
                    )));
                }
            }
            (
                Target::Piecewise { partition, pieces },
                Regularity::Split {
                    r_low,
                    r_high,
                    radius_low,
                    radius_high,
                    exceptional,
                    ..
                },
            ) => {
                if pieces.len() != partition.num_cells() {
                    return Err(Error::contract("one piece per cell is required"));
                }
                for (j, piece) in pieces.iter().enumerate() {
                    let (r, radius) = if exceptional.contains(&j) {
                        (*r_low, *radius_low)
                    } else {
                        (*r_high, *radius_high)
                    };
                    let norm = piece.source_norm(r);
                    if !close(norm, radius) {
                        return Err(Error::contract(format!(
                            "cell {j}: regularity norm {norm} differs from radius {radius}"
                        )));
                    }
                }
            }
            _ => {
                return Err(Error::contract(
                    "target and regularity descriptions disagree",
                ))
            }
        }
        Ok(())
    }

    pub fn f_rho(&self, x: &[f64]) -> Result<f64> {
        self.target.eval(x)
    }

    /// Smoothness that governs the task away from the exceptional set.
    pub fn smoothness(&self) -> f64 {
        match &self.regularity {
            Regularity::Uniform { r, .. } => *r,
            Regularity::Split { r_high, .. } => *r_high,
        }
    }
}

pub fn gen_inputs(task: &SyntheticTask, n: usize, seed: u64) -> Points {
    task.marginal.sample(n, &mut rng_from(seed))
}

/// `y_i = f(x_i) + ε_i`.
pub fn sample_labels(task: &SyntheticTask, xs: &Points, seed: u64) -> Result<Vec<f64>> {
    let mut rng = rng_from(seed);
    let mut y = Vec::with_capacity(xs.len());
    match task.noise {
        NoiseModel::Gaussian { sigma } => {
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::contract(e.to_string()))?;
            for x in xs.iter() {
                let eps = normal.sample(&mut rng);
                y.push(task.f_rho(x)? + eps);
            }
        }
        NoiseModel::UniformBounded { bound } => {
            for x in xs.iter() {
                let eps = if bound > 0.0 {
                    rng.random_range(-bound..=bound)
                } else {
                    0.0
                };
                y.push(task.f_rho(x)? + eps);
            }
        }
    }
    Ok(y)
}

/// Mean squared deviation from the target over a given test sample.
pub fn mise_on_sample<P: Predictor + ?Sized>(
    predictor: &P,
    task: &SyntheticTask,
    test: &Points,
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::contract("at least one test point is required"));
    }
    let predictions = predictor.predict_many(test)?;
    let mut sum = 0.0;
    for (x, p) in test.iter().zip(predictions) {
        let d = p - task.f_rho(x)?;
        sum += d * d;
    }
    Ok(sum / test.len() as f64)
}

/// Monte Carlo estimate of `‖f̂ − f_ρ‖²` in `L²(ν)` from `n_test` fresh draws.
pub fn mise_estimate<P: Predictor + ?Sized>(
    predictor: &P,
    task: &SyntheticTask,
    n_test: usize,
    seed: u64,
) -> Result<f64> {
    if n_test == 0 {
        return Err(Error::contract("n_test must be positive"));
    }
    mise_on_sample(predictor, task, &gen_inputs(task, n_test, seed))
}

/// Global test error and its split into `Σ_j (n'_j / n_test) · MSE_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellDecomposition {
    pub global: f64,
    pub per_cell: Vec<f64>,
    pub weights: Vec<f64>,
    pub recombined: f64,
}

pub fn cell_decomposition<P: Predictor + ?Sized>(
    predictor: &P,
    task: &SyntheticTask,
    partition: &Partition,
    test: &Points,
) -> Result<CellDecomposition> {
    let global = mise_on_sample(predictor, task, test)?;
    let m = partition.num_cells();
    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for x in test.iter() {
        let j = partition.assign(x)?;
        let d = predictor.predict(x)? - task.f_rho(x)?;
        sums[j] += d * d;
        counts[j] += 1;
    }
    let n = test.len() as f64;
    let per_cell: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let recombined = per_cell.iter().zip(&weights).map(|(e, w)| e * w).sum();
    Ok(CellDecomposition {
        global,
        per_cell,
        weights,
        recombined,
    })
}

/// Small-exceptional-set condition `ν(E) ≤ (R_h/R_l)² λ^{2(r_h − r_l)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalMassCheck {
    pub mass: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn exceptional_mass_check(task: &SyntheticTask, lambda: f64) -> Result<ExceptionalMassCheck> {
    match &task.regularity {
        Regularity::Split {
            r_low,
            r_high,
            radius_low,
            radius_high,
            exceptional_mass,
            ..
        } => {
            let bound = (radius_high / radius_low).powi(2) * lambda.powf(2.0 * (r_high - r_low));
            Ok(ExceptionalMassCheck {
                mass: *exceptional_mass,
                bound,
                holds: *exceptional_mass <= bound,
            })
        }
        Regularity::Uniform { .. } => Err(Error::contract("task has no exceptional set")),
    }
}
