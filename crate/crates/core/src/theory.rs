//! Parameter schedules, effective dimension and related diagnostics.
//!
//! Schedules use unit constants. Experiments multiply the returned `λ` by a
//! calibrated constant held fixed across the whole `n` grid, which leaves
//! fitted slopes unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram_unchecked, GramMatrix, KernelSpec};
use crate::linalg::eigvalsh;
use crate::partition::{split_dataset, Partition};
use crate::points::Points;

/// Regularity and noise parameters of a learning problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ModelParams {
    /// Smoothness in `(0, 1/2]`.
    pub r: f64,
    /// Capacity exponent in `(0, 1]`.
    pub gamma: f64,
    /// Source-condition radius.
    pub radius: f64,
    pub sigma: f64,
    /// Noise moment bound.
    pub noise_bound: f64,
    /// `(r_l, r_h)` for problems with a low-smoothness exceptional set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_smoothness: Option<(f64, f64)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    r: f64,
    gamma: f64,
    radius: f64,
    sigma: f64,
    noise_bound: f64,
    #[serde(default)]
    split_smoothness: Option<(f64, f64)>,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        let p = ModelParams {
            r: raw.r,
            gamma: raw.gamma,
            radius: raw.radius,
            sigma: raw.sigma,
            noise_bound: raw.noise_bound,
            split_smoothness: raw.split_smoothness,
        };
        p.validate()?;
        Ok(p)
    }
}

fn valid_smoothness(r: f64) -> bool {
    r > 0.0 && r <= 0.5
}

impl ModelParams {
    pub fn new(r: f64, gamma: f64, radius: f64, sigma: f64, noise_bound: f64) -> Result<Self> {
        let p = Self {
            r,
            gamma,
            radius,
            sigma,
            noise_bound,
            split_smoothness: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Unit radius and noise scales; only `r` and `gamma` matter for schedules.
    pub fn shape(r: f64, gamma: f64) -> Result<Self> {
        Self::new(r, gamma, 1.0, 1.0, 1.0)
    }

    pub fn with_split_smoothness(mut self, r_low: f64, r_high: f64) -> Result<Self> {
        self.split_smoothness = Some((r_low, r_high));
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !valid_smoothness(self.r) {
            return Err(Error::contract(format!(
                "r must lie in (0, 1/2], got {}",
                self.r
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::contract(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        for (name, v) in [
            ("radius", self.radius),
            ("sigma", self.sigma),
            ("noise_bound", self.noise_bound),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::contract(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some((lo, hi)) = self.split_smoothness {
            if !(valid_smoothness(lo) && valid_smoothness(hi) && lo <= hi) {
                return Err(Error::contract(format!(
                    "need 0 < r_l <= r_h <= 1/2, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }

    fn with_r(&self, r: f64) -> Self {
        Self {
            r,
            split_smoothness: None,
            ..self.clone()
        }
    }

    /// Parameters with `r` replaced by `r_h`.
    pub fn high_smoothness(&self) -> Result<Self> {
        self.split_smoothness
            .map(|(_, hi)| self.with_r(hi))
            .ok_or_else(|| Error::contract("no split smoothness configured"))
    }

    /// Parameters with `r` replaced by `r_l`.
    pub fn low_smoothness(&self) -> Result<Self> {
        self.split_smoothness
            .map(|(lo, _)| self.with_r(lo))
            .ok_or_else(|| Error::contract("no split smoothness configured"))
    }

    fn denominator(&self) -> f64 {
        2.0 * self.r + 1.0 + self.gamma
    }
}

/// `n^e` through base 2, which is exact whenever `log2(n)·e` is an integer.
fn power(n: f64, e: f64) -> f64 {
    (n.log2() * e).exp2()
}

/// `n^e` where results within a few ulps of an integer are snapped to it, so
/// that exact powers such as `1024^0.4 = 16` survive `floor` and `ceil`.
fn snapped_power(n: f64, e: f64) -> f64 {
    let v = power(n, e);
    let nearest = v.round();
    if (v - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        v
    }
}

/// `λ_n = min(1, n^{-1/(2r+1+γ)})`.
pub fn lambda_schedule(n: usize, params: &ModelParams) -> f64 {
    let n = n.max(1) as f64;
    power(n, -1.0 / params.denominator()).min(1.0)
}

/// `min(1, (σ² / (R² n))^{1/(2r+1+γ)})`.
pub fn noise_adjusted_lambda_schedule(n: usize, params: &ModelParams) -> f64 {
    let ratio = params.sigma * params.sigma / (params.radius * params.radius * n.max(1) as f64);
    power(ratio, 1.0 / params.denominator()).min(1.0)
}

/// Number of cells `⌊n^{2r/(2r+1+γ)}⌋`, at least one.
pub fn m_schedule(n: usize, params: &ModelParams) -> usize {
    let v = snapped_power(n.max(1) as f64, 2.0 * params.r / params.denominator());
    (v.floor() as usize).max(1)
}

/// Number of landmarks `⌈n^{(1+γ)/(2r+1+γ)}⌉`.
pub fn l_schedule(n: usize, params: &ModelParams) -> usize {
    let v = snapped_power(n.max(1) as f64, (1.0 + params.gamma) / params.denominator());
    (v.ceil() as usize).max(1)
}

/// Predicted decay exponent of the mean squared error, `(2r+1)/(2r+1+γ)`.
pub fn rate_exponent(params: &ModelParams) -> f64 {
    (2.0 * params.r + 1.0) / params.denominator()
}

/// `Σ_i μ_i / (μ_i + λ)`; negative round-off eigenvalues count as zero.
pub fn effective_dimension_from_spectrum(spectrum: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::contract(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(spectrum
        .iter()
        .map(|&mu| {
            let mu = mu.max(0.0);
            mu / (mu + lambda)
        })
        .sum())
}

/// Empirical effective dimension with `μ_i` the eigenvalues of `c·K/n`, where
/// `c = 1/κ²` if `normalize_kappa` is set and `c = 1` otherwise.
pub fn effective_dimension(
    k: &GramMatrix,
    lambda: f64,
    normalize_kappa: bool,
    kappa_sq: f64,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::contract(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let scale = if normalize_kappa {
        if !(kappa_sq > 0.0) {
            return Err(Error::contract("kappa² must be positive"));
        }
        1.0 / kappa_sq
    } else {
        1.0
    };
    let n = k.size() as f64;
    let spectrum: Vec<f64> = eigvalsh(k.entries())?
        .into_iter()
        .map(|v| scale * v / n)
        .collect();
    effective_dimension_from_spectrum(&spectrum, lambda)
}

/// `1 + (2/(nλ) + √(N/(nλ)))²`.
pub fn b_quantity(n: usize, lambda: f64, eff_dim: f64) -> f64 {
    let nl = n as f64 * lambda;
    let t = 2.0 / nl + (eff_dim / nl).sqrt();
    1.0 + t * t
}

/// Sample size beyond which the localized error bound takes effect, rounded up
/// and saturating at `u64::MAX`.
pub fn n0_sufficient(m: usize, params: &ModelParams, p_max: f64, c_gamma: f64) -> u64 {
    let r2 = 2.0 * params.r;
    let g = params.gamma;
    let outer = (r2 + g + 1.0) / r2;
    let ratio = params.radius / params.sigma;
    let first = ratio.powf(2.0 / (r2 + g));
    let second = (p_max * c_gamma).powf(outer) * ratio.powf(2.0 * (g + 1.0) / r2);
    let value = snapped_power(4.0 * m as f64, outer) * first.max(second);
    let snapped = if (value - value.round()).abs() <= 1e-9 * value.round().max(1.0) {
        value.round()
    } else {
        value.ceil()
    };
    if snapped >= u64::MAX as f64 {
        u64::MAX
    } else {
        snapped as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Compares `Σ_j N(T_j, p_j λ)` with `N(T, λ)`, where the spectrum of `T` is
/// the union over cells of `{μ / p_j}`.
pub fn effective_dimension_sum_check(
    local_spectra: &[Vec<f64>],
    p: &[f64],
    lambda: f64,
) -> Result<SumCheck> {
    if local_spectra.len() != p.len() || p.is_empty() {
        return Err(Error::contract("one weight per local spectrum is required"));
    }
    if p.iter().any(|&w| !(w > 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::contract("weights must be positive and sum to one"));
    }
    let mut lhs = 0.0;
    let mut union = Vec::new();
    for (spectrum, &pj) in local_spectra.iter().zip(p) {
        lhs += effective_dimension_from_spectrum(spectrum, pj * lambda)?;
        union.extend(spectrum.iter().map(|mu| mu / pj));
    }
    let rhs = effective_dimension_from_spectrum(&union, lambda)?;
    Ok(SumCheck {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

/// Plug-in comparison of `m Σ_j p̂_j N̂(T̂_j, λ)` against `N̂(T̂, mλ)`.
///
/// This is a descriptive statistic on one sample. It does not certify the
/// population-level compatibility of local and global capacities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityDiagnostic {
    pub local_side: f64,
    pub global_side: f64,
    pub ratio: f64,
}

pub fn local_capacity_diagnostic(
    xs: &Points,
    partition: &Partition,
    global_spec: &KernelSpec,
    local_specs: &[KernelSpec],
    lambda: f64,
) -> Result<CapacityDiagnostic> {
    if local_specs.len() != partition.num_cells() {
        return Err(Error::contract("one local kernel per cell is required"));
    }
    global_spec.check_points(xs)?;
    let zeros = vec![0.0; xs.len()];
    let split = split_dataset(partition, xs, &zeros)?;
    let m = partition.num_cells() as f64;
    let mut local_side = 0.0;
    for (j, cell) in split.cells.iter().enumerate() {
        if cell.xs.is_empty() {
            continue;
        }
        local_specs[j].check_points(&cell.xs)?;
        let nj = cell.xs.len() as f64;
        let spectrum: Vec<f64> = eigvalsh(&gram_unchecked(&local_specs[j], &cell.xs))?
            .into_iter()
            .map(|v| v / nj)
            .collect();
        local_side +=
            split.stats.weights[j] * effective_dimension_from_spectrum(&spectrum, lambda)?;
    }
    local_side *= m;
    let n = xs.len() as f64;
    let spectrum: Vec<f64> = eigvalsh(&gram_unchecked(global_spec, xs))?
        .into_iter()
        .map(|v| v / n)
        .collect();
    let global_side = effective_dimension_from_spectrum(&spectrum, m * lambda)?;
    Ok(CapacityDiagnostic {
        local_side,
        global_side,
        ratio: local_side / global_side,
    })
}
