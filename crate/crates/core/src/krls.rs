//! Exact global kernel regularized least squares.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram_unchecked, KernelSpec};
use crate::linalg::spd_solve_owned;
use crate::points::Points;

/// Anything that maps a point to a real prediction.
pub trait Predictor: Sync {
    fn predict(&self, x: &[f64]) -> Result<f64>;

    fn predict_many(&self, xs: &Points) -> Result<Vec<f64>> {
        let rows: Vec<&[f64]> = xs.iter().collect();
        rows.into_par_iter().map(|x| self.predict(x)).collect()
    }
}

impl<F> Predictor for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self(x))
    }
}

/// Fitted dual representation `f(x) = Σ_j α_j K(x_j, x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrlsModel {
    pub inputs: Points,
    pub alpha: Vec<f64>,
    pub lambda: f64,
    pub kernel: KernelSpec,
}

impl KrlsModel {
    /// Expansion over `centers` with zero coefficients.
    pub fn zero(centers: Points, lambda: f64, kernel: KernelSpec) -> Self {
        let alpha = vec![0.0; centers.len()];
        Self {
            inputs: centers,
            alpha,
            lambda,
            kernel,
        }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        expansion_value(&self.kernel, &self.inputs, &self.alpha, x)
    }
}

impl Predictor for KrlsModel {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        self.kernel.check_point(x)?;
        Ok(self.predict_unchecked(x))
    }
}

pub(crate) fn expansion_value(
    kernel: &KernelSpec,
    centers: &Points,
    alpha: &[f64],
    x: &[f64],
) -> f64 {
    centers
        .iter()
        .zip(alpha)
        .map(|(c, a)| a * kernel.eval_unchecked(c, x))
        .sum()
}

pub(crate) fn check_training_set(
    xs: &Points,
    y: &[f64],
    lambda: f64,
    spec: &KernelSpec,
) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("training inputs"));
    }
    if xs.len() != y.len() {
        return Err(Error::contract(format!(
            "{} inputs but {} labels",
            xs.len(),
            y.len()
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::contract(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("labels must be finite"));
    }
    spec.check_points(xs)
}

/// Solves `(K + λ n I) α = y` and returns the fitted model.
pub fn fit_krls(xs: &Points, y: &[f64], lambda: f64, spec: &KernelSpec) -> Result<KrlsModel> {
    check_training_set(xs, y, lambda, spec)?;
    let n = xs.len();
    let k = gram_unchecked(spec, xs);
    let rhs = Mat::from_fn(n, 1, |i, _| y[i]);
    let alpha = spd_solve_owned(k, lambda * n as f64, &rhs)?;
    Ok(KrlsModel {
        inputs: xs.clone(),
        alpha: alpha.col_as_slice(0).to_vec(),
        lambda,
        kernel: spec.clone(),
    })
}

/// `(1/n) Σ (f(x_i) − y_i)² + λ ‖f‖²_H` for `f = Σ_j α_j K(c_j, ·)`.
pub fn regularized_objective(
    spec: &KernelSpec,
    centers: &Points,
    alpha: &[f64],
    xs: &Points,
    y: &[f64],
    lambda: f64,
) -> Result<f64> {
    if centers.len() != alpha.len() || xs.len() != y.len() {
        return Err(Error::contract(
            "objective arguments have mismatched lengths",
        ));
    }
    if xs.is_empty() {
        return Err(Error::EmptyInput("objective sample"));
    }
    spec.check_points(centers)?;
    spec.check_points(xs)?;
    let risk = xs
        .iter()
        .zip(y)
        .map(|(x, yi)| {
            let r = expansion_value(spec, centers, alpha, x) - yi;
            r * r
        })
        .sum::<f64>()
        / xs.len() as f64;
    let mut norm_sq = 0.0;
    for (ci, ai) in centers.iter().zip(alpha) {
        for (cj, aj) in centers.iter().zip(alpha) {
            norm_sq += ai * aj * spec.eval_unchecked(ci, cj);
        }
    }
    Ok(risk + lambda * norm_sq)
}
