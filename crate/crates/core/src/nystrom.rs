//! Plain Nyström KRLS: uniform landmarks without replacement and the reduced
//! dual system solved by a truncated pseudo-inverse.

use faer::Mat;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{cross_gram_unchecked, gram_unchecked, KernelSpec};
use crate::krls::{check_training_set, expansion_value, Predictor};
use crate::linalg::pinv_solve;
use crate::points::Points;
use crate::seeding::rng_from;

/// `l` distinct indices drawn uniformly from `0..n`, returned sorted.
pub fn sample_landmarks(n: usize, l: usize, seed: u64) -> Result<Vec<usize>> {
    if l == 0 {
        return Err(Error::contract("at least one landmark is required"));
    }
    if l > n {
        return Err(Error::contract(format!(
            "cannot draw {l} landmarks from {n} points"
        )));
    }
    let mut rng = rng_from(seed);
    let mut picked = index::sample(&mut rng, n, l).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NystromModel {
    pub landmarks: Points,
    /// Positions of the landmarks in the training set of the fit call.
    pub landmark_indices: Vec<usize>,
    pub alpha: Vec<f64>,
    pub lambda: f64,
    pub kernel: KernelSpec,
    pub seed: u64,
}

impl NystromModel {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        expansion_value(&self.kernel, &self.landmarks, &self.alpha, x)
    }
}

impl Predictor for NystromModel {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        self.kernel.check_point(x)?;
        Ok(self.predict_unchecked(x))
    }
}

/// Solves `(K_nlᵀ K_nl + nλ K_ll) α = K_nlᵀ y` over `l` uniform landmarks.
///
/// The eigenvalue cut-off of the pseudo-inverse is `l · ε_machine` relative
/// to the largest eigenvalue.
pub fn fit_nystrom(
    xs: &Points,
    y: &[f64],
    lambda: f64,
    l: usize,
    seed: u64,
    spec: &KernelSpec,
) -> Result<NystromModel> {
    check_training_set(xs, y, lambda, spec)?;
    let n = xs.len();
    let landmark_indices = sample_landmarks(n, l, seed)?;
    let landmarks = xs.select(&landmark_indices);

    let k_nl = cross_gram_unchecked(spec, xs, &landmarks);
    let k_ll = gram_unchecked(spec, &landmarks);
    let mut system = k_nl.transpose() * &k_nl;
    let scale = n as f64 * lambda;
    for j in 0..l {
        for i in 0..=j {
            let v = 0.5 * (system[(i, j)] + system[(j, i)]) + scale * k_ll[(i, j)];
            system[(i, j)] = v;
            system[(j, i)] = v;
        }
    }
    let y_col = Mat::from_fn(n, 1, |i, _| y[i]);
    let rhs = k_nl.transpose() * &y_col;
    let alpha = pinv_solve(&system, &rhs, l as f64 * f64::EPSILON)?;

    Ok(NystromModel {
        landmarks,
        landmark_indices,
        alpha: alpha.col_as_slice(0).to_vec(),
        lambda,
        kernel: spec.clone(),
        seed,
    })
}
