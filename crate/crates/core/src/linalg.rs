//! Dense symmetric solves: shifted Cholesky, truncated pseudo-inverse, and
//! eigendecomposition, all backed by faer.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt;
use faer::{Mat, MatRef, Par, Side};

use crate::error::{Error, Result};

/// Default relative eigenvalue cut-off of [`pinv_solve`].
pub const DEFAULT_PINV_TOL: f64 = 1e-10;

/// Eigenpairs of a symmetric matrix, eigenvalues sorted in descending order.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: Mat<f64>,
}

impl EigenDecomposition {
    /// `V Λ Vᵀ`
    pub fn reconstruct(&self) -> Mat<f64> {
        let v = &self.eigenvectors;
        let scaled = Mat::from_fn(v.nrows(), v.ncols(), |i, k| v[(i, k)] * self.eigenvalues[k]);
        &scaled * v.transpose()
    }
}

pub fn frobenius_norm(a: MatRef<'_, f64>) -> f64 {
    let mut sum = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            sum += a[(i, j)] * a[(i, j)];
        }
    }
    sum.sqrt()
}

fn max_asymmetry(a: &Mat<f64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

fn check_symmetric(a: &Mat<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::contract(format!(
            "expected a square matrix, got {}×{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let asymmetry = max_asymmetry(a);
    if asymmetry > 1e-10 * frobenius_norm(a.as_ref()) {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok(())
}

/// Solves `(A + shift·I) X = B` for symmetric `A`.
pub fn spd_solve(a: &Mat<f64>, shift: f64, b: &Mat<f64>) -> Result<Mat<f64>> {
    spd_solve_owned(a.clone(), shift, b)
}

/// Like [`spd_solve`] but factors `a` in place. Both triangles of `a` must
/// hold the symmetric matrix.
///
/// If the first Cholesky attempt hits a non-positive pivot the diagonal is
/// bumped by `1e-12 · trace(A) / n` and the factorization retried once. The
/// returned solution gets one step of iterative refinement against the
/// unjittered system.
pub fn spd_solve_owned(mut a: Mat<f64>, shift: f64, b: &Mat<f64>) -> Result<Mat<f64>> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::contract("spd_solve needs a nonempty square matrix"));
    }
    if b.nrows() != n {
        return Err(Error::contract(format!(
            "right-hand side has {} rows, system has {n}",
            b.nrows()
        )));
    }
    if !(shift >= 0.0) {
        return Err(Error::contract(format!(
            "shift must be nonnegative, got {shift}"
        )));
    }

    // The factorization overwrites both triangles, so keep the packed upper
    // triangle (column by column, diagonal included) for the retry and the
    // refinement residual.
    let packed = pack_upper(&a);
    let trace: f64 = (0..n).map(|j| packed[packed_diag(j)]).sum();
    for i in 0..n {
        a[(i, i)] += shift;
    }

    let scratch = llt::factor::cholesky_in_place_scratch::<f64>(n, Par::Seq, Default::default());
    let mut mem = MemBuffer::new(scratch);
    let factored = llt::factor::cholesky_in_place(
        a.as_mut(),
        Default::default(),
        Par::Seq,
        MemStack::new(&mut mem),
        Default::default(),
    );

    if factored.is_err() {
        let jitter = 1e-12 * trace / n as f64;
        if !(jitter > 0.0) {
            return Err(Error::IllConditioned { jitter });
        }
        unpack_lower(&packed, &mut a);
        for i in 0..n {
            a[(i, i)] += shift + jitter;
        }
        llt::factor::cholesky_in_place(
            a.as_mut(),
            Default::default(),
            Par::Seq,
            MemStack::new(&mut mem),
            Default::default(),
        )
        .map_err(|_| Error::IllConditioned { jitter })?;
    }

    let mut x = b.clone();
    llt::solve::solve_in_place(a.as_ref(), x.as_mut(), Par::Seq, MemStack::new(&mut mem));

    let mut residual = Mat::<f64>::zeros(n, b.ncols());
    for c in 0..b.ncols() {
        let ax = packed_matvec(&packed, n, shift, x.col_as_slice(c));
        for i in 0..n {
            residual[(i, c)] = b[(i, c)] - ax[i];
        }
    }
    llt::solve::solve_in_place(
        a.as_ref(),
        residual.as_mut(),
        Par::Seq,
        MemStack::new(&mut mem),
    );
    for c in 0..b.ncols() {
        for i in 0..n {
            x[(i, c)] += residual[(i, c)];
        }
    }
    Ok(x)
}

#[inline]
fn packed_start(j: usize) -> usize {
    j * (j + 1) / 2
}

#[inline]
fn packed_diag(j: usize) -> usize {
    packed_start(j) + j
}

fn pack_upper(a: &Mat<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut packed = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        packed.extend_from_slice(&a.col_as_slice(j)[..=j]);
    }
    packed
}

fn unpack_lower(packed: &[f64], a: &mut Mat<f64>) {
    for j in 0..a.nrows() {
        let col = &packed[packed_start(j)..=packed_diag(j)];
        for (i, v) in col.iter().enumerate() {
            a[(j, i)] = *v;
        }
    }
}

/// `(A + shift·I) x` with `A` given by its packed upper triangle.
fn packed_matvec(packed: &[f64], n: usize, shift: f64, x: &[f64]) -> Vec<f64> {
    let mut y: Vec<f64> = x.iter().map(|v| shift * v).collect();
    for j in 0..n {
        let col = &packed[packed_start(j)..=packed_diag(j)];
        let xj = x[j];
        let mut acc = 0.0;
        for (i, aij) in col[..j].iter().enumerate() {
            y[i] += aij * xj;
            acc += aij * x[i];
        }
        y[j] += acc + col[j] * xj;
    }
    y
}

/// `A† B` for symmetric positive semi-definite `A`, discarding eigenvalues
/// below `rel_tol · λ_max`.
pub fn pinv_solve(a: &Mat<f64>, b: &Mat<f64>, rel_tol: f64) -> Result<Mat<f64>> {
    if b.nrows() != a.nrows() {
        return Err(Error::contract(format!(
            "right-hand side has {} rows, system has {}",
            b.nrows(),
            a.nrows()
        )));
    }
    if !(rel_tol >= 0.0) {
        return Err(Error::contract("pinv tolerance must be nonnegative"));
    }
    let eig = eigh(a)?;
    let largest = eig.eigenvalues.first().copied().unwrap_or(0.0);
    let mut x = Mat::<f64>::zeros(a.ncols(), b.ncols());
    if !(largest > 0.0) {
        return Ok(x);
    }
    let cutoff = rel_tol * largest;
    let kept = eig
        .eigenvalues
        .iter()
        .take_while(|&&mu| mu > cutoff)
        .count();
    let v = eig.eigenvectors.subcols(0, kept);
    // Vₖ Λₖ⁻¹ Vₖᵀ B
    let mut coeffs = v.transpose() * b;
    for k in 0..kept {
        let inv = 1.0 / eig.eigenvalues[k];
        for c in 0..b.ncols() {
            coeffs[(k, c)] *= inv;
        }
    }
    x.copy_from(v * &coeffs);
    Ok(x)
}

/// Symmetric eigendecomposition with eigenvalues in descending order.
pub fn eigh(a: &Mat<f64>) -> Result<EigenDecomposition> {
    check_symmetric(a)?;
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigenFailure)?;
    let n = a.nrows();
    let s = evd.S();
    let u = evd.U();
    let eigenvalues: Vec<f64> = (0..n).rev().map(|k| s[k]).collect();
    let eigenvectors = Mat::from_fn(n, n, |i, k| u[(i, n - 1 - k)]);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only, descending.
pub fn eigvalsh(a: &Mat<f64>) -> Result<Vec<f64>> {
    check_symmetric(a)?;
    let mut values = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::EigenFailure)?;
    values.reverse();
    Ok(values)
}
