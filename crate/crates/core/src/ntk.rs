//! Kernel ridge regression with the infinite-width neural tangent kernel of a bias-free
//! two-layer ReLU network (both layers trained):
//!
//! ```text
//! K(x, x') = |x| |x'| (u k0(u) + k1(u)),   u = cos(x, x')
//! k0(u) = (pi - arccos u) / pi
//! k1(u) = (sqrt(1 - u^2) + u (pi - arccos u)) / pi
//! ```

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};

/// Kernel value for a pair of inputs. Zero if either input is zero.
pub fn ntk_value(x: DVectorView<'_, f64>, x2: DVectorView<'_, f64>) -> f64 {
    let nx = x.norm();
    let nx2 = x2.norm();
    if nx == 0.0 || nx2 == 0.0 {
        return 0.0;
    }
    let u = (x.dot(&x2) / (nx * nx2)).clamp(-1.0, 1.0);
    let angle_gap = PI - u.acos();
    let k0 = angle_gap / PI;
    let k1 = ((1.0 - u * u).max(0.0).sqrt() + u * angle_gap) / PI;
    nx * nx2 * (u * k0 + k1)
}

/// Convenience wrapper over slices.
pub fn ntk_value_slices(x: &[f64], x2: &[f64]) -> f64 {
    ntk_value(
        DVectorView::from_slice(x, x.len()),
        DVectorView::from_slice(x2, x2.len()),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub k: DMatrix<f64>,
    /// Diagonal jitter that had to be added for the last successful factorization.
    pub jitter: f64,
}

impl KernelMatrix {
    pub fn n(&self) -> usize {
        self.k.nrows()
    }
}

fn row(x: &DMatrix<f64>, i: usize) -> DVector<f64> {
    x.row(i).transpose()
}

/// Pairwise kernel on the rows of `x`. The upper triangle is computed and mirrored.
pub fn gram(x: &DMatrix<f64>) -> KernelMatrix {
    let n = x.nrows();
    let rows: Vec<DVector<f64>> = (0..n).map(|i| row(x, i)).collect();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = ntk_value(rows[i].as_view(), rows[j].as_view());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    KernelMatrix { k, jitter: 0.0 }
}

/// `K(a_i, b_j)` for rows of `a` against rows of `b`.
pub fn cross_gram(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::mismatch(b.ncols(), a.ncols()));
    }
    let b_rows: Vec<DVector<f64>> = (0..b.nrows()).map(|j| row(b, j)).collect();
    let mut out = DMatrix::zeros(a.nrows(), b.nrows());
    for i in 0..a.nrows() {
        let ai = row(a, i);
        for (j, bj) in b_rows.iter().enumerate() {
            out[(i, j)] = ntk_value(ai.as_view(), bj.as_view());
        }
    }
    Ok(out)
}

/// Dual coefficients of `(K + lambda n I) alpha = y`.
///
/// If the Cholesky factorization fails, diagonal jitter is escalated from
/// `1e-12 * trace/n` by factors of 10 up to `1e-6 * trace/n`.
pub fn krr_fit(kernel: &mut KernelMatrix, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let n = kernel.n();
    if y.len() != n {
        return Err(Error::mismatch(n, y.len()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("ridge weight must be finite and >= 0, got {lambda}")));
    }
    let ridge = lambda * n as f64;
    let base = &kernel.k + DMatrix::identity(n, n) * ridge;
    if let Some(chol) = base.clone().cholesky() {
        kernel.jitter = 0.0;
        return Ok(chol.solve(y));
    }
    let scale = (kernel.k.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
    let max_jitter = 1e-6 * scale;
    let mut jitter = 1e-12 * scale;
    while jitter <= max_jitter * (1.0 + 1e-9) {
        if let Some(chol) = (&base + DMatrix::identity(n, n) * jitter).cholesky() {
            kernel.jitter = jitter;
            return Ok(chol.solve(y));
        }
        jitter *= 10.0;
    }
    Err(Error::SingularSystem { jitter: max_jitter })
}

/// `K(X_test, X_train) alpha`.
pub fn krr_predict(
    alpha: &DVector<f64>,
    x_train: &DMatrix<f64>,
    x_test: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    if alpha.len() != x_train.nrows() {
        return Err(Error::mismatch(x_train.nrows(), alpha.len()));
    }
    Ok(cross_gram(x_test, x_train)? * alpha)
}
