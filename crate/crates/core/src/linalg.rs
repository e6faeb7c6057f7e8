//! Small dense helpers bridging `ndarray` storage and `faer`
//! decompositions.

use faer::prelude::Solve;
use faer::{Mat, MatRef, Side};
use ndarray::Array2;

use crate::error::{Error, Result};

pub(crate) fn to_faer(a: &Array2<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_faer(m: MatRef<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Thin SVD `a = u * diag(s) * vt`, singular values non-increasing.
pub fn svd(a: &Array2<f64>) -> Result<(Array2<f64>, Vec<f64>, Array2<f64>)> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::SvdFailed);
    }
    let f = to_faer(a).thin_svd().map_err(|_| Error::SvdFailed)?;
    let s = f.S().column_vector().iter().copied().collect();
    Ok((from_faer(f.U()), s, from_faer(f.V().transpose())))
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub(crate) fn solve_spd(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let chol = to_faer(a).llt(Side::Lower).map_err(|_| Error::Singular)?;
    let x = chol.solve(to_faer(b));
    if x.col_iter().any(|c| c.iter().any(|v| !v.is_finite())) {
        return Err(Error::Singular);
    }
    Ok(from_faer(x.as_ref()))
}

/// Orthogonal factor of the QR decomposition of a square matrix, with
/// columns flipped so that `R` has a non-negative diagonal.
pub(crate) fn qr_orthogonal(a: &Array2<f64>) -> Array2<f64> {
    let qr = to_faer(a).qr();
    let r = qr.R();
    let mut q = from_faer(qr.compute_Q().as_ref());
    for j in 0..q.ncols().min(r.nrows()) {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).mapv_inplace(|v| -v);
        }
    }
    q
}

/// Largest absolute entry of `a^T a - I`.
pub fn orthogonality_error(a: &Array2<f64>) -> f64 {
    let g = a.t().dot(a);
    let mut worst = 0.0f64;
    for ((i, j), v) in g.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        worst = worst.max((v - target).abs());
    }
    worst
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &Array2<f64>) -> Result<f64> {
    let (_, s, _) = svd(a)?;
    Ok(s.into_iter().fold(0.0, f64::max))
}

pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn svd_reconstructs() {
        let a = array![[1., 2., 3.], [6., 4., 5.], [8., 9., 7.]];
        let (u, s, vt) = svd(&a).unwrap();
        let back = u.dot(&Array2::from_diag(&ndarray::Array1::from(s))).dot(&vt);
        assert!(frobenius(&(back - &a)) < 1e-12);
    }

    #[test]
    fn spd_solve() {
        let a = array![[4.0, 1.0], [1.0, 3.0]];
        let b = array![[1.0], [2.0]];
        let x = solve_spd(&a, &b).unwrap();
        assert!(frobenius(&(a.dot(&x) - &b)) < 1e-12);
        assert!(matches!(solve_spd(&array![[0.0, 0.0], [0.0, 0.0]], &b), Err(Error::Singular)));
    }
}
