//! Thin bridge between `ndarray` containers and `faer` kernels.

use faer::Mat;
use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

pub(crate) fn to_faer(a: ArrayView2<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Symmetric eigendecomposition, eigenvalues ascending.
pub(crate) fn eigh_ascending(a: ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let m = to_faer(a);
    let evd = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| Error::EigenFailed)?;
    let n = a.nrows();
    let values = Array1::from_shape_fn(n, |i| evd.S()[i]);
    let vectors = Array2::from_shape_fn((n, n), |(i, j)| evd.U()[(i, j)]);
    Ok((values, vectors))
}

/// `a * b` through faer's gemm; worthwhile for the larger products.
pub(crate) fn mat_mul(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions must agree");
    let fa = to_faer(a);
    let fb = to_faer(b);
    let fc = &fa * &fb;
    Array2::from_shape_fn((a.nrows(), b.ncols()), |(i, j)| fc[(i, j)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigh_diagonal() {
        let a = array![[3.0, 0.0], [0.0, 1.0]];
        let (vals, _) = eigh_ascending(a.view()).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn mat_mul_matches_ndarray_dot() {
        let a = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let b = array![[1.0, 0.5], [2.0, -1.0]];
        let fast = mat_mul(a.view(), b.view());
        let reference = a.dot(&b);
        assert_eq!(fast, reference);
    }
}
