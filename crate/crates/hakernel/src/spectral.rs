//! Eigendecomposition of the Gram matrix, principal-component scores, and
//! the closed-form discrete sine eigensystem available for totally ordered
//! samples.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::kernel::GramMatrix;
use crate::linalg;

/// Relative eigenvalue cutoff defining the numerical rank. A centered Gram
/// always carries at least one exact zero (the constant direction), and tied
/// covariate values add more.
pub const RANK_REL_TOL: f64 = 1e-10;

/// Maximum tolerated asymmetry before [`eig_sym`] refuses the input.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Leading eigenpairs of a Gram matrix: orthonormal columns `u`, strictly
/// positive eigenvalues `d` in descending order, and the numerical rank `r`.
#[derive(Debug, Clone)]
pub struct GramSpectrum {
    u: Array2<f64>,
    d: Array1<f64>,
    n: usize,
}

impl GramSpectrum {
    pub fn from_parts(u: Array2<f64>, d: Array1<f64>) -> Self {
        let n = u.nrows();
        assert_eq!(u.ncols(), d.len());
        GramSpectrum { u, d, n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Numerical rank: the number of retained eigenpairs.
    pub fn r(&self) -> usize {
        self.d.len()
    }

    /// Eigenvalues, descending and strictly positive.
    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.d
    }

    /// Eigenvectors as columns, aligned with [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.u
    }
}

/// Flip each column so its largest-magnitude entry is positive (first such
/// entry on exact ties). Eigenvector signs are otherwise arbitrary, and
/// serialized models must be byte-stable.
fn fix_column_signs(u: &mut Array2<f64>) {
    for mut col in u.columns_mut() {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for (i, &v) in col.iter().enumerate() {
            let a = v.abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
}

/// Symmetric eigendecomposition of a (centered or uncentered) Gram matrix.
///
/// Eigenvalues come back descending; anything at or below
/// `RANK_REL_TOL * d_1` is dropped, which defines the numerical rank.
pub fn eig_sym(gram: &GramMatrix) -> Result<GramSpectrum> {
    let k = gram.matrix();
    let n = k.nrows();
    if n != k.ncols() {
        return Err(Error::NotSquare {
            rows: n,
            cols: k.ncols(),
        });
    }
    let mut max_asym = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            max_asym = max_asym.max((k[[i, j]] - k[[j, i]]).abs());
        }
    }
    if max_asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric {
            max_asymmetry: max_asym,
        });
    }

    let (values, vectors) = linalg::eigh_ascending(k.view())?;
    // descending order; retain eigenvalues above the rank cutoff
    let d1 = values[n - 1];
    let mut keep: Vec<usize> = Vec::new();
    for idx in (0..n).rev() {
        let v = values[idx];
        if v > 0.0 && v > RANK_REL_TOL * d1 {
            keep.push(idx);
        } else {
            break;
        }
    }
    let r = keep.len();
    let mut u = Array2::zeros((n, r));
    let mut d = Array1::zeros(r);
    for (out, &idx) in keep.iter().enumerate() {
        d[out] = values[idx];
        u.column_mut(out).assign(&vectors.column(idx));
    }
    fix_column_signs(&mut u);
    Ok(GramSpectrum { u, d, n })
}

/// Principal-component scores `Z_k = U_k D_k^{1/2}`.
#[derive(Debug, Clone)]
pub struct PCScores {
    z: Array2<f64>,
}

impl PCScores {
    pub fn z(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn k(&self) -> usize {
        self.z.ncols()
    }
}

pub fn pc_scores(spectrum: &GramSpectrum, k: usize) -> Result<PCScores> {
    if k < 1 || k > spectrum.r() {
        return Err(Error::RankOutOfRange {
            k,
            r: spectrum.r(),
        });
    }
    let mut z = Array2::zeros((spectrum.n(), k));
    for j in 0..k {
        let scale = spectrum.d[j].sqrt();
        for i in 0..spectrum.n() {
            z[[i, j]] = spectrum.u[[i, j]] * scale;
        }
    }
    Ok(PCScores { z })
}

/// Closed-form eigensystem of the uncentered Gram matrix of a totally
/// ordered sample: eigenvectors are discrete sine vectors and eigenvalues are
/// `(2^d - 1) / (4 sin^2((2k-1) pi / (4n+2)))`, descending in `k`.
pub fn sine_eigensystem(n: usize, d: usize) -> GramSpectrum {
    assert!(n >= 1 && d >= 1);
    let scale = (2.0f64).powi(d as i32) - 1.0;
    let norm = (4.0 / (2.0 * n as f64 + 1.0)).sqrt();
    let mut u = Array2::zeros((n, n));
    let mut dvec = Array1::zeros(n);
    for k in 1..=n {
        let theta = (2.0 * k as f64 - 1.0) * std::f64::consts::PI / (2.0 * n as f64 + 1.0);
        // sin^2(theta/2) form: well conditioned near theta -> 0
        let s = (theta / 2.0).sin();
        dvec[k - 1] = scale / (4.0 * s * s);
        for i in 1..=n {
            u[[i - 1, k - 1]] = norm * (i as f64 * theta).sin();
        }
    }
    fix_column_signs(&mut u);
    GramSpectrum {
        u,
        d: dvec,
        n,
    }
}

/// Permutation making every coordinate strictly increasing, if one exists.
/// Strictness matters: ties in any coordinate disqualify the sample.
pub fn total_order_permutation(x: ArrayView2<f64>) -> Option<Vec<usize>> {
    let n = x.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[[a, 0]].partial_cmp(&x[[b, 0]]).expect("finite input"));
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        for j in 0..x.ncols() {
            if x[[a, j]] >= x[[b, j]] {
                return None;
            }
        }
    }
    Some(order)
}
