//! Closed-form ridge and soft-threshold estimators in principal-component
//! coordinates, path threshold statistics, prediction through the
//! cross-kernel, and an independent coordinate-descent solver used to verify
//! the soft-threshold form.

use ndarray::{Array1, Array2, ArrayView2};

use crate::data::Scaler;
use crate::error::{Error, Result};
use crate::kernel::{center_cross, cross_gram, KernelConfig};
use crate::spectral::{GramSpectrum, PCScores};

/// Penalty flavour. Ridge keeps every component shrunk; lasso soft-thresholds
/// them to exact zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Penalty {
    Ridge,
    Lasso,
}

impl Penalty {
    /// Method label used in reports and model files.
    pub fn method_name(&self) -> &'static str {
        match self {
            Penalty::Ridge => "pchar",
            Penalty::Lasso => "pchal",
        }
    }

    pub fn parse(s: &str) -> Option<Penalty> {
        match s.to_ascii_lowercase().as_str() {
            "pchar" | "ridge" => Some(Penalty::Ridge),
            "pchal" | "lasso" => Some(Penalty::Lasso),
            _ => None,
        }
    }
}

impl std::fmt::Display for Penalty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.method_name())
    }
}

/// PC-space coefficients at a fixed `(k, lambda)`.
#[derive(Debug, Clone)]
pub struct Coefs {
    pub beta: Array1<f64>,
    pub k: usize,
    pub lambda: f64,
    pub kind: Penalty,
}

fn check_rank(k: usize, spectrum: &GramSpectrum) -> Result<()> {
    if k < 1 || k > spectrum.r() {
        return Err(Error::RankOutOfRange {
            k,
            r: spectrum.r(),
        });
    }
    Ok(())
}

fn projections(spectrum: &GramSpectrum, y_centered: &Array1<f64>, k: usize) -> Array1<f64> {
    let u = spectrum.eigenvectors();
    Array1::from_shape_fn(k, |j| u.column(j).dot(y_centered))
}

/// Ridge closed form: `beta_j = sqrt(d_j) (u_j' y) / (d_j + n lambda)`.
///
/// `lambda` multiplies the sample count, matching the `1/(2n)` loss scaling;
/// grids meant for other conventions must be rescaled by the caller.
pub fn fit_pchar(
    spectrum: &GramSpectrum,
    y_centered: &Array1<f64>,
    k: usize,
    lambda: f64,
) -> Result<Coefs> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidPenalty {
            lambda,
            requirement: "ridge needs lambda > 0",
        });
    }
    check_rank(k, spectrum)?;
    let n = y_centered.len() as f64;
    let q = projections(spectrum, y_centered, k);
    let d = spectrum.eigenvalues();
    let beta = Array1::from_shape_fn(k, |j| d[j].sqrt() * q[j] / (d[j] + n * lambda));
    Ok(Coefs {
        beta,
        k,
        lambda,
        kind: Penalty::Ridge,
    })
}

/// Soft-threshold closed form: with `w_j = sqrt(d_j) (u_j' y)`,
/// `beta_j = sign(w_j) (|w_j| - n lambda)_+ / d_j`.
pub fn fit_pchal(
    spectrum: &GramSpectrum,
    y_centered: &Array1<f64>,
    k: usize,
    lambda: f64,
) -> Result<Coefs> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidPenalty {
            lambda,
            requirement: "lasso needs lambda >= 0",
        });
    }
    check_rank(k, spectrum)?;
    let n = y_centered.len() as f64;
    let q = projections(spectrum, y_centered, k);
    let d = spectrum.eigenvalues();
    let beta = Array1::from_shape_fn(k, |j| {
        let w = d[j].sqrt() * q[j];
        let shrunk = w.abs() - n * lambda;
        if shrunk > 0.0 {
            w.signum() * shrunk / d[j]
        } else {
            0.0
        }
    });
    Ok(Coefs {
        beta,
        k,
        lambda,
        kind: Penalty::Lasso,
    })
}

/// Dispatch on the penalty flavour.
pub fn fit_coefs(
    spectrum: &GramSpectrum,
    y_centered: &Array1<f64>,
    k: usize,
    lambda: f64,
    kind: Penalty,
) -> Result<Coefs> {
    match kind {
        Penalty::Ridge => fit_pchar(spectrum, y_centered, k, lambda),
        Penalty::Lasso => fit_pchal(spectrum, y_centered, k, lambda),
    }
}

/// Per-component activation thresholds `W_j = sqrt(d_j) |u_j' y| / n`:
/// component `j` survives the soft threshold at penalty `lambda` exactly when
/// `W_j > lambda`, so the active set along the path is nested in `lambda`.
pub fn path_thresholds(spectrum: &GramSpectrum, y_centered: &Array1<f64>) -> Array1<f64> {
    let n = y_centered.len() as f64;
    let q = projections(spectrum, y_centered, spectrum.r());
    let d = spectrum.eigenvalues();
    Array1::from_shape_fn(spectrum.r(), |j| d[j].sqrt() * q[j].abs() / n)
}

/// Cyclic coordinate descent on `(1/2n) ||y - Z beta||^2 + lambda ||beta||_1`.
///
/// Verification oracle: it never assumes `Z' Z` is diagonal, so agreement
/// with [`fit_pchal`] is an independent check of the closed form.
pub fn cd_lasso_oracle(z: &PCScores, y_centered: &Array1<f64>, lambda: f64) -> Result<Coefs> {
    const TOL: f64 = 1e-12;
    const MAX_SWEEPS: usize = 10_000;

    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidPenalty {
            lambda,
            requirement: "lasso needs lambda >= 0",
        });
    }
    let zm = z.z();
    let n = y_centered.len() as f64;
    let k = zm.ncols();
    let col_norms: Vec<f64> = (0..k).map(|j| zm.column(j).dot(&zm.column(j))).collect();
    let mut beta = Array1::zeros(k);
    let mut residual = y_centered.clone();
    for _sweep in 0..MAX_SWEEPS {
        let mut max_change = 0.0f64;
        for j in 0..k {
            if col_norms[j] == 0.0 {
                continue;
            }
            let col = zm.column(j);
            let c: f64 = col.dot(&residual) + col_norms[j] * beta[j];
            let shrunk = c.abs() - n * lambda;
            let new = if shrunk > 0.0 {
                c.signum() * shrunk / col_norms[j]
            } else {
                0.0
            };
            let delta = new - beta[j];
            if delta != 0.0 {
                for (r, &zij) in residual.iter_mut().zip(col.iter()) {
                    *r -= delta * zij;
                }
                beta[j] = new;
            }
            max_change = max_change.max(delta.abs());
        }
        if max_change < TOL {
            return Ok(Coefs {
                beta,
                k,
                lambda,
                kind: Penalty::Lasso,
            });
        }
    }
    Err(Error::CdNonConvergence { sweeps: MAX_SWEEPS })
}

/// Everything required to predict: the (scaled) training covariates and
/// scaler, the interaction order, the selected `(k, lambda)`, the truncated
/// spectrum, PC coefficients, the response mean, and the uncentered Gram
/// column means for cross-kernel centering.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub kind: Penalty,
    pub m: usize,
    pub k: usize,
    pub lambda: f64,
    pub scaler: Scaler,
    pub x_train: Array2<f64>,
    pub y_mean: f64,
    pub gram_column_means: Array1<f64>,
    pub u_k: Array2<f64>,
    pub d_k: Array1<f64>,
    pub beta: Array1<f64>,
    pub feature_names: Option<Vec<String>>,
}

/// Predictions plus the number of input rows that had to be clamped into the
/// training range.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub values: Array1<f64>,
    pub clamped_rows: usize,
}

impl FittedModel {
    pub fn n_train(&self) -> usize {
        self.x_train.nrows()
    }

    /// Structural consistency: shapes line up and `U_k` is orthonormal.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_train();
        let k = self.k;
        let ok = self.u_k.nrows() == n
            && self.u_k.ncols() == k
            && self.d_k.len() == k
            && self.beta.len() == k
            && self.gram_column_means.len() == n
            && self.x_train.ncols() == self.scaler.d()
            && self.d_k.iter().all(|&d| d > 0.0);
        if !ok {
            return Err(Error::Model("inconsistent model components".into()));
        }
        for a in 0..k {
            for b in 0..=a {
                let dot = self.u_k.column(a).dot(&self.u_k.column(b));
                let expected = if a == b { 1.0 } else { 0.0 };
                if (dot - expected).abs() > 1e-8 {
                    return Err(Error::Model(format!(
                        "principal components not orthonormal (u{a}' u{b} = {dot})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// In-sample fitted values `y_mean + Z_k beta`.
    pub fn fitted_values(&self) -> Array1<f64> {
        let n = self.n_train();
        let mut out = Array1::from_elem(n, self.y_mean);
        for j in 0..self.k {
            let scale = self.d_k[j].sqrt() * self.beta[j];
            for i in 0..n {
                out[i] += scale * self.u_k[[i, j]];
            }
        }
        out
    }

    /// Predict at raw (unscaled) covariates through the cross-kernel path.
    pub fn predict(&self, x_new_raw: ArrayView2<f64>) -> Result<Prediction> {
        if x_new_raw.ncols() != self.scaler.d() {
            return Err(Error::DimensionMismatch {
                context: "prediction covariates".into(),
                expected: self.scaler.d(),
                found: x_new_raw.ncols(),
            });
        }
        let (x_scaled, clamped_rows) = self.scaler.transform_counting(&x_new_raw.to_owned())?;
        let values = self.predict_scaled(x_scaled.view())?;
        Ok(Prediction {
            values,
            clamped_rows,
        })
    }

    /// Predict at covariates already scaled to the unit cube.
    pub fn predict_scaled(&self, x_scaled: ArrayView2<f64>) -> Result<Array1<f64>> {
        let config = KernelConfig::new(self.m);
        let k_cross = cross_gram(x_scaled, self.x_train.view(), &config)?;
        let k_centered = center_cross(&k_cross, &self.gram_column_means)?;
        // alpha = U_k diag(1/sqrt d_j) beta, then yhat = y_mean + K~' alpha
        let n = self.n_train();
        let mut alpha = Array1::zeros(n);
        for j in 0..self.k {
            let scale = self.beta[j] / self.d_k[j].sqrt();
            if scale == 0.0 {
                continue;
            }
            for i in 0..n {
                alpha[i] += scale * self.u_k[[i, j]];
            }
        }
        let mut out = Array1::from_elem(x_scaled.nrows(), self.y_mean);
        for (o, row) in out.iter_mut().zip(k_centered.rows()) {
            *o += row.dot(&alpha);
        }
        Ok(out)
    }
}
