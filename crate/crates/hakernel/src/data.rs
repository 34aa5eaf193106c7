//! Dataset representation, CSV ingestion, min-max scaling to the unit cube,
//! and deterministic cross-validation fold assignment.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::RngExt;

use crate::error::{Error, Result};
use crate::rng;

/// A regression sample: covariates `x` (n rows, d features) and response `y`.
///
/// Covariates are expected to live in `[0, 1]` once a [`Scaler`] has been
/// applied; construction only enforces shape and finiteness.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array1<f64>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>, feature_names: Option<Vec<String>>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::EmptyTable);
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                context: "dataset response length".into(),
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if let Some(names) = &feature_names {
            if names.len() != x.ncols() {
                return Err(Error::DimensionMismatch {
                    context: "dataset feature names".into(),
                    expected: x.ncols(),
                    found: names.len(),
                });
            }
        }
        for (i, row) in x.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteCell {
                    row: i + 1,
                    column: "<feature>".into(),
                });
            }
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCell {
                row: i + 1,
                column: "<response>".into(),
            });
        }
        Ok(Self {
            x,
            y,
            feature_names,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Rows of `x` and entries of `y` at `indices`, preserving order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let d = self.d();
        let mut x = Array2::zeros((indices.len(), d));
        let mut y = Array1::zeros(indices.len());
        for (out, &i) in indices.iter().enumerate() {
            x.row_mut(out).assign(&self.x.row(i));
            y[out] = self.y[i];
        }
        Dataset {
            x,
            y,
            feature_names: self.feature_names.clone(),
        }
    }
}

/// How the response column of a CSV file is identified.
#[derive(Debug, Clone)]
pub enum ResponseColumn {
    Name(String),
    /// 1-based position among all columns of the file.
    Index(usize),
}

impl ResponseColumn {
    /// Interpret a CLI string: an exact header match wins, otherwise an
    /// integer is treated as a 1-based column index.
    pub fn parse(spec: &str, headers: &[String]) -> Result<usize> {
        if let Some(pos) = headers.iter().position(|h| h == spec) {
            return Ok(pos);
        }
        if let Ok(idx) = spec.parse::<usize>() {
            if idx >= 1 && idx <= headers.len() {
                return Ok(idx - 1);
            }
        }
        Err(Error::ResponseColumnNotFound {
            name: spec.to_string(),
            available: headers.join(","),
        })
    }
}

/// Load a comma-delimited numeric table with a header row.
///
/// The named (or 1-based indexed) column becomes the response; every other
/// column becomes a feature, in file order. Row order is preserved.
pub fn load_csv(path: &Path, response: &ResponseColumn) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path.display().to_string(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => Error::Csv {
                path: path.display().to_string(),
                detail: e.to_string(),
            },
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?
        .iter()
        .map(|h| h.to_string())
        .collect();
    if headers.is_empty() {
        return Err(Error::EmptyTable);
    }

    let response_idx = match response {
        ResponseColumn::Name(name) => ResponseColumn::parse(name, &headers)?,
        ResponseColumn::Index(idx) => {
            if *idx >= 1 && *idx <= headers.len() {
                *idx - 1
            } else {
                return Err(Error::ResponseColumnNotFound {
                    name: idx.to_string(),
                    available: headers.join(","),
                });
            }
        }
    };

    let ncols = headers.len();
    if ncols < 2 {
        return Err(Error::Csv {
            path: path.display().to_string(),
            detail: "need at least one feature column besides the response".into(),
        });
    }

    let mut x_flat: Vec<f64> = Vec::new();
    let mut y: Vec<f64> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 1; // 1-based data row, header not counted
        let record = record.map_err(|e| Error::Csv {
            path: path.display().to_string(),
            detail: format!("row {row}: {e}"),
        })?;
        if record.len() != ncols {
            return Err(Error::Csv {
                path: path.display().to_string(),
                detail: format!("row {row}: expected {ncols} fields, got {}", record.len()),
            });
        }
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| Error::NonNumericCell {
                row,
                column: headers[col].clone(),
                value: field.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFiniteCell {
                    row,
                    column: headers[col].clone(),
                });
            }
            if col == response_idx {
                y.push(value);
            } else {
                x_flat.push(value);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::EmptyTable);
    }

    let n = y.len();
    let d = ncols - 1;
    let x = Array2::from_shape_vec((n, d), x_flat).expect("row-major fill");
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != response_idx)
        .map(|(_, h)| h.clone())
        .collect();
    Dataset::new(x, Array1::from_vec(y), Some(feature_names))
}

/// Train-fitted per-feature min-max ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

impl Scaler {
    /// Learn per-feature ranges from training covariates.
    pub fn fit(train: &Dataset) -> Scaler {
        let x = train.x();
        let d = x.ncols();
        let mut mins = vec![f64::INFINITY; d];
        let mut maxs = vec![f64::NEG_INFINITY; d];
        for row in x.rows() {
            for j in 0..d {
                mins[j] = mins[j].min(row[j]);
                maxs[j] = maxs[j].max(row[j]);
            }
        }
        Scaler { mins, maxs }
    }

    pub fn d(&self) -> usize {
        self.mins.len()
    }

    pub fn mins(&self) -> &[f64] {
        &self.mins
    }

    pub fn maxs(&self) -> &[f64] {
        &self.maxs
    }

    pub fn from_ranges(mins: Vec<f64>, maxs: Vec<f64>) -> Result<Scaler> {
        if mins.len() != maxs.len() {
            return Err(Error::DimensionMismatch {
                context: "scaler ranges".into(),
                expected: mins.len(),
                found: maxs.len(),
            });
        }
        if mins.iter().zip(&maxs).any(|(lo, hi)| hi < lo) {
            return Err(Error::Model("scaler with max < min".into()));
        }
        Ok(Scaler { mins, maxs })
    }

    /// Map covariates onto `[0, 1]` per feature. Constant training features
    /// map to 0; values outside the training range are clamped. Returns the
    /// scaled matrix and the number of rows that needed clamping.
    pub fn transform_counting(&self, x: &Array2<f64>) -> Result<(Array2<f64>, usize)> {
        if x.ncols() != self.d() {
            return Err(Error::DimensionMismatch {
                context: "scaler application".into(),
                expected: self.d(),
                found: x.ncols(),
            });
        }
        let mut out = Array2::zeros(x.raw_dim());
        let mut clamped_rows = 0usize;
        for (i, row) in x.rows().into_iter().enumerate() {
            let mut clamped = false;
            for j in 0..self.d() {
                let (lo, hi) = (self.mins[j], self.maxs[j]);
                let v = if hi > lo {
                    let t = (row[j] - lo) / (hi - lo);
                    if !(0.0..=1.0).contains(&t) {
                        clamped = true;
                    }
                    t.clamp(0.0, 1.0)
                } else {
                    // degenerate feature: constant in training
                    0.0
                };
                out[[i, j]] = v;
            }
            if clamped {
                clamped_rows += 1;
            }
        }
        Ok((out, clamped_rows))
    }

    /// Undo the scaling (for values that were not clamped).
    pub fn inverse(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.d() {
            return Err(Error::DimensionMismatch {
                context: "scaler inversion".into(),
                expected: self.d(),
                found: x.ncols(),
            });
        }
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for j in 0..self.d() {
                let (lo, hi) = (self.mins[j], self.maxs[j]);
                row[j] = if hi > lo { lo + row[j] * (hi - lo) } else { lo };
            }
        }
        Ok(out)
    }
}

/// Fit a [`Scaler`] on training data.
pub fn scale_fit(train: &Dataset) -> Scaler {
    Scaler::fit(train)
}

/// Apply a fitted [`Scaler`], producing a dataset with covariates in `[0, 1]`.
pub fn scale_apply(scaler: &Scaler, data: &Dataset) -> Result<Dataset> {
    let (x, _) = scaler.transform_counting(data.x())?;
    Dataset::new(
        x,
        data.y().clone(),
        data.feature_names().map(|n| n.to_vec()),
    )
}

/// A V-fold partition of `{0, .., n-1}` with fold labels in `{1, .., V}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    v: usize,
    fold_of: Vec<usize>,
    seed: u64,
}

impl FoldAssignment {
    pub fn v(&self) -> usize {
        self.v
    }

    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fold label (1-based) of observation `i`.
    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    /// Held-out observation indices of `fold` (1-based fold label).
    pub fn held_out(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    /// Training (complement) indices of `fold`.
    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

/// Uniformly shuffled balanced fold assignment, reproducible from the seed.
pub fn make_folds(n: usize, v: usize, seed: u64) -> Result<FoldAssignment> {
    if v < 2 || v > n {
        return Err(Error::InvalidFoldCount { v, n });
    }
    let mut rng = rng::stream(seed, &[n as u64, v as u64]);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    let mut fold_of = vec![0usize; n];
    for (pos, &obs) in perm.iter().enumerate() {
        fold_of[obs] = pos % v + 1;
    }
    Ok(FoldAssignment { v, fold_of, seed })
}
