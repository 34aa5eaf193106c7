//! Explicit zero-order indicator design matrix over lower-orthant basis
//! functions. This is the brute-force counterpart of the closed-form kernel:
//! it materializes every (subset, knot) column and is therefore only usable
//! when `N * n * (number of subsets)` is small. It exists as an oracle for
//! tests and debug dumps, not as a fitting path.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Default cap on materialized design entries.
pub const DEFAULT_DESIGN_BUDGET: u128 = 10_000_000;

/// All nonempty coordinate subsets of `{0, .., d-1}` with size at most `m`,
/// ordered by size then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetIndex {
    d: usize,
    m: usize,
    subsets: Vec<Vec<usize>>,
}

impl SubsetIndex {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }
}

/// Enumerate subsets by size, lexicographic within each size.
pub fn enumerate_subsets(d: usize, m: usize) -> Result<SubsetIndex> {
    if m < 1 || m > d {
        return Err(Error::InvalidInteractionOrder { m, d });
    }
    let mut subsets = Vec::new();
    for size in 1..=m {
        // standard lexicographic combination walk
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            subsets.push(combo.clone());
            // advance
            let mut i = size;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if combo[i] != i + d - size {
                    combo[i] += 1;
                    for j in i + 1..size {
                        combo[j] = combo[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    combo.clear();
                    break;
                }
            }
            if combo.is_empty() {
                break;
            }
        }
    }
    Ok(SubsetIndex { d, m, subsets })
}

/// Binary design matrix: rows are evaluation points, columns are
/// (subset, knot) pairs in subset-major, knot-minor order.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    bits: Array2<u8>,
    subsets: SubsetIndex,
    n_knots: usize,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.bits.nrows()
    }

    pub fn n_columns(&self) -> usize {
        self.bits.ncols()
    }

    pub fn subsets(&self) -> &SubsetIndex {
        &self.subsets
    }

    pub fn n_knots(&self) -> usize {
        self.n_knots
    }

    /// Raw 0/1 entries.
    pub fn bits(&self) -> &Array2<u8> {
        &self.bits
    }

    /// `H * H^T` in exact integer arithmetic.
    pub fn gram_integer(&self) -> Array2<u64> {
        self.cross_integer(self)
    }

    /// `self * other^T` in exact integer arithmetic (requires equal column
    /// layouts, i.e. both built from the same knots and subsets).
    pub fn cross_integer(&self, other: &DesignMatrix) -> Array2<u64> {
        assert_eq!(self.n_columns(), other.n_columns(), "column layout mismatch");
        let (rows, cols) = (self.n_rows(), other.n_rows());
        let p = self.n_columns();
        let a = self.bits.as_slice().expect("row-major design");
        let b = other.bits.as_slice().expect("row-major design");
        let mut out = Array2::zeros((rows, cols));
        for i in 0..rows {
            for j in 0..cols {
                let mut acc = 0u64;
                let ra = &a[i * p..(i + 1) * p];
                let rb = &b[j * p..(j + 1) * p];
                for (&x, &y) in ra.iter().zip(rb.iter()) {
                    acc += (x & y) as u64;
                }
                out[[i, j]] = acc;
            }
        }
        out
    }

    /// Column means of the 0/1 entries.
    pub fn column_means(&self) -> Array1<f64> {
        let n = self.n_rows() as f64;
        let mut mu = Array1::zeros(self.n_columns());
        for row in self.bits.rows() {
            for (j, &v) in row.iter().enumerate() {
                mu[j] += v as f64;
            }
        }
        mu.mapv_inplace(|v| v / n);
        mu
    }

    /// Entries as `f64` with each column shifted by `mu` (the centered design).
    pub fn centered(&self, mu: &Array1<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows(), self.n_columns()));
        for (i, row) in self.bits.rows().into_iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                out[[i, j]] = v as f64 - mu[j];
            }
        }
        out
    }
}

/// Build the indicator design with knots from `knots` and rows from
/// `eval_points`, under the default entry budget.
pub fn build_design(
    knots: ArrayView2<f64>,
    eval_points: ArrayView2<f64>,
    m: usize,
) -> Result<DesignMatrix> {
    build_design_with_budget(knots, eval_points, m, DEFAULT_DESIGN_BUDGET)
}

/// As [`build_design`] with an explicit budget on materialized entries.
pub fn build_design_with_budget(
    knots: ArrayView2<f64>,
    eval_points: ArrayView2<f64>,
    m: usize,
    budget: u128,
) -> Result<DesignMatrix> {
    let d = knots.ncols();
    if eval_points.ncols() != d {
        return Err(Error::DimensionMismatch {
            context: "design evaluation points".into(),
            expected: d,
            found: eval_points.ncols(),
        });
    }
    let subsets = enumerate_subsets(d, m)?;
    let n_knots = knots.nrows();
    let n_eval = eval_points.nrows();
    let entries = n_eval as u128 * n_knots as u128 * subsets.len() as u128;
    if entries > budget {
        return Err(Error::DesignBudgetExceeded { entries, budget });
    }

    let p = subsets.len() * n_knots;
    let mut bits = Array2::zeros((n_eval, p));
    for (a, point) in eval_points.rows().into_iter().enumerate() {
        for (s_idx, subset) in subsets.subsets().iter().enumerate() {
            for (i, knot) in knots.rows().into_iter().enumerate() {
                // non-strict inequality: a point tied with the knot is active
                let active = subset.iter().all(|&j| point[j] >= knot[j]);
                bits[[a, s_idx * n_knots + i]] = active as u8;
            }
        }
    }
    Ok(DesignMatrix {
        bits,
        subsets,
        n_knots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn subsets_small_cases() {
        let s = enumerate_subsets(2, 2).unwrap();
        assert_eq!(s.subsets(), &[vec![0], vec![1], vec![0, 1]]);

        let s = enumerate_subsets(3, 1).unwrap();
        assert_eq!(s.subsets(), &[vec![0], vec![1], vec![2]]);

        let s = enumerate_subsets(3, 2).unwrap();
        assert_eq!(s.len(), 6); // C(3,1) + C(3,2)
        assert_eq!(
            s.subsets(),
            &[
                vec![0],
                vec![1],
                vec![2],
                vec![0, 1],
                vec![0, 2],
                vec![1, 2]
            ]
        );
    }

    #[test]
    fn subsets_count_matches_binomials() {
        // sum_{l=1..m} C(d, l)
        for d in 1..=6usize {
            for m in 1..=d {
                let s = enumerate_subsets(d, m).unwrap();
                let expected: usize = (1..=m)
                    .map(|l| {
                        let mut c = 1usize;
                        for i in 0..l {
                            c = c * (d - i) / (i + 1);
                        }
                        c
                    })
                    .sum();
                assert_eq!(s.len(), expected, "d={d} m={m}");
            }
        }
    }

    #[test]
    fn subsets_reject_out_of_range() {
        assert!(enumerate_subsets(3, 0).is_err());
        assert!(enumerate_subsets(3, 4).is_err());
    }

    #[test]
    fn subsets_nest_as_prefixes() {
        for d in 2..=5usize {
            for m in 1..d {
                let small = enumerate_subsets(d, m).unwrap();
                let large = enumerate_subsets(d, m + 1).unwrap();
                assert_eq!(small.subsets(), &large.subsets()[..small.len()]);
            }
        }
    }

    #[test]
    fn sorted_univariate_design_is_lower_triangular() {
        let x = array![[0.1], [0.4], [0.9]];
        let h = build_design(x.view(), x.view(), 1).unwrap();
        let expected = array![[1u8, 0, 0], [1, 1, 0], [1, 1, 1]];
        assert_eq!(h.bits(), &expected);
    }

    #[test]
    fn tie_with_knot_is_active() {
        let knots = array![[0.5, 0.5]];
        let eval = array![[0.5, 0.5]];
        let h = build_design(knots.view(), eval.view(), 2).unwrap();
        // subsets {0}, {1}, {0,1}; all three indicators fire at the knot
        assert_eq!(h.bits().row(0).to_vec(), vec![1, 1, 1]);
        assert_eq!(h.gram_integer()[[0, 0]], 3);
    }

    #[test]
    fn budget_guard_trips() {
        let x = Array2::zeros((100, 4));
        let err = build_design_with_budget(x.view(), x.view(), 4, 1000).unwrap_err();
        assert!(matches!(err, Error::DesignBudgetExceeded { .. }));
    }
}
