//! Closed-form Gram matrix of the lower-orthant indicator dictionary.
//!
//! With knots at the training points, the inner product of two feature
//! vectors never has to be formed explicitly: for each knot the number of
//! coordinates on which both points sit at or above the knot determines how
//! many indicator products fire, and restricting interactions to order `m`
//! turns the per-knot contribution into a binomial tail sum. Everything here
//! runs in exact integer arithmetic until centering converts to floats.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Kernel construction parameters: maximum interaction order and whether the
/// Gram matrix is double-centered after assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelConfig {
    pub m: usize,
    pub center: bool,
}

impl KernelConfig {
    pub fn new(m: usize) -> Self {
        KernelConfig { m, center: false }
    }

    pub fn centered(m: usize) -> Self {
        KernelConfig { m, center: true }
    }
}

/// A symmetric kernel matrix plus the column means of its uncentered form,
/// which are needed later to center cross-kernels consistently.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    matrix: Array2<f64>,
    column_means: Array1<f64>,
    centered: bool,
    m: usize,
}

impl GramMatrix {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Column means of the uncentered Gram matrix.
    pub fn column_means(&self) -> &Array1<f64> {
        &self.column_means
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Interaction order the matrix was built with.
    pub fn order(&self) -> usize {
        self.m
    }
}

/// Per-knot contribution weights: `w[t]` counts the nonempty subsets of an
/// active set of size `t` with at most `m` elements, so
/// `w[t] = sum_{l=1..min(m,t)} C(t, l)` and `w[t] = 2^t - 1` when `m = d`.
#[allow(clippy::needless_range_loop)]
pub(crate) fn subset_count_weights(d: usize, m: usize) -> Result<Vec<u64>> {
    if m < 1 || m > d {
        return Err(Error::InvalidInteractionOrder { m, d });
    }
    // Pascal triangle rows up to d, checked so large d fails loudly instead
    // of wrapping.
    let mut row: Vec<u64> = vec![1];
    let mut weights = vec![0u64; d + 1];
    for t in 0..=d {
        if t > 0 {
            let mut next = vec![1u64; t + 1];
            for i in 1..t {
                next[i] = row[i - 1]
                    .checked_add(row[i])
                    .ok_or(Error::WeightOverflow { d, m })?;
            }
            row = next;
        }
        let mut acc: u64 = 0;
        for l in 1..=m.min(t) {
            acc = acc
                .checked_add(row[l])
                .ok_or(Error::WeightOverflow { d, m })?;
        }
        weights[t] = acc;
    }
    Ok(weights)
}

fn check_finite(x: &ArrayView2<f64>) -> Result<()> {
    for (i, row) in x.rows().into_iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { row: i + 1 });
        }
    }
    Ok(())
}

fn contiguous(x: &ArrayView2<f64>) -> Array2<f64> {
    if x.is_standard_layout() {
        x.to_owned()
    } else {
        Array2::from_shape_fn(x.raw_dim(), |(i, j)| x[[i, j]])
    }
}

#[inline]
fn active_count_slices(pmin: &[f64], knot: &[f64]) -> usize {
    let mut t = 0usize;
    for (p, k) in pmin.iter().zip(knot.iter()) {
        t += (*p >= *k) as usize;
    }
    t
}

/// Number of coordinates on which both `u` and `v` sit at or above `knot`.
pub fn active_count(
    u: ArrayView1<f64>,
    v: ArrayView1<f64>,
    knot: ArrayView1<f64>,
) -> Result<usize> {
    if u.len() != v.len() || u.len() != knot.len() {
        return Err(Error::DimensionMismatch {
            context: "active_count points".into(),
            expected: u.len(),
            found: v.len().max(knot.len()),
        });
    }
    let mut t = 0usize;
    for j in 0..u.len() {
        t += (u[j].min(v[j]) >= knot[j]) as usize;
    }
    Ok(t)
}

/// One row of the symmetric Gram matrix, `b <= a`, as exact integers.
fn gram_row(xs: &[f64], n: usize, d: usize, a: usize, weights: &[u64], wide: bool) -> Vec<u128> {
    let xa = &xs[a * d..(a + 1) * d];
    let mut pmin = vec![0.0f64; d];
    let mut out = vec![0u128; a + 1];
    for b in 0..=a {
        let xb = &xs[b * d..(b + 1) * d];
        for j in 0..d {
            pmin[j] = xa[j].min(xb[j]);
        }
        out[b] = if wide {
            let mut acc: u128 = 0;
            for i in 0..n {
                let t = active_count_slices(&pmin, &xs[i * d..(i + 1) * d]);
                acc += weights[t] as u128;
            }
            acc
        } else {
            let mut acc: u64 = 0;
            for i in 0..n {
                let t = active_count_slices(&pmin, &xs[i * d..(i + 1) * d]);
                acc += weights[t];
            }
            acc as u128
        };
    }
    out
}

/// Whether `n` knot contributions of at most `max_weight` fit in a `u64`.
fn needs_wide_accumulator(n: usize, weights: &[u64]) -> bool {
    let max_w = weights.iter().copied().max().unwrap_or(0) as u128;
    (n as u128).saturating_mul(max_w) > u64::MAX as u128
}

/// Closed-form Gram matrix of the order-`m` indicator dictionary with knots
/// at the rows of `x`. Centered afterwards when the config says so.
pub fn gram(x: ArrayView2<f64>, config: &KernelConfig) -> Result<GramMatrix> {
    check_finite(&x)?;
    let d = x.ncols();
    let weights = subset_count_weights(d, config.m)?;
    let xo = contiguous(&x);
    let xs = xo.as_slice().expect("standard layout");
    let n = x.nrows();
    let wide = needs_wide_accumulator(n, &weights);

    let rows: Vec<Vec<u128>> = (0..n)
        .into_par_iter()
        .map(|a| gram_row(xs, n, d, a, &weights, wide))
        .collect();

    let mut k = Array2::zeros((n, n));
    for (a, row) in rows.iter().enumerate() {
        for (b, &value) in row.iter().enumerate() {
            let v = value as f64;
            k[[a, b]] = v;
            k[[b, a]] = v;
        }
    }
    let column_means = column_means_of(&k);
    let uncentered = GramMatrix {
        matrix: k,
        column_means,
        centered: false,
        m: config.m,
    };
    if config.center {
        center_gram(&uncentered)
    } else {
        Ok(uncentered)
    }
}

/// Cross-kernel between new points and the training sample; knots always come
/// from the training rows. Always uncentered; see [`center_cross`].
pub fn cross_gram(
    x_new: ArrayView2<f64>,
    x_train: ArrayView2<f64>,
    config: &KernelConfig,
) -> Result<Array2<f64>> {
    if x_new.ncols() != x_train.ncols() {
        return Err(Error::DimensionMismatch {
            context: "cross_gram feature count".into(),
            expected: x_train.ncols(),
            found: x_new.ncols(),
        });
    }
    check_finite(&x_new)?;
    check_finite(&x_train)?;
    let d = x_train.ncols();
    let weights = subset_count_weights(d, config.m)?;
    let tr = contiguous(&x_train);
    let nw = contiguous(&x_new);
    let ts = tr.as_slice().expect("standard layout");
    let ns = nw.as_slice().expect("standard layout");
    let n = x_train.nrows();
    let n_new = x_new.nrows();
    let wide = needs_wide_accumulator(n, &weights);

    let rows: Vec<Vec<u128>> = (0..n_new)
        .into_par_iter()
        .map(|a| {
            let xa = &ns[a * d..(a + 1) * d];
            let mut pmin = vec![0.0f64; d];
            let mut out = vec![0u128; n];
            for b in 0..n {
                let xb = &ts[b * d..(b + 1) * d];
                for j in 0..d {
                    pmin[j] = xa[j].min(xb[j]);
                }
                let mut acc: u128 = 0;
                if wide {
                    for i in 0..n {
                        let t = active_count_slices(&pmin, &ts[i * d..(i + 1) * d]);
                        acc += weights[t] as u128;
                    }
                } else {
                    let mut small: u64 = 0;
                    for i in 0..n {
                        let t = active_count_slices(&pmin, &ts[i * d..(i + 1) * d]);
                        small += weights[t];
                    }
                    acc = small as u128;
                }
                out[b] = acc;
            }
            out
        })
        .collect();

    let mut k = Array2::zeros((n_new, n));
    for (a, row) in rows.iter().enumerate() {
        for (b, &value) in row.iter().enumerate() {
            k[[a, b]] = value as f64;
        }
    }
    Ok(k)
}

fn column_means_of(k: &Array2<f64>) -> Array1<f64> {
    let n = k.nrows() as f64;
    let mut means = Array1::zeros(k.ncols());
    for row in k.rows() {
        for (j, &v) in row.iter().enumerate() {
            means[j] += v;
        }
    }
    means.mapv_inplace(|v| v / n);
    means
}

/// Double-center a square uncentered Gram matrix: subtract row means, column
/// means, add back the grand mean. The result is filled symmetrically so the
/// output is exactly symmetric in floating point.
pub fn center_gram(gram: &GramMatrix) -> Result<GramMatrix> {
    let k = &gram.matrix;
    if k.nrows() != k.ncols() {
        return Err(Error::NotSquare {
            rows: k.nrows(),
            cols: k.ncols(),
        });
    }
    let n = k.nrows();
    let means = &gram.column_means;
    let grand = means.sum() / n as f64;
    let mut out = Array2::zeros((n, n));
    for a in 0..n {
        for b in 0..=a {
            let v = k[[a, b]] - means[a] - means[b] + grand;
            out[[a, b]] = v;
            out[[b, a]] = v;
        }
    }
    Ok(GramMatrix {
        matrix: out,
        column_means: gram.column_means.clone(),
        centered: true,
        m: gram.m,
    })
}

/// Center a cross-kernel against the training geometry: subtract the training
/// column means from each column, then remove each row's mean. Algebraically
/// this equals the product of the centered new design with the transposed
/// centered training design.
pub fn center_cross(k_new: &Array2<f64>, column_means: &Array1<f64>) -> Result<Array2<f64>> {
    if k_new.ncols() != column_means.len() {
        return Err(Error::DimensionMismatch {
            context: "center_cross column means".into(),
            expected: k_new.ncols(),
            found: column_means.len(),
        });
    }
    let n = k_new.ncols() as f64;
    let mean_of_means = column_means.sum() / n;
    let mut out = k_new.clone();
    for mut row in out.rows_mut() {
        let row_mean = row.sum() / n;
        for (j, v) in row.iter_mut().enumerate() {
            *v = *v - column_means[j] - row_mean + mean_of_means;
        }
    }
    Ok(out)
}

/// Active-count histograms for every evaluation pair against a fixed knot
/// set. Grams for several interaction orders can be read off one histogram,
/// which is what the tuning loop does when profiling over `m`.
#[derive(Debug)]
pub(crate) struct PairCountHist {
    rows: usize,
    cols: usize,
    d: usize,
    /// `true`: lower-triangle storage of a symmetric pair grid.
    symmetric: bool,
    bins: Vec<u32>,
}

impl PairCountHist {
    /// Histogram over all unordered pairs of rows of `x`, knots = rows of `x`.
    pub fn train(x: ArrayView2<f64>) -> Result<Self> {
        check_finite(&x)?;
        let xo = contiguous(&x);
        let xs = xo.as_slice().expect("standard layout");
        let n = x.nrows();
        let d = x.ncols();
        let width = d + 1;
        let rows: Vec<Vec<u32>> = (0..n)
            .into_par_iter()
            .map(|a| {
                let xa = &xs[a * d..(a + 1) * d];
                let mut pmin = vec![0.0f64; d];
                let mut out = vec![0u32; (a + 1) * width];
                for b in 0..=a {
                    let xb = &xs[b * d..(b + 1) * d];
                    for j in 0..d {
                        pmin[j] = xa[j].min(xb[j]);
                    }
                    let bin = &mut out[b * width..(b + 1) * width];
                    for i in 0..n {
                        let t = active_count_slices(&pmin, &xs[i * d..(i + 1) * d]);
                        bin[t] += 1;
                    }
                }
                out
            })
            .collect();
        let mut bins = Vec::with_capacity(n * (n + 1) / 2 * width);
        for row in rows {
            bins.extend_from_slice(&row);
        }
        Ok(PairCountHist {
            rows: n,
            cols: n,
            d,
            symmetric: true,
            bins,
        })
    }

    /// Histogram over all (new, train) pairs, knots = rows of `x_train`.
    pub fn between(x_new: ArrayView2<f64>, x_train: ArrayView2<f64>) -> Result<Self> {
        if x_new.ncols() != x_train.ncols() {
            return Err(Error::DimensionMismatch {
                context: "cross histogram feature count".into(),
                expected: x_train.ncols(),
                found: x_new.ncols(),
            });
        }
        check_finite(&x_new)?;
        check_finite(&x_train)?;
        let tr = contiguous(&x_train);
        let nw = contiguous(&x_new);
        let ts = tr.as_slice().expect("standard layout");
        let ns = nw.as_slice().expect("standard layout");
        let n = x_train.nrows();
        let n_new = x_new.nrows();
        let d = x_train.ncols();
        let width = d + 1;
        let rows: Vec<Vec<u32>> = (0..n_new)
            .into_par_iter()
            .map(|a| {
                let xa = &ns[a * d..(a + 1) * d];
                let mut pmin = vec![0.0f64; d];
                let mut out = vec![0u32; n * width];
                for b in 0..n {
                    let xb = &ts[b * d..(b + 1) * d];
                    for j in 0..d {
                        pmin[j] = xa[j].min(xb[j]);
                    }
                    let bin = &mut out[b * width..(b + 1) * width];
                    for i in 0..n {
                        let t = active_count_slices(&pmin, &ts[i * d..(i + 1) * d]);
                        bin[t] += 1;
                    }
                }
                out
            })
            .collect();
        let mut bins = Vec::with_capacity(n_new * n * width);
        for row in rows {
            bins.extend_from_slice(&row);
        }
        Ok(PairCountHist {
            rows: n_new,
            cols: n,
            d,
            symmetric: false,
            bins,
        })
    }

    fn weighted_entry(&self, offset: usize, weights: &[u64]) -> f64 {
        let width = self.d + 1;
        let bin = &self.bins[offset * width..(offset + 1) * width];
        let mut acc: u128 = 0;
        for t in 0..=self.d {
            acc += bin[t] as u128 * weights[t] as u128;
        }
        acc as f64
    }

    /// Uncentered Gram (symmetric histogram) for interaction order `m`.
    pub fn gram(&self, m: usize) -> Result<GramMatrix> {
        assert!(self.symmetric, "gram requires a symmetric histogram");
        let weights = subset_count_weights(self.d, m)?;
        let n = self.rows;
        let mut k = Array2::zeros((n, n));
        for a in 0..n {
            for b in 0..=a {
                let v = self.weighted_entry(a * (a + 1) / 2 + b, &weights);
                k[[a, b]] = v;
                k[[b, a]] = v;
            }
        }
        let column_means = column_means_of(&k);
        Ok(GramMatrix {
            matrix: k,
            column_means,
            centered: false,
            m,
        })
    }

    /// Uncentered cross-kernel for interaction order `m`.
    pub fn cross(&self, m: usize) -> Result<Array2<f64>> {
        assert!(!self.symmetric, "cross requires a rectangular histogram");
        let weights = subset_count_weights(self.d, m)?;
        let mut k = Array2::zeros((self.rows, self.cols));
        for a in 0..self.rows {
            for b in 0..self.cols {
                k[[a, b]] = self.weighted_entry(a * self.cols + b, &weights);
            }
        }
        Ok(k)
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::build_design;
    use ndarray::array;
    use rand::RngExt;

    fn random_unit_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = crate::rng::stream(seed, &[n as u64, d as u64]);
        Array2::from_shape_fn((n, d), |_| rng.random_range(0.0..1.0))
    }

    /// Sequential triple loop straight off the definition.
    fn naive_gram(x: &Array2<f64>, m: usize) -> Array2<f64> {
        let n = x.nrows();
        let d = x.ncols();
        let w = subset_count_weights(d, m).unwrap();
        let mut k = Array2::zeros((n, n));
        for a in 0..n {
            for b in 0..n {
                let mut acc = 0u64;
                for i in 0..n {
                    let mut t = 0usize;
                    for j in 0..d {
                        t += (x[[a, j]].min(x[[b, j]]) >= x[[i, j]]) as usize;
                    }
                    acc += w[t];
                }
                k[[a, b]] = acc as f64;
            }
        }
        k
    }

    #[test]
    fn active_count_examples() {
        let u = array![0.8, 0.2];
        let v = array![0.9, 0.1];
        let knot = array![0.5, 0.15];
        assert_eq!(active_count(u.view(), v.view(), knot.view()).unwrap(), 1);

        let p = array![0.3, 0.7, 0.2];
        assert_eq!(active_count(p.view(), p.view(), p.view()).unwrap(), 3);

        let lo = array![0.1, 0.1];
        let hi = array![0.9, 0.9];
        assert_eq!(active_count(lo.view(), lo.view(), hi.view()).unwrap(), 0);
        assert!(active_count(lo.view(), lo.view(), array![0.5].view()).is_err());
    }

    #[test]
    fn weights_match_binomial_tail_sums() {
        let w = subset_count_weights(3, 2).unwrap();
        assert_eq!(w, vec![0, 1, 3, 6]); // t=3, m=2: C(3,1)+C(3,2)=6
        let w = subset_count_weights(3, 3).unwrap();
        assert_eq!(w, vec![0, 1, 3, 7]); // full order: 2^t - 1
        let w = subset_count_weights(50, 50).unwrap();
        assert_eq!(w[50], (1u64 << 50) - 1);
    }

    #[test]
    fn sorted_univariate_gram_is_min_rank() {
        let x = array![[0.1], [0.3], [0.8], [0.9]];
        let k = gram(x.view(), &KernelConfig::new(1)).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(k.matrix()[[a, b]], (a.min(b) + 1) as f64);
            }
        }
    }

    #[test]
    fn single_point_full_order() {
        let x = array![[0.5, 0.5]];
        let k = gram(x.view(), &KernelConfig::new(2)).unwrap();
        assert_eq!(k.matrix()[[0, 0]], 3.0);
    }

    #[test]
    fn gram_matches_design_oracle_exactly() {
        for seed in 0..20u64 {
            let n = 3 + (seed as usize * 7) % 30;
            let d = 1 + (seed as usize) % 4;
            let x = random_unit_matrix(n, d, seed);
            for m in 1..=d {
                let k = gram(x.view(), &KernelConfig::new(m)).unwrap();
                let h = build_design(x.view(), x.view(), m).unwrap();
                let hh = h.gram_integer();
                for a in 0..n {
                    for b in 0..n {
                        assert_eq!(
                            k.matrix()[[a, b]],
                            hh[[a, b]] as f64,
                            "n={n} d={d} m={m} a={a} b={b}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn cross_gram_matches_design_oracle_exactly() {
        for seed in 0..10u64 {
            let n = 4 + (seed as usize * 5) % 20;
            let n_new = 1 + (seed as usize) % 6;
            let d = 1 + (seed as usize) % 3;
            let x = random_unit_matrix(n, d, seed);
            let x_new = random_unit_matrix(n_new, d, seed + 1000);
            for m in 1..=d {
                let cfg = KernelConfig::new(m);
                let kc = cross_gram(x_new.view(), x.view(), &cfg).unwrap();
                let h = build_design(x.view(), x.view(), m).unwrap();
                let h_new = build_design(x.view(), x_new.view(), m).unwrap();
                let hh = h_new.cross_integer(&h);
                for a in 0..n_new {
                    for b in 0..n {
                        assert_eq!(kc[[a, b]], hh[[a, b]] as f64);
                    }
                }
            }
        }
    }

    #[test]
    fn cross_gram_on_training_points_is_gram() {
        let x = random_unit_matrix(12, 2, 3);
        let cfg = KernelConfig::new(2);
        let k = gram(x.view(), &cfg).unwrap();
        let kc = cross_gram(x.view(), x.view(), &cfg).unwrap();
        assert_eq!(k.matrix(), &kc);
    }

    #[test]
    fn cross_gram_univariate_between_knots() {
        // train = (0.2, 0.7), new point 0.5: knot 0.2 is active against both
        // training points, knot 0.7 against neither pairwise minimum.
        let train = array![[0.2], [0.7]];
        let new = array![[0.5]];
        let kc = cross_gram(new.view(), train.view(), &KernelConfig::new(1)).unwrap();
        let h = build_design(train.view(), train.view(), 1).unwrap();
        let h_new = build_design(train.view(), new.view(), 1).unwrap();
        let oracle = h_new.cross_integer(&h);
        assert_eq!(kc[[0, 0]], oracle[[0, 0]] as f64);
        assert_eq!(kc[[0, 1]], oracle[[0, 1]] as f64);
        assert_eq!(kc.row(0).to_vec(), vec![1.0, 1.0]);
    }

    #[test]
    fn new_point_below_all_knots_gives_zero_row() {
        let train = array![[0.5, 0.5], [0.8, 0.9]];
        let new = array![[0.1, 0.1]];
        let kc = cross_gram(new.view(), train.view(), &KernelConfig::new(2)).unwrap();
        assert_eq!(kc.row(0).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn truncation_is_monotone_in_m() {
        let x = random_unit_matrix(15, 4, 9);
        let mut previous: Option<Array2<f64>> = None;
        for m in 1..=4 {
            let k = gram(x.view(), &KernelConfig::new(m)).unwrap();
            if let Some(prev) = previous {
                for (lo, hi) in prev.iter().zip(k.matrix().iter()) {
                    assert!(lo <= hi);
                }
            }
            previous = Some(k.matrix().clone());
        }
    }

    #[test]
    fn totally_ordered_sample_collapses_to_min_kernel() {
        // strictly increasing in every coordinate => K = (2^d - 1) * min(i, j)
        let n = 8;
        let d = 3;
        let x = Array2::from_shape_fn((n, d), |(i, j)| (i as f64 + 1.0) / (n as f64 + 1.0) + j as f64 * 1e-4);
        let k = gram(x.view(), &KernelConfig::new(d)).unwrap();
        for a in 0..n {
            for b in 0..n {
                assert_eq!(k.matrix()[[a, b]], 7.0 * (a.min(b) + 1) as f64);
            }
        }
    }

    #[test]
    fn parallel_and_naive_schedules_agree_exactly() {
        for seed in 0..6u64 {
            let n = 5 + (seed as usize * 11) % 25;
            let d = 1 + (seed as usize) % 4;
            let x = random_unit_matrix(n, d, seed + 77);
            for m in 1..=d {
                let fast = gram(x.view(), &KernelConfig::new(m)).unwrap();
                let slow = naive_gram(&x, m);
                assert_eq!(fast.matrix(), &slow);
            }
        }
    }

    #[test]
    fn histogram_path_matches_direct_path() {
        let x = random_unit_matrix(18, 3, 5);
        let hist = PairCountHist::train(x.view()).unwrap();
        for m in 1..=3 {
            let direct = gram(x.view(), &KernelConfig::new(m)).unwrap();
            let from_hist = hist.gram(m).unwrap();
            assert_eq!(direct.matrix(), from_hist.matrix());
        }
        let x_new = random_unit_matrix(7, 3, 6);
        let cross_hist = PairCountHist::between(x_new.view(), x.view()).unwrap();
        for m in 1..=3 {
            let direct = cross_gram(x_new.view(), x.view(), &KernelConfig::new(m)).unwrap();
            assert_eq!(direct, cross_hist.cross(m).unwrap());
        }
    }

    #[test]
    fn center_gram_annihilates_constants() {
        let ones = GramMatrix {
            matrix: Array2::ones((4, 4)),
            column_means: Array1::ones(4),
            centered: false,
            m: 1,
        };
        let centered = center_gram(&ones).unwrap();
        assert!(centered.matrix().iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn center_gram_two_by_two_hand_value() {
        let k = GramMatrix {
            matrix: array![[1.0, 1.0], [1.0, 2.0]],
            column_means: array![1.0, 1.5],
            centered: false,
            m: 1,
        };
        let c = center_gram(&k).unwrap();
        let expected = array![[0.25, -0.25], [-0.25, 0.25]];
        for (a, b) in c.matrix().iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn centered_row_sums_vanish() {
        let x = random_unit_matrix(20, 3, 11);
        let k = gram(x.view(), &KernelConfig::centered(2)).unwrap();
        assert!(k.is_centered());
        for row in k.matrix().rows() {
            assert!(row.sum().abs() < 1e-9);
        }
        // exact symmetry by construction
        for a in 0..20 {
            for b in 0..20 {
                assert_eq!(k.matrix()[[a, b]], k.matrix()[[b, a]]);
            }
        }
    }

    #[test]
    fn center_cross_on_training_points_matches_center_gram() {
        let x = random_unit_matrix(10, 2, 13);
        let cfg = KernelConfig::new(2);
        let k = gram(x.view(), &cfg).unwrap();
        let centered = center_gram(&k).unwrap();
        let kc = cross_gram(x.view(), x.view(), &cfg).unwrap();
        let cc = center_cross(&kc, k.column_means()).unwrap();
        for (a, b) in cc.iter().zip(centered.matrix().iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn centered_cross_rows_sum_to_zero() {
        // right-multiplication by the centering projector annihilates the
        // constant part of every row
        let x = random_unit_matrix(15, 3, 21);
        let x_new = random_unit_matrix(6, 3, 22);
        let cfg = KernelConfig::new(2);
        let k = gram(x.view(), &cfg).unwrap();
        let kc = cross_gram(x_new.view(), x.view(), &cfg).unwrap();
        let cc = center_cross(&kc, k.column_means()).unwrap();
        for row in cc.rows() {
            assert!(row.sum().abs() < 1e-8);
        }
    }

    #[test]
    fn center_cross_matches_explicit_centered_designs() {
        // K~' must equal (H' - 1 mu^T)(H - 1 mu^T)^T computed explicitly
        for seed in 0..8u64 {
            let n = 6;
            let n_new = 3;
            let d = 2;
            let x = random_unit_matrix(n, d, seed + 40);
            let x_new = random_unit_matrix(n_new, d, seed + 90);
            let m = 2;
            let cfg = KernelConfig::new(m);
            let k = gram(x.view(), &cfg).unwrap();
            let kc = cross_gram(x_new.view(), x.view(), &cfg).unwrap();
            let cc = center_cross(&kc, k.column_means()).unwrap();

            let h = build_design(x.view(), x.view(), m).unwrap();
            let h_new = build_design(x.view(), x_new.view(), m).unwrap();
            let mu = h.column_means();
            let hc = h.centered(&mu);
            let hc_new = h_new.centered(&mu);
            let explicit = hc_new.dot(&hc.t());
            for (a, b) in cc.iter().zip(explicit.iter()) {
                assert!((a - b).abs() < 1e-10, "seed={seed}");
            }
        }
    }

    #[test]
    fn gram_rejects_non_finite() {
        let x = array![[0.1, f64::NAN]];
        assert!(gram(x.view(), &KernelConfig::new(1)).is_err());
        assert!(gram(array![[0.5]].view(), &KernelConfig::new(2)).is_err());
    }

    #[test]
    fn wide_accumulator_handles_large_d() {
        // single knot, d = 50, full order: K = 2^50 - 1 exactly
        let x = Array2::from_elem((1, 50), 0.5);
        let k = gram(x.view(), &KernelConfig::new(50)).unwrap();
        assert_eq!(k.matrix()[[0, 0]], ((1u64 << 50) - 1) as f64);
    }
}
