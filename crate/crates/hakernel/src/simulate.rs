//! Data-generating processes for the benchmark suite, the interaction-order
//! selection experiment (cross-validated against an oracle with access to a
//! fresh test sample), and the test-MSE benchmark runner.

use ndarray::{Array1, Array2};
use rand::RngExt;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{make_folds, scale_apply, scale_fit, Dataset};
use crate::error::{Error, Result};
use crate::estimators::Penalty;
use crate::kernel::{center_cross, gram, KernelConfig, PairCountHist};
use crate::linalg;
use crate::rng;
use crate::spectral::{eig_sym, sine_eigensystem};
use crate::tuning::{
    fit_scaled, full_fit, profile_m, FitOptions, FullFit, ProfileOptions, TuningGrid,
};

fn saw(t: f64) -> f64 {
    // period-1 sawtooth with range [-1, 1)
    2.0 * (t - (t + 0.5).floor())
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn indicator(cond: bool) -> f64 {
    if cond {
        1.0
    } else {
        0.0
    }
}

fn pos(t: f64) -> f64 {
    t.max(0.0)
}

/// Benchmark signal identifiers. `D1`..`D10` draw covariates uniformly on
/// the unit cube; `Interaction3` draws on `(-1, 1)^3` (min-max scaled before
/// any kernel is built); `Const` is a noiseless debug signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgpId {
    D1,
    D2,
    D3,
    D4,
    D5,
    D6,
    D7,
    D8,
    D9,
    D10,
    Interaction3,
    Const,
}

impl DgpId {
    pub fn parse(s: &str) -> Result<DgpId> {
        use DgpId::*;
        Ok(match s.to_ascii_lowercase().as_str() {
            "d1" => D1,
            "d2" => D2,
            "d3" => D3,
            "d4" => D4,
            "d5" => D5,
            "d6" => D6,
            "d7" => D7,
            "d8" => D8,
            "d9" => D9,
            "d10" => D10,
            "interaction3" => Interaction3,
            "const" => Const,
            other => return Err(Error::UnknownDgp(other.to_string())),
        })
    }

    pub fn for_dimension(d: usize) -> Result<DgpId> {
        use DgpId::*;
        Ok(match d {
            1 => D1,
            2 => D2,
            3 => D3,
            4 => D4,
            5 => D5,
            6 => D6,
            7 => D7,
            8 => D8,
            9 => D9,
            10 => D10,
            other => return Err(Error::UnknownDgp(format!("d{other}"))),
        })
    }

    pub fn name(&self) -> &'static str {
        use DgpId::*;
        match self {
            D1 => "d1",
            D2 => "d2",
            D3 => "d3",
            D4 => "d4",
            D5 => "d5",
            D6 => "d6",
            D7 => "d7",
            D8 => "d8",
            D9 => "d9",
            D10 => "d10",
            Interaction3 => "interaction3",
            Const => "const",
        }
    }

    pub fn dimension(&self) -> usize {
        use DgpId::*;
        match self {
            D1 => 1,
            D2 => 2,
            D3 | Interaction3 => 3,
            D4 => 4,
            D5 => 5,
            D6 => 6,
            D7 => 7,
            D8 => 8,
            D9 => 9,
            D10 => 10,
            Const => 2,
        }
    }

    /// Covariate sampler; everything except `Interaction3` is uniform on the
    /// unit cube.
    fn sample_covariate(&self, rng: &mut ChaCha12Rng) -> f64 {
        match self {
            DgpId::Interaction3 => rng.random_range(-1.0..1.0),
            _ => rng.random_range(0.0..1.0),
        }
    }

    /// Noiseless signal at a point.
    pub fn signal(&self, x: &[f64]) -> f64 {
        use std::f64::consts::PI;
        match self {
            DgpId::D1 => {
                let x1 = x[0];
                0.35 * x1 + (2.0 * PI * x1 * x1).sin() + 0.4 * (4.0 * PI * x1).cos()
                    + 0.2 * saw(7.0 * x1)
                    - 0.3 * sigmoid(12.0 * (x1 - 0.65))
            }
            DgpId::D2 => {
                let (x1, x2) = (x[0], x[1]);
                (PI * x1 * x2).sin() + 0.5 * (x2 - 0.5).powi(2)
                    + 0.3 * (3.0 * PI * (x1 + x2)).cos()
                    - 0.2 * (2.0 * PI * (x1 - x2)).sin()
            }
            DgpId::D3 => {
                let (x1, x2, x3) = (x[0], x[1], x[2]);
                0.6 * (2.0 * PI * x1).sin()
                    + 0.6 * (2.0 * PI * x2).cos()
                    + 0.6 * (2.0 * PI * x3 * x3).sin()
                    + 0.4 * x2 * x3
                    + 0.5
                        * (-35.0
                            * ((x1 - 0.7).powi(2) + (x2 - 0.3).powi(2) + (x3 - 0.5).powi(2)))
                        .exp()
            }
            DgpId::D4 => {
                let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
                (x1 - 0.5).abs() + 0.7 * pos(x2 - 0.3) + 0.5 * (x3 - 0.7).abs()
                    + 0.6 * pos(0.6 - x4)
                    + 0.3 * indicator(x1 > 0.6)
                    - 0.25 * indicator(x2 < 0.2)
                    + 0.2 * indicator(x3 > 0.8 && x4 < 0.4)
            }
            DgpId::D5 => {
                let mean: f64 = x[..5].iter().sum::<f64>() / 5.0;
                mean.powf(1.7)
                    + 0.4 * (2.0 * PI * mean).sin()
                    + 0.2 * (x[0] - 0.5) * (x[4] - 0.5)
            }
            DgpId::D6 => {
                let total: f64 = x[..6].iter().sum();
                indicator(total > 3.2)
                    + 0.6 * indicator(x[0] > 0.6 && x[1] < 0.4)
                    + 0.4 * indicator(x[2] > 0.7 && x[3] < 0.3)
                    + 0.3 * indicator(x[4] + x[5] > 1.1)
            }
            DgpId::D7 => {
                // A_j = linspace(7, 13), w_j = linspace(1, 0.4) over 7 points
                let mut acc = 0.0;
                #[allow(clippy::needless_range_loop)]
                for j in 0..7 {
                    let a = 7.0 + j as f64;
                    let w = 1.0 - 0.1 * j as f64;
                    acc += w * (a * PI * x[j]).sin();
                }
                acc + 0.2 * (x[0] - 0.5) * (x[2] - 0.5) - 0.2 * (x[4] - 0.5) * (x[6] - 0.5)
            }
            DgpId::D8 => {
                let s03: f64 = x[..8].iter().map(|v| (v - 0.3).powi(2)).sum();
                let s07: f64 = x[..8].iter().map(|v| (v - 0.7).powi(2)).sum();
                let mean: f64 = x[..8].iter().sum::<f64>() / 8.0;
                (-30.0 * s03).exp() - 0.8 * (-30.0 * s07).exp()
                    + 0.3 * (2.0 * PI * mean).sin()
                    + 0.2 * (2.0 * PI * (x[0] + x[7])).cos()
            }
            DgpId::D9 => {
                let mean: f64 = x[..9].iter().sum::<f64>() / 9.0;
                0.8 * (PI * x[0] * x[1]).sin()
                    + 0.25 * (x[2] - 0.5) * (x[8] - 0.5)
                    + 0.3 * x[6] * x[7]
                    + 0.6 * (2.0 * PI * mean).cos()
            }
            DgpId::D10 => {
                let steps: i64 = x[..4].iter().map(|v| (3.0 * v).floor() as i64).sum();
                let g1 = (steps.rem_euclid(2)) as f64 - 0.5;
                let g2: f64 = (0..10)
                    .map(|j| (2.0 * PI * (j as f64 + 1.0) * x[j]).cos())
                    .sum::<f64>()
                    / 10.0;
                let g3 =
                    0.2 * pos(x[4] - 0.6) + 0.2 * pos(0.4 - x[5]) + 0.2 * indicator(x[8] > 0.75);
                g1 + 0.6 * g2 + g3
            }
            DgpId::Interaction3 => {
                1.2 * x[0] - 1.0 * x[1] + 0.8 * x[2] + 0.3 * (x[0] * x[1] - 1.5 * x[1] * x[2])
            }
            DgpId::Const => 0.7,
        }
    }

    /// Noise standard deviation at a point (heteroskedastic for `D9`).
    pub fn noise_sd(&self, x: &[f64]) -> f64 {
        match self {
            DgpId::D1 => 0.05,
            DgpId::D2 => 0.12,
            DgpId::D3 | DgpId::D5 => 0.16,
            DgpId::D4 | DgpId::D8 | DgpId::D10 => 0.18,
            DgpId::D6 => 0.15,
            DgpId::D7 => 0.20,
            DgpId::D9 => {
                let mean_sq: f64 = x[..9].iter().map(|v| v * v).sum::<f64>() / 9.0;
                0.10 + 0.30 * mean_sq
            }
            DgpId::Interaction3 => 0.03,
            DgpId::Const => 0.0,
        }
    }
}

/// A fully specified draw: signal id, sample sizes, seed, and a multiplier on
/// the noise scale (0 gives the deterministic variant).
#[derive(Debug, Clone, Copy)]
pub struct DgpSpec {
    pub id: DgpId,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub noise_scale: f64,
}

impl DgpSpec {
    pub fn new(id: DgpId, n_train: usize, n_test: usize, seed: u64) -> Self {
        DgpSpec {
            id,
            n_train,
            n_test,
            seed,
            noise_scale: 1.0,
        }
    }
}

fn sample_split(id: DgpId, n: usize, noise_scale: f64, rng: &mut ChaCha12Rng) -> Dataset {
    let d = id.dimension();
    let mut x = Array2::zeros((n, d));
    for i in 0..n {
        for j in 0..d {
            x[[i, j]] = id.sample_covariate(rng);
        }
    }
    // noise drawn after all covariates so the design is invariant to the
    // noise scale
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let row: Vec<f64> = x.row(i).to_vec();
        let eps: f64 = rng.sample(StandardNormal);
        y[i] = id.signal(&row) + noise_scale * id.noise_sd(&row) * eps;
    }
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    Dataset::new(x, y, Some(names)).expect("generated data is finite")
}

/// Draw independent training and test samples.
pub fn gen_dgp(spec: &DgpSpec) -> (Dataset, Dataset) {
    let mut train_rng = rng::stream(spec.seed, &[spec.id.dimension() as u64, 0]);
    let mut test_rng = rng::stream(spec.seed, &[spec.id.dimension() as u64, 1]);
    let train = sample_split(spec.id, spec.n_train, spec.noise_scale, &mut train_rng);
    let test = sample_split(spec.id, spec.n_test, spec.noise_scale, &mut test_rng);
    (train, test)
}

/// One replicate of the interaction-order experiment.
#[derive(Debug, Clone, Copy)]
pub struct InteractionRow {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub oracle_m: usize,
    pub cv_m: usize,
}

/// Selection frequencies over `m` in `{1, 2, 3}` for the oracle and the
/// cross-validated selector, per training size.
#[derive(Debug, Clone)]
pub struct InteractionExperiment {
    pub ns: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub rows: Vec<InteractionRow>,
    pub oracle_freq: Vec<[f64; 3]>,
    pub cv_freq: Vec<[f64; 3]>,
}

impl InteractionExperiment {
    pub fn write_frequency_csv<W: std::io::Write>(
        &self,
        mut w: W,
        which: &str,
    ) -> std::io::Result<()> {
        let table = match which {
            "oracle" => &self.oracle_freq,
            _ => &self.cv_freq,
        };
        writeln!(w, "n,m1,m2,m3")?;
        for (i, n) in self.ns.iter().enumerate() {
            writeln!(w, "{},{},{},{}", n, table[i][0], table[i][1], table[i][2])?;
        }
        Ok(())
    }

    pub fn write_rows_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,rep,seed,oracle_m,cv_m")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{}", r.n, r.rep, r.seed, r.oracle_m, r.cv_m)?;
        }
        Ok(())
    }
}

/// Minimum test-sample MSE over the `(k, lambda)` grid for one interaction
/// order, using component predictors `pred = K~' U diag(d^{-1/2})`.
fn min_test_risk(
    full: &FullFit,
    pred: &Array2<f64>,
    y_test: &Array1<f64>,
    n_train: usize,
    k_candidates: &[usize],
    lambda_grid: &[f64],
    kind: Penalty,
) -> Option<f64> {
    let r = full.spectrum.r();
    let n_test = y_test.len();
    let mut best: Option<f64> = None;
    for &lambda in lambda_grid {
        let d = full.spectrum.eigenvalues();
        let beta: Vec<f64> = (0..r)
            .map(|j| match kind {
                Penalty::Ridge => d[j].sqrt() * full.q[j] / (d[j] + n_train as f64 * lambda),
                Penalty::Lasso => {
                    let w = d[j].sqrt() * full.q[j];
                    let shrunk = w.abs() - n_train as f64 * lambda;
                    if shrunk > 0.0 {
                        w.signum() * shrunk / d[j]
                    } else {
                        0.0
                    }
                }
            })
            .collect();
        let mut yhat = Array1::from_elem(n_test, full.y_mean);
        let mut next = 0usize;
        for &k in k_candidates {
            if k > r {
                break;
            }
            while next < k {
                let b = beta[next];
                if b != 0.0 {
                    let col = pred.column(next);
                    for (yh, &p) in yhat.iter_mut().zip(col.iter()) {
                        *yh += b * p;
                    }
                }
                next += 1;
            }
            let mse: f64 = yhat
                .iter()
                .zip(y_test.iter())
                .map(|(p, y)| (y - p) * (y - p))
                .sum::<f64>()
                / n_test as f64;
            if best.is_none_or(|b| mse < b) {
                best = Some(mse);
            }
        }
    }
    best
}

/// Run the interaction-order study: for each training size and replicate,
/// profile `m` by cross-validation and compare with the oracle order chosen
/// by true test risk on an independent sample of 5000 points.
pub fn run_interaction_experiment(
    ns: &[usize],
    reps: usize,
    seed: u64,
    kind: Penalty,
) -> Result<InteractionExperiment> {
    const M_MAX: usize = 3;
    const N_TEST: usize = 5000;

    let mut rows: Vec<InteractionRow> = Vec::new();
    for &n in ns {
        let per_n: Vec<Result<InteractionRow>> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let rep_seed = rng::derive_seed(seed, &[n as u64, rep as u64]);
                let spec = DgpSpec::new(DgpId::Interaction3, n, N_TEST, rep_seed);
                let (train_raw, test_raw) = gen_dgp(&spec);
                let scaler = scale_fit(&train_raw);
                let train = scale_apply(&scaler, &train_raw)?;
                let (test_x, _) = scaler.transform_counting(test_raw.x())?;

                let folds = make_folds(n, 5, rng::derive_seed(rep_seed, &[2]))?;
                let mut grid = TuningGrid::default_for(n, 3);
                grid.m_max = M_MAX;

                // cross-validated selector with the forward stopping rule
                let report = profile_m(&train, &grid, &folds, kind, &ProfileOptions::default())?;
                let cv_m = report.selected.m;

                // oracle: full-sample fits per order, risk on the test draw
                let full_hist = PairCountHist::train(train.x().view())?;
                let test_hist = PairCountHist::between(test_x.view(), train.x().view())?;
                let mut oracle_m = 1usize;
                let mut oracle_risk = f64::INFINITY;
                for m in 1..=M_MAX {
                    let full = full_fit(&full_hist, train.y(), m)?;
                    let cross = test_hist.cross(m)?;
                    let cross_centered = center_cross(&cross, &full.gram_column_means)?;
                    let mut w = full.spectrum.eigenvectors().clone();
                    for (j, mut col) in w.columns_mut().into_iter().enumerate() {
                        let s = 1.0 / full.spectrum.eigenvalues()[j].sqrt();
                        col.mapv_inplace(|v| v * s);
                    }
                    let pred = linalg::mat_mul(cross_centered.view(), w.view());
                    if let Some(risk) = min_test_risk(
                        &full,
                        &pred,
                        test_raw.y(),
                        n,
                        &grid.k_candidates,
                        &grid.lambda_grid,
                        kind,
                    ) {
                        if risk < oracle_risk {
                            oracle_risk = risk;
                            oracle_m = m;
                        }
                    }
                }

                Ok(InteractionRow {
                    n,
                    rep,
                    seed: rep_seed,
                    oracle_m,
                    cv_m,
                })
            })
            .collect();
        for row in per_n {
            rows.push(row?);
        }
    }

    let mut oracle_freq = vec![[0.0; 3]; ns.len()];
    let mut cv_freq = vec![[0.0; 3]; ns.len()];
    for row in &rows {
        let ni = ns.iter().position(|&n| n == row.n).unwrap();
        oracle_freq[ni][row.oracle_m - 1] += 1.0 / reps as f64;
        cv_freq[ni][row.cv_m - 1] += 1.0 / reps as f64;
    }
    Ok(InteractionExperiment {
        ns: ns.to_vec(),
        reps,
        seed,
        rows,
        oracle_freq,
        cv_freq,
    })
}

/// One replicate of the MSE benchmark.
#[derive(Debug, Clone, Copy)]
pub struct MseRow {
    pub d: usize,
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub mse_pchal: f64,
    pub mse_pchar: f64,
}

#[derive(Debug, Clone)]
pub struct MseBenchmark {
    pub reps: usize,
    pub seed: u64,
    pub rows: Vec<MseRow>,
    /// `(d, n, mean pchal, mean pchar)` in run order.
    pub means: Vec<(usize, usize, f64, f64)>,
}

impl MseBenchmark {
    pub fn write_rows_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "d,n,rep,seed,mse_pchal,mse_pchar")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.d, r.n, r.rep, r.seed, r.mse_pchal, r.mse_pchar
            )?;
        }
        Ok(())
    }

    pub fn write_summary_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "method,d,n,mean_mse")?;
        for &(d, n, pchal, pchar) in &self.means {
            writeln!(w, "pchal,{d},{n},{pchal}")?;
            writeln!(w, "pchar,{d},{n},{pchar}")?;
        }
        Ok(())
    }
}

/// Test-MSE benchmark on the per-dimension signals: both estimators are fit
/// on the same draws with the full interaction order `m = d`, `(k, lambda)`
/// tuned per replicate, and evaluated on an independent sample of 2000.
pub fn run_mse_benchmark(
    dims: &[usize],
    ns: &[usize],
    reps: usize,
    seed: u64,
) -> Result<MseBenchmark> {
    const N_TEST: usize = 2000;
    let mut rows: Vec<MseRow> = Vec::new();
    for &d in dims {
        let id = DgpId::for_dimension(d)?;
        for &n in ns {
            let per: Vec<Result<MseRow>> = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let rep_seed = rng::derive_seed(seed, &[d as u64, n as u64, rep as u64]);
                    let spec = DgpSpec::new(id, n, N_TEST, rep_seed);
                    let (train_raw, test_raw) = gen_dgp(&spec);
                    let scaler = scale_fit(&train_raw);
                    let train = scale_apply(&scaler, &train_raw)?;
                    let (test_x, _) = scaler.transform_counting(test_raw.x())?;
                    let folds = make_folds(n, 5, rng::derive_seed(rep_seed, &[2]))?;

                    let mut mse = [0.0f64; 2];
                    for (slot, kind) in [Penalty::Lasso, Penalty::Ridge].into_iter().enumerate() {
                        let mut options = FitOptions::new(kind);
                        options.fixed_m = Some(d);
                        let (model, _) = fit_scaled(&train, scaler.clone(), &folds, &options)?;
                        let pred = model.predict_scaled(test_x.view())?;
                        mse[slot] = pred
                            .iter()
                            .zip(test_raw.y().iter())
                            .map(|(p, y)| (y - p) * (y - p))
                            .sum::<f64>()
                            / N_TEST as f64;
                    }
                    Ok(MseRow {
                        d,
                        n,
                        rep,
                        seed: rep_seed,
                        mse_pchal: mse[0],
                        mse_pchar: mse[1],
                    })
                })
                .collect();
            for row in per {
                rows.push(row?);
            }
        }
    }

    let mut means = Vec::new();
    for &d in dims {
        for &n in ns {
            let subset: Vec<&MseRow> = rows.iter().filter(|r| r.d == d && r.n == n).collect();
            let pchal = subset.iter().map(|r| r.mse_pchal).sum::<f64>() / subset.len() as f64;
            let pchar = subset.iter().map(|r| r.mse_pchar).sum::<f64>() / subset.len() as f64;
            means.push((d, n, pchal, pchar));
        }
    }
    Ok(MseBenchmark {
        reps,
        seed,
        rows,
        means,
    })
}

/// Test MSE of both estimators on a custom DGP spec (used by debug ids and
/// the noise-free variants).
pub fn mse_for_spec(spec: &DgpSpec, kind: Penalty) -> Result<f64> {
    let (train_raw, test_raw) = gen_dgp(spec);
    let scaler = scale_fit(&train_raw);
    let train = scale_apply(&scaler, &train_raw)?;
    let (test_x, _) = scaler.transform_counting(test_raw.x())?;
    let folds = make_folds(spec.n_train, 5, rng::derive_seed(spec.seed, &[2]))?;
    let mut options = FitOptions::new(kind);
    options.fixed_m = Some(spec.id.dimension());
    let (model, _) = fit_scaled(&train, scaler, &folds, &options)?;
    let pred = model.predict_scaled(test_x.view())?;
    Ok(pred
        .iter()
        .zip(test_raw.y().iter())
        .map(|(p, y)| (y - p) * (y - p))
        .sum::<f64>()
        / spec.n_test as f64)
}

/// Overlay data for the leading eigenvectors of a totally ordered sample:
/// numerically computed versus the closed-form discrete sine vectors.
#[derive(Debug, Clone, Copy)]
pub struct EigenOverlayRow {
    pub index: usize,
    pub component: usize,
    pub numerical: f64,
    pub closed_form: f64,
}

pub fn eigen_overlay(n: usize, d: usize, components: usize) -> Result<Vec<EigenOverlayRow>> {
    let x = Array2::from_shape_fn((n, d), |(i, _)| (i as f64 + 1.0) / (n as f64 + 1.0));
    let g = gram(x.view(), &KernelConfig::new(d))?;
    let spectrum = eig_sym(&g)?;
    let closed = sine_eigensystem(n, d);
    let k_max = components.min(spectrum.r());
    let mut rows = Vec::with_capacity(n * k_max);
    for k in 0..k_max {
        let num = spectrum.eigenvectors().column(k);
        let sin = closed.eigenvectors().column(k);
        let dot: f64 = num.dot(&sin);
        let sign = if dot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            rows.push(EigenOverlayRow {
                index: i + 1,
                component: k + 1,
                numerical: sign * num[i],
                closed_form: sin[i],
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d1_signal_at_origin() {
        // 0.35*0 + sin 0 + 0.4 cos 0 + 0.2 saw(0) - 0.3 sigmoid(-7.8)
        let expected = 0.4 - 0.3 * sigmoid(-7.8);
        assert!((DgpId::D1.signal(&[0.0]) - expected).abs() < 1e-15);
    }

    #[test]
    fn d6_signal_at_nine_tenths() {
        let x = [0.9; 6];
        assert!((DgpId::D6.signal(&x) - 1.3).abs() < 1e-15);
    }

    #[test]
    fn interaction3_plug_in_value() {
        assert!((DgpId::Interaction3.signal(&[1.0, 1.0, 1.0]) - 0.85).abs() < 1e-15);
    }

    #[test]
    fn d7_linspace_endpoints() {
        use std::f64::consts::PI;
        // first term has A=7, w=1; last has A=13, w=0.4
        let mut x = [0.0; 7];
        x[0] = 0.5;
        // sum = sin(3.5 pi) = -1; pairwise terms: 0.2*0*(-0.5) - 0.2*(-0.5)(-0.5)
        let expected = (3.5 * PI).sin() - 0.05;
        assert!((DgpId::D7.signal(&x) - expected).abs() < 1e-12);

        let mut x = [0.0; 7];
        x[6] = 0.5;
        // sum = 0.4 sin(6.5 pi) = 0.4; pairwise: 0.2*(-0.5)(-0.5) - 0.2*(-0.5)*0
        let expected = 0.4 * (6.5 * PI).sin() + 0.05;
        assert!((DgpId::D7.signal(&x) - expected).abs() < 1e-12);
    }

    #[test]
    fn saw_convention() {
        assert_eq!(saw(0.0), 0.0);
        assert_eq!(saw(0.25), 0.5);
        assert_eq!(saw(0.5), -1.0);
        assert_eq!(saw(1.0), 0.0);
        assert!((saw(0.499) - 0.998).abs() < 1e-12);
    }

    #[test]
    fn generation_is_deterministic_and_split_independent() {
        let spec = DgpSpec::new(DgpId::D2, 20, 10, 99);
        let (tr1, te1) = gen_dgp(&spec);
        let (tr2, te2) = gen_dgp(&spec);
        assert_eq!(tr1.x(), tr2.x());
        assert_eq!(te1.y(), te2.y());
        assert_ne!(tr1.x()[[0, 0]].to_bits(), te1.x()[[0, 0]].to_bits());
    }

    #[test]
    fn noise_free_variant_shares_the_design() {
        let mut spec = DgpSpec::new(DgpId::D3, 15, 5, 7);
        let (noisy, _) = gen_dgp(&spec);
        spec.noise_scale = 0.0;
        let (clean, _) = gen_dgp(&spec);
        assert_eq!(noisy.x(), clean.x());
        for (i, y) in clean.y().iter().enumerate() {
            let row: Vec<f64> = clean.x().row(i).to_vec();
            assert_eq!(*y, DgpId::D3.signal(&row));
        }
    }

    #[test]
    fn interaction3_covariates_live_in_minus_one_one() {
        let spec = DgpSpec::new(DgpId::Interaction3, 50, 5, 3);
        let (train, _) = gen_dgp(&spec);
        assert!(train.x().iter().all(|&v| (-1.0..1.0).contains(&v)));
    }

    #[test]
    fn constant_debug_dgp_fits_to_machine_precision() {
        let spec = DgpSpec::new(DgpId::Const, 25, 40, 11);
        let mse = mse_for_spec(&spec, Penalty::Lasso).unwrap();
        assert!(mse < 1e-10, "mse={mse}");
    }

    #[test]
    fn additive_signal_mostly_selects_first_order() {
        // no interactions in the signal, so the forward search should stop
        // at m = 1 most of the time
        use crate::data::{make_folds, scale_apply, scale_fit, Dataset};
        use crate::tuning::{profile_m, ProfileOptions, TuningGrid};
        use ndarray::Array2;
        let mut first_order = 0usize;
        let reps = 5;
        for rep in 0..reps {
            let mut rng = crate::rng::stream(71, &[rep]);
            let n = 60;
            let x: Array2<f64> = Array2::from_shape_fn((n, 3), |_| rng.random_range(0.0..1.0));
            let y = Array1::from_shape_fn(n, |i| {
                (3.0 * x[[i, 0]]).sin() + x[[i, 1]] - 0.5 * x[[i, 2]]
                    + 0.05 * rng.sample::<f64, _>(StandardNormal)
            });
            let raw = Dataset::new(x, y, None).unwrap();
            let scaler = scale_fit(&raw);
            let data = scale_apply(&scaler, &raw).unwrap();
            let folds = make_folds(n, 5, rep).unwrap();
            let grid = TuningGrid::default_for(n, 3);
            let report =
                profile_m(&data, &grid, &folds, Penalty::Lasso, &ProfileOptions::default())
                    .unwrap();
            if report.selected.m == 1 {
                first_order += 1;
            }
        }
        assert!(
            first_order * 2 > reps as usize,
            "first order selected only {first_order}/{reps} times"
        );
    }

    #[test]
    fn single_replicate_experiment_is_reproducible() {
        let a = run_interaction_experiment(&[40], 1, 5, Penalty::Lasso).unwrap();
        let b = run_interaction_experiment(&[40], 1, 5, Penalty::Lasso).unwrap();
        assert_eq!(a.rows[0].cv_m, b.rows[0].cv_m);
        assert_eq!(a.rows[0].oracle_m, b.rows[0].oracle_m);
        for m in 0..3 {
            assert_eq!(a.cv_freq[0][m], b.cv_freq[0][m]);
        }
        let total: f64 = a.cv_freq[0].iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_overlay_matches_closed_form() {
        let rows = eigen_overlay(40, 1, 6).unwrap();
        assert_eq!(rows.len(), 240);
        for row in rows {
            assert!(
                (row.numerical - row.closed_form).abs() < 1e-6,
                "component {} index {}",
                row.component,
                row.index
            );
        }
    }
}
