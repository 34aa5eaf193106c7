//! Command-line front end for the indicator-kernel regression toolkit.
//!
//! Subcommands: `fit` (tune and persist a model), `predict`, `tune` (report
//! only), `simulate` (selection study / MSE benchmark / eigenvector overlay),
//! and `bench` (the full benchmark grid). Every command is a pure function of
//! its input files, flags, and seed.
//!
//! Exit codes: 0 success, 2 usage, 3 data, 4 numeric.

mod model_file;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hakernel::data::{load_csv, ResponseColumn};
use hakernel::design::build_design;
use hakernel::error::ErrorClass;
use hakernel::estimators::Penalty;
use hakernel::kernel::{gram, KernelConfig};
use hakernel::simulate::{eigen_overlay, run_interaction_experiment, run_mse_benchmark};
use hakernel::spectral::eig_sym;
use hakernel::tuning::{FitOptions, SelectKBy};
use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] hakernel::Error),
    #[error("data: {0}: {1}")]
    Io(String, std::io::Error),
    #[error("model: {0}")]
    Model(String),
    #[error("usage: {0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(..) | CliError::Model(_) => 3,
            CliError::Core(e) => match e.class() {
                ErrorClass::Usage => 2,
                ErrorClass::Data => 3,
                ErrorClass::Numeric => 4,
            },
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hakernel",
    version,
    about = "Nonparametric regression on the indicator-basis kernel with closed-form principal-component estimators"
)]
struct Cli {
    /// Worker threads (0 = all cores). Falls back to HAKERNEL_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct TuneArgs {
    /// Training data (CSV with a header row).
    train: PathBuf,

    /// Response column, by name or 1-based index.
    #[arg(long)]
    response: String,

    /// Estimator: pchal (soft threshold) or pchar (ridge).
    #[arg(long, default_value = "pchal")]
    kind: String,

    /// Fix the interaction order instead of profiling it.
    #[arg(long)]
    m: Option<usize>,

    /// Cap on the profiled interaction order (default: number of features).
    #[arg(long)]
    m_max: Option<usize>,

    /// Cross-validation folds.
    #[arg(long, default_value_t = 5)]
    folds: usize,

    /// Seed for the fold shuffle.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Comma-separated rank candidates (default: automatic).
    #[arg(long)]
    k_grid: Option<String>,

    /// Comma-separated penalty grid (default: 25 log-spaced in [1e-9, 10]).
    #[arg(long)]
    lambda_grid: Option<String>,

    /// Rank selection rule: train (training MSE) or cv (CV risk).
    #[arg(long, default_value = "train")]
    select_k_by: String,

    /// Evaluate every interaction order instead of stopping at the first
    /// non-improvement.
    #[arg(long)]
    no_early_stop: bool,

    /// Write the full tuning table as CSV.
    #[arg(long)]
    dump_tuning: Option<PathBuf>,

    /// Write the uncentered Gram matrix of the selected order as CSV.
    #[arg(long)]
    dump_gram: Option<PathBuf>,

    /// Write the eigenvalues of the centered Gram as CSV.
    #[arg(long)]
    dump_spectrum: Option<PathBuf>,

    /// Write the explicit indicator design matrix as CSV (small data only).
    #[arg(long)]
    dump_design: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Tune, fit, and persist a model.
    Fit {
        #[command(flatten)]
        tune: TuneArgs,

        /// Output model file.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Predict at new points with a saved model.
    Predict {
        /// Model file written by `fit`.
        model: PathBuf,

        /// New covariates (CSV with a header row).
        new: PathBuf,

        /// Output CSV of predictions.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the tuning search and write the report without fitting a model.
    Tune {
        #[command(flatten)]
        tune: TuneArgs,

        /// Output CSV report.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Reproduce the simulation experiments.
    Simulate {
        /// Which experiment: interaction or mse.
        #[arg(long)]
        experiment: String,

        /// Training sizes (default: 100,300,800 for interaction, 200 for mse).
        #[arg(long)]
        ns: Option<String>,

        /// Signal dimensions (mse experiment).
        #[arg(long, default_value = "1,2,3")]
        dims: String,

        /// Replicates per scenario.
        #[arg(long)]
        reps: Option<usize>,

        /// Master seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Estimator for the interaction experiment.
        #[arg(long, default_value = "pchal")]
        kind: String,

        /// Also emit figure data: `eigen` writes the numerical-vs-closed-form
        /// eigenvector overlay.
        #[arg(long)]
        figure: Option<String>,

        /// Sample size for the eigenvector overlay.
        #[arg(long, default_value_t = 100)]
        figure_n: usize,

        /// Output directory.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Full MSE benchmark grid (all dimensions and sample sizes).
    Bench {
        #[arg(long, default_value = "1,2,3,4,5,6,7,8,9,10")]
        dims: String,

        #[arg(long, default_value = "200,400,600")]
        ns: String,

        #[arg(long, default_value_t = 5)]
        reps: usize,

        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Output directory.
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads(cli.threads);
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn configure_threads(flag: Option<usize>) {
    let requested = flag.or_else(|| {
        std::env::var("HAKERNEL_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = requested {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            faer::set_global_parallelism(faer::Par::rayon(n));
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Fit { tune, output } => cmd_fit(&tune, &output),
        Command::Predict { model, new, output } => cmd_predict(&model, &new, &output),
        Command::Tune { tune, output } => cmd_tune(&tune, &output),
        Command::Simulate {
            experiment,
            ns,
            dims,
            reps,
            seed,
            kind,
            figure,
            figure_n,
            output,
        } => cmd_simulate(
            &experiment,
            ns.as_deref(),
            &dims,
            reps,
            seed,
            &kind,
            figure.as_deref(),
            figure_n,
            &output,
        ),
        Command::Bench {
            dims,
            ns,
            reps,
            seed,
            output,
        } => cmd_bench(&dims, &ns, reps, seed, &output),
    }
}

fn parse_kind(s: &str) -> Result<Penalty, CliError> {
    Penalty::parse(s)
        .ok_or_else(|| CliError::Usage(format!("unknown estimator kind {s:?} (pchal|pchar)")))
}

fn parse_select_k_by(s: &str) -> Result<SelectKBy, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "train" => Ok(SelectKBy::TrainMse),
        "cv" => Ok(SelectKBy::CvRisk),
        other => Err(CliError::Usage(format!(
            "unknown --select-k-by value {other:?} (train|cv)"
        ))),
    }
}

fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| CliError::Usage(format!("bad {what} entry {t:?}")))
        })
        .collect()
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad {what} entry {t:?}")))
        })
        .collect()
}

fn fit_options(args: &TuneArgs) -> Result<FitOptions, CliError> {
    let kind = parse_kind(&args.kind)?;
    let mut options = FitOptions::new(kind);
    options.fixed_m = args.m;
    options.m_max = args.m_max;
    options.v_folds = args.folds;
    options.seed = args.seed;
    options.select_k_by = parse_select_k_by(&args.select_k_by)?;
    options.stop_early = !args.no_early_stop;
    if let Some(ks) = &args.k_grid {
        options.k_candidates = Some(parse_usize_list(ks, "--k-grid")?);
    }
    if let Some(ls) = &args.lambda_grid {
        options.lambda_grid = Some(parse_f64_list(ls, "--lambda-grid")?);
    }
    Ok(options)
}

fn create_file(path: &Path) -> Result<fs::File, CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        }
    }
    fs::File::create(path).map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn print_report_summary(report: &hakernel::tuning::TuningReport) {
    println!(
        "selected: kind={} m={} k={} lambda={}",
        report.kind, report.selected.m, report.selected.k, report.selected.lambda
    );
    println!(
        "cv_risk={} train_mse={} folds={} seed={}{}",
        report.selected.cv_risk,
        report.selected.train_mse,
        report.v_folds,
        report.fold_seed,
        if report.stopped_early {
            " (stopped at first non-improving order)"
        } else {
            ""
        }
    );
    for (m, risk) in report.profiled_risk_of_m() {
        match risk {
            Some(r) => println!("profiled cv risk m={m}: {r}"),
            None => println!("profiled cv risk m={m}: infeasible"),
        }
    }
}

fn write_dumps(
    args: &TuneArgs,
    data: &hakernel::data::Dataset,
    report: &hakernel::tuning::TuningReport,
) -> Result<(), CliError> {
    // dumps recompute on the scaled data at the selected order
    let selected_m = report.selected.m;
    if let Some(path) = &args.dump_tuning {
        let mut f = create_file(path)?;
        report
            .write_csv(&mut f)
            .map_err(|e| CliError::Io(path.display().to_string(), e))?;
    }
    if args.dump_gram.is_some() || args.dump_spectrum.is_some() {
        let scaler = hakernel::data::scale_fit(data);
        let scaled = hakernel::data::scale_apply(&scaler, data)?;
        let uncentered = gram(scaled.x().view(), &KernelConfig::new(selected_m))?;
        if let Some(path) = &args.dump_gram {
            let mut f = create_file(path)?;
            for row in uncentered.matrix().rows() {
                let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                writeln!(f, "{}", line.join(","))
                    .map_err(|e| CliError::Io(path.display().to_string(), e))?;
            }
        }
        if let Some(path) = &args.dump_spectrum {
            let centered = hakernel::kernel::center_gram(&uncentered)?;
            let spectrum = eig_sym(&centered)?;
            let mut f = create_file(path)?;
            writeln!(f, "component,eigenvalue")
                .map_err(|e| CliError::Io(path.display().to_string(), e))?;
            for (j, v) in spectrum.eigenvalues().iter().enumerate() {
                writeln!(f, "{},{}", j + 1, v)
                    .map_err(|e| CliError::Io(path.display().to_string(), e))?;
            }
        }
    }
    if let Some(path) = &args.dump_design {
        let scaler = hakernel::data::scale_fit(data);
        let scaled = hakernel::data::scale_apply(&scaler, data)?;
        let design = build_design(scaled.x().view(), scaled.x().view(), selected_m)?;
        let mut f = create_file(path)?;
        let subsets = design.subsets();
        let mut header = Vec::with_capacity(design.n_columns());
        for subset in subsets.subsets() {
            let label: Vec<String> = subset.iter().map(|j| (j + 1).to_string()).collect();
            for i in 0..design.n_knots() {
                header.push(format!("s{}_k{}", label.join("+"), i + 1));
            }
        }
        writeln!(f, "{}", header.join(","))
            .map_err(|e| CliError::Io(path.display().to_string(), e))?;
        for row in design.bits().rows() {
            let line: Vec<String> = row.iter().map(|b| b.to_string()).collect();
            writeln!(f, "{}", line.join(","))
                .map_err(|e| CliError::Io(path.display().to_string(), e))?;
        }
    }
    Ok(())
}

fn cmd_fit(args: &TuneArgs, output: &Path) -> Result<(), CliError> {
    let data = load_csv(&args.train, &ResponseColumn::Name(args.response.clone()))?;
    let options = fit_options(args)?;
    let (model, report) = hakernel::tuning::fit_dataset(&data, &options)?;
    if let Some(parent) = output.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(output.display().to_string(), e))?;
        }
    }
    model_file::save_model(&model, output)?;
    print_report_summary(&report);
    println!("model written to {}", output.display());
    write_dumps(args, &data, &report)?;
    Ok(())
}

fn cmd_tune(args: &TuneArgs, output: &Path) -> Result<(), CliError> {
    let data = load_csv(&args.train, &ResponseColumn::Name(args.response.clone()))?;
    let options = fit_options(args)?;
    let (_, report) = hakernel::tuning::fit_dataset(&data, &options)?;
    let mut f = create_file(output)?;
    report
        .write_csv(&mut f)
        .map_err(|e| CliError::Io(output.display().to_string(), e))?;
    print_report_summary(&report);
    write_dumps(args, &data, &report)?;
    Ok(())
}

/// Read prediction covariates: by stored feature names when the model has
/// them and the header matches, otherwise by column order.
fn read_prediction_matrix(
    path: &Path,
    names: Option<&[String]>,
    d: usize,
) -> Result<Array2<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io(path.display().to_string(), std::io::Error::other(e)))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Model(e.to_string()))?
        .iter()
        .map(|h| h.to_string())
        .collect();

    let columns: Vec<usize> = match names {
        Some(names) if names.iter().all(|n| headers.contains(n)) => names
            .iter()
            .map(|n| headers.iter().position(|h| h == n).unwrap())
            .collect(),
        _ => {
            if headers.len() != d {
                return Err(CliError::Core(hakernel::Error::DimensionMismatch {
                    context: format!("prediction file {}", path.display()),
                    expected: d,
                    found: headers.len(),
                }));
            }
            (0..d).collect()
        }
    };

    let mut values: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            CliError::Core(hakernel::Error::Csv {
                path: path.display().to_string(),
                detail: format!("row {}: {e}", row_idx + 1),
            })
        })?;
        for &col in &columns {
            let field = record.get(col).unwrap_or("");
            let v: f64 = field.parse().map_err(|_| {
                CliError::Core(hakernel::Error::NonNumericCell {
                    row: row_idx + 1,
                    column: headers[col].clone(),
                    value: field.to_string(),
                })
            })?;
            values.push(v);
        }
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, d), values).expect("row-major fill"))
}

fn cmd_predict(model_path: &Path, new_path: &Path, output: &Path) -> Result<(), CliError> {
    let model = model_file::load_model(model_path)?;
    let x_new = read_prediction_matrix(
        new_path,
        model.feature_names.as_deref(),
        model.scaler.d(),
    )?;
    let mut f = create_file(output)?;
    writeln!(f, "prediction").map_err(|e| CliError::Io(output.display().to_string(), e))?;
    if x_new.nrows() > 0 {
        let prediction = model.predict(x_new.view())?;
        if prediction.clamped_rows > 0 {
            eprintln!(
                "warning: {} row(s) had features outside the training range and were clamped",
                prediction.clamped_rows
            );
        }
        for v in prediction.values.iter() {
            writeln!(f, "{v}").map_err(|e| CliError::Io(output.display().to_string(), e))?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    experiment: &str,
    ns: Option<&str>,
    dims: &str,
    reps: Option<usize>,
    seed: u64,
    kind: &str,
    figure: Option<&str>,
    figure_n: usize,
    output: &Path,
) -> Result<(), CliError> {
    fs::create_dir_all(output).map_err(|e| CliError::Io(output.display().to_string(), e))?;
    match experiment {
        "interaction" => {
            let ns = parse_usize_list(ns.unwrap_or("100,300,800"), "--ns")?;
            let kind = parse_kind(kind)?;
            let reps = reps.unwrap_or(20);
            let result = run_interaction_experiment(&ns, reps, seed, kind)?;
            let oracle_path = output.join("interaction_oracle.csv");
            result
                .write_frequency_csv(create_file(&oracle_path)?, "oracle")
                .map_err(|e| CliError::Io(oracle_path.display().to_string(), e))?;
            let cv_path = output.join("interaction_cv.csv");
            result
                .write_frequency_csv(create_file(&cv_path)?, "cv")
                .map_err(|e| CliError::Io(cv_path.display().to_string(), e))?;
            let runs_path = output.join("interaction_runs.csv");
            result
                .write_rows_csv(create_file(&runs_path)?)
                .map_err(|e| CliError::Io(runs_path.display().to_string(), e))?;
            println!("interaction-order selection frequencies ({reps} replicates, seed {seed})");
            println!("n,selector,m1,m2,m3");
            for (i, n) in result.ns.iter().enumerate() {
                let o = result.oracle_freq[i];
                let c = result.cv_freq[i];
                println!("{n},oracle,{},{},{}", o[0], o[1], o[2]);
                println!("{n},cv,{},{},{}", c[0], c[1], c[2]);
            }
        }
        "mse" => {
            let dims = parse_usize_list(dims, "--dims")?;
            let ns = parse_usize_list(ns.unwrap_or("200"), "--ns")?;
            let reps = reps.unwrap_or(5);
            let result = run_mse_benchmark(&dims, &ns, reps, seed)?;
            let runs_path = output.join("mse_runs.csv");
            result
                .write_rows_csv(create_file(&runs_path)?)
                .map_err(|e| CliError::Io(runs_path.display().to_string(), e))?;
            let summary_path = output.join("mse_summary.csv");
            result
                .write_summary_csv(create_file(&summary_path)?)
                .map_err(|e| CliError::Io(summary_path.display().to_string(), e))?;
            println!("mean test MSE ({reps} replicates, seed {seed})");
            println!("method,d,n,mean_mse");
            for &(d, n, pchal, pchar) in &result.means {
                println!("pchal,{d},{n},{pchal}");
                println!("pchar,{d},{n},{pchar}");
            }
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown experiment {other:?} (interaction|mse)"
            )))
        }
    }
    if let Some(fig) = figure {
        match fig {
            "eigen" => {
                let rows = eigen_overlay(figure_n, 1, 6)?;
                let fig_path = output.join("figure_eigen.csv");
                let mut f = create_file(&fig_path)?;
                writeln!(f, "index,component,numerical,closed_form")
                    .map_err(|e| CliError::Io(fig_path.display().to_string(), e))?;
                for r in rows {
                    writeln!(
                        f,
                        "{},{},{},{}",
                        r.index, r.component, r.numerical, r.closed_form
                    )
                    .map_err(|e| CliError::Io(fig_path.display().to_string(), e))?;
                }
            }
            other => {
                return Err(CliError::Usage(format!(
                    "unknown figure {other:?} (eigen)"
                )))
            }
        }
    }
    Ok(())
}

fn cmd_bench(dims: &str, ns: &str, reps: usize, seed: u64, output: &Path) -> Result<(), CliError> {
    fs::create_dir_all(output).map_err(|e| CliError::Io(output.display().to_string(), e))?;
    let dims = parse_usize_list(dims, "--dims")?;
    let ns = parse_usize_list(ns, "--ns")?;
    let result = run_mse_benchmark(&dims, &ns, reps, seed)?;
    let runs_path = output.join("mse_runs.csv");
    result
        .write_rows_csv(create_file(&runs_path)?)
        .map_err(|e| CliError::Io(runs_path.display().to_string(), e))?;
    let summary_path = output.join("mse_summary.csv");
    result
        .write_summary_csv(create_file(&summary_path)?)
        .map_err(|e| CliError::Io(summary_path.display().to_string(), e))?;
    println!("benchmark complete: {} scenario means", result.means.len());
    for &(d, n, pchal, pchar) in &result.means {
        println!("pchal,{d},{n},{pchal}");
        println!("pchar,{d},{n},{pchar}");
    }
    Ok(())
}
