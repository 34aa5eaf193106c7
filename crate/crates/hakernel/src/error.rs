//! Error type shared across the crate.

use thiserror::Error;

/// Coarse classification used by front ends to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Caller passed an argument outside its documented range.
    Usage,
    /// Input data could not be read or fails a structural precondition.
    Data,
    /// A numeric routine failed or no feasible solution exists.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("data: failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("data: {path}: {detail}")]
    Csv { path: String, detail: String },

    #[error("data: non-numeric value {value:?} at row {row}, column {column}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("data: non-finite value at row {row}, column {column}")]
    NonFiniteCell { row: usize, column: String },

    #[error("data: response column {name:?} not found (columns: {available})")]
    ResponseColumnNotFound { name: String, available: String },

    #[error("data: table has no data rows")]
    EmptyTable,

    #[error("data: {context}: expected {expected} features, got {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("data: fold count {v} out of range for n={n} (need 2 <= V <= n)")]
    InvalidFoldCount { v: usize, n: usize },

    #[error("hal_design: interaction order m={m} out of range for d={d} (need 1 <= m <= d)")]
    InvalidInteractionOrder { m: usize, d: usize },

    #[error(
        "hal_design: design of {entries} entries exceeds the {budget}-entry budget; \
         use the kernel path instead"
    )]
    DesignBudgetExceeded { entries: u128, budget: u128 },

    #[error("ha_kernel: non-finite entry in covariate matrix at row {row}")]
    NonFiniteInput { row: usize },

    #[error("ha_kernel: subset-count weights overflow u64 at d={d}, m={m}")]
    WeightOverflow { d: usize, m: usize },

    #[error("ha_kernel: expected a square uncentered Gram matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("spectral: matrix is not symmetric (max asymmetry {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("spectral: symmetric eigendecomposition failed to converge")]
    EigenFailed,

    #[error("estimators: rank k={k} out of range (numerical rank {r})")]
    RankOutOfRange { k: usize, r: usize },

    #[error("estimators: penalty lambda={lambda} out of range ({requirement})")]
    InvalidPenalty { lambda: f64, requirement: &'static str },

    #[error("estimators: coordinate descent did not converge within {sweeps} sweeps")]
    CdNonConvergence { sweeps: usize },

    #[error("tuning: no feasible (k, lambda) cell: {detail}")]
    NoFeasibleCell { detail: String },

    #[error("tuning: {0}")]
    InvalidGrid(String),

    #[error("simulation: unknown DGP id {0:?}")]
    UnknownDgp(String),

    #[error("model: {0}")]
    Model(String),
}

impl Error {
    /// Which exit-code class this error belongs to.
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            Io { .. }
            | Csv { .. }
            | NonNumericCell { .. }
            | NonFiniteCell { .. }
            | ResponseColumnNotFound { .. }
            | EmptyTable
            | DimensionMismatch { .. }
            | NonFiniteInput { .. }
            | Model(_) => ErrorClass::Data,
            InvalidFoldCount { .. }
            | InvalidInteractionOrder { .. }
            | InvalidGrid(_)
            | UnknownDgp(_)
            | RankOutOfRange { .. }
            | InvalidPenalty { .. } => ErrorClass::Usage,
            DesignBudgetExceeded { .. }
            | WeightOverflow { .. }
            | NotSquare { .. }
            | NotSymmetric { .. }
            | EigenFailed
            | CdNonConvergence { .. }
            | NoFeasibleCell { .. } => ErrorClass::Numeric,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
