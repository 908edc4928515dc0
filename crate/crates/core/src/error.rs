use thiserror::Error;

/// Errors produced by the delaymat library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square: {rows} rows, row {row} has {cols} columns")]
    NonSquare { rows: usize, row: usize, cols: usize },

    #[error("matrix has zero dimension")]
    EmptyMatrix,

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("binomial coefficient C({n}, {k}) overflows a 128-bit integer")]
    BinomialOverflow { n: i64, k: u64 },

    #[error("polynomial degree {degree} exceeds the cap of {cap}")]
    DegreeCap { degree: usize, cap: usize },

    #[error("invalid breakpoints: {0}")]
    InvalidBreakpoints(String),

    #[error("invalid delay: {0}")]
    InvalidDelay(String),

    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),

    #[error("operation requires a {expected} system")]
    WrongKind { expected: &'static str },

    #[error("matrices do not commute: residual {residual:e} exceeds tolerance {tol:e}")]
    NotCommuting { residual: f64, tol: f64 },

    #[error("hypothesis `{which}` violated: residual {residual:e} exceeds tolerance {tol:e}")]
    HypothesisViolated {
        which: &'static str,
        residual: f64,
        tol: f64,
    },

    #[error("invalid history: {0}")]
    InvalidHistory(String),

    #[error("invalid forcing: {0}")]
    InvalidForcing(String),

    #[error("not representable as a piecewise polynomial: {0}")]
    Unrepresentable(String),

    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
