use thiserror::Error;

/// Errors produced by dataset validation, fitting, evaluation, and audits.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("ragged row {row}: expected {expected} coordinates, got {got}")]
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error("non-finite coordinate at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("size mismatch: {left} rows vs {right} rows")]
    SizeMismatch { left: usize, right: usize },

    #[error("sensitive label count {labels} does not match row count {rows}")]
    LabelCountMismatch { labels: usize, rows: usize },

    #[error("sensitive labels must be 0 or 1, found {found}")]
    InvalidLabel { found: u8 },

    #[error("need at least one row in each group, found only group {only}")]
    SingleGroup { only: u8 },

    #[error("need at least 2 paired points to fit, got {n}")]
    TooFewPoints { n: usize },

    #[error(
        "degenerate sample: strict-convexity margin {eps0:e} is not positive beyond \
         tolerance {tol:e}; deduplicate or jitter the input points"
    )]
    DegenerateSample { eps0: f64, tol: f64 },

    #[error("negative cycle in reduced cost graph (margin too large or numerical drift)")]
    NegativeCycle,

    #[error("potential validation failed: constraint violation {violation:e} exceeds {tol:e}")]
    InfeasiblePotentials { violation: f64, tol: f64 },

    #[error(
        "prox did not reach certified gap {tol:e} within {iters} iterations (best gap {gap:e})"
    )]
    ProxNoCertificate { gap: f64, tol: f64, iters: usize },

    #[error("point has {got} coordinates, map expects {expected}")]
    PointDim { expected: usize, got: usize },

    #[error("query point has a non-finite coordinate at position {col}")]
    NonFiniteQuery { col: usize },

    #[error("transform failed on {} row(s), first at index {first}: {source}", rows.len())]
    TransformRows {
        rows: Vec<usize>,
        first: usize,
        source: Box<Error>,
    },

    #[error("prediction list length {got} does not match dataset size {expected}")]
    PredictionLength { expected: usize, got: usize },

    #[error("prediction values must be 0 or 1, found {found}")]
    InvalidPrediction { found: u8 },

    #[error("classifier weight vector has {got} coordinates, data has {expected}")]
    ClassifierDim { expected: usize, got: usize },

    #[error("repair weight w0 = {w0} outside [0, 1]")]
    WeightRange { w0: f64 },

    #[error("invalid model data: {0}")]
    InvalidModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;
