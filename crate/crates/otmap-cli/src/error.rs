//! Command-line error type. Every failure exits nonzero and prints a single
//! machine-parsable JSON record to stderr; `kind` is stable, `message` is for
//! humans.

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot access {0}: {1}")]
    Io(String, String),
    #[error("cannot parse {0}: {1}")]
    Csv(String, String),
    #[error("{path}: row {row}, column {column}: {value:?} is not a number")]
    BadCell {
        path: String,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{path}: no column named {column:?}")]
    MissingColumn { path: String, column: String },
    #[error("{path}: row {row}: sensitive value {value:?} is not 0 or 1")]
    BadSensitiveValue {
        path: String,
        row: usize,
        value: String,
    },
    #[error("{path}: row {row}: prediction {value} is not 0 or 1")]
    BadPrediction { path: String, row: usize, value: f64 },
    #[error("model file {path}: {reason}")]
    Model { path: String, reason: String },
    #[error("classifier file {path}: {reason}")]
    Classifier { path: String, reason: String },
    #[error("invalid flag value: {0}")]
    Flag(String),
    #[error("unknown synthetic family {0:?}")]
    Family(String),
    #[error("covariance matrix is not positive definite (pivot {pivot:e})")]
    NotPositiveDefinite { pivot: f64 },
    #[error(transparent)]
    Core(#[from] otmap::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    kind: &'a str,
    message: String,
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io(..) => "io",
            CliError::Csv(..) => "csv",
            CliError::BadCell { .. } => "bad-cell",
            CliError::MissingColumn { .. } => "missing-column",
            CliError::BadSensitiveValue { .. } => "bad-sensitive-value",
            CliError::BadPrediction { .. } => "bad-prediction",
            CliError::Model { .. } => "model",
            CliError::Classifier { .. } => "classifier",
            CliError::Flag(..) => "flag",
            CliError::Family(..) => "family",
            CliError::NotPositiveDefinite { .. } => "not-positive-definite",
            CliError::Core(..) => "core",
        }
    }

    /// The JSON record printed to stderr on failure.
    pub fn to_record(&self) -> String {
        let record = ErrorRecord {
            error: "otmap",
            kind: self.kind(),
            message: self.to_string(),
        };
        serde_json::to_string(&record).unwrap_or_else(|_| {
            "{\"error\":\"otmap\",\"kind\":\"internal\",\"message\":\"unprintable error\"}"
                .to_string()
        })
    }
}
