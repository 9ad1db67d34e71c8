use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse grouping used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unparseable row {row}: {reason}")]
    Parse { row: usize, reason: String },
    #[error("non-positive value at row {row} ({value}); log-returns need strictly positive levels, consider flooring zeros at 1")]
    NonPositive { row: usize, value: f64 },
    #[error("duplicate date {date} at row {row}")]
    DuplicateDate { row: usize, date: String },
    #[error("series too short: need at least {need} points, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("the two series share no dates")]
    EmptyIntersection,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("log-ECF unusable at u = {u} (|ecf| = {modulus:.3e} here, floor {floor:.3e}): the modulus falls below the floor at or before this frequency, so the cutoff exceeds the reliable range")]
    ModulusBelowFloor { u: f64, modulus: f64, floor: f64 },
    #[error("degenerate regressors: {0}")]
    Degenerate(String),
    #[error("jump density not identifiable: lambda_hat = {0}")]
    NotIdentifiable(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("no central region where the no-jump density dominates")]
    NoDominanceRegion,
    #[error("too few observations: {0}")]
    TooFewObservations(String),
    #[error("no usable cutoff candidate ({0} tried)")]
    NoUsableCandidate(usize),
    #[error("config error: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) => ErrorCategory::Usage,
            Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::MissingColumn(_)
            | Error::Parse { .. }
            | Error::NonPositive { .. }
            | Error::DuplicateDate { .. }
            | Error::TooShort { .. }
            | Error::EmptyIntersection
            | Error::GridMismatch(_)
            | Error::TooFewObservations(_) => ErrorCategory::Data,
            Error::ModulusBelowFloor { .. }
            | Error::Degenerate(_)
            | Error::NotIdentifiable(_)
            | Error::NoDominanceRegion
            | Error::NoUsableCandidate(_) => ErrorCategory::Numerical,
            Error::Stage { source, .. } => source.category(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
