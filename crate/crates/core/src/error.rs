use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("malformed CSV in {path}: {reason}")]
    MalformedCsv { path: String, reason: String },
    #[error("no valid rows in {0}")]
    NoValidRows(String),
    #[error("duplicate date {date} in {source_name}")]
    DuplicateDate { date: NaiveDate, source_name: String },
    #[error("series too short: need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("date intersection of the series is empty")]
    EmptyIntersection,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate mixture component {component}: {reason}")]
    DegenerateComponent { component: usize, reason: String },
    #[error("non-finite likelihood: {0}")]
    NonFiniteLikelihood(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("singular regression matrix in {0}")]
    SingularMatrix(&'static str),
    #[error("dummy series misaligned with returns: {0}")]
    MisalignedDummy(String),
    #[error("non-finite value in volatility recursion at t = {t}")]
    NonFiniteRecursion { t: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
