use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point t = {0} is outside the punctured unit disc")]
    OutsideDisc(Complex64),

    #[error("invalid term: {0}")]
    InvalidTerm(String),

    #[error("expansion is empty")]
    EmptyExpansion,

    #[error("power map exponent must be positive, got {0}")]
    InvalidPower(i64),

    #[error("expansion is not in the pure-log class: {0}")]
    NotPureLogClass(String),

    #[error("leading order not determined at this truncation: every constant jet vanishes")]
    LeadingOrderUndetermined,

    #[error("function is not positive at t = {t}: value {value}")]
    NotPositive { t: Complex64, value: f64 },

    #[error("leading coefficient is not a positive real leading value: {0}")]
    NonPositiveLeading(String),

    #[error("denominator vanishes at t = {0}")]
    ZeroDenominator(Complex64),

    #[error("sample grid is empty")]
    EmptyGrid,

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("matrix dimension {0} exceeds the permutation-determinant cap of 6")]
    DimensionTooLarge(usize),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("metric is numerically singular or indefinite at t = {t} (condition {condition:e})")]
    SingularMetric { t: Complex64, condition: f64 },

    #[error("N is not nilpotent of order n + 1 = {0}")]
    NotNilpotent(usize),

    #[error("pairing data not single-valued at (j, k, m') = ({j}, {k}, {m}), disagreement at a = {a}")]
    NotSingleValued { j: usize, k: usize, m: usize, a: usize },

    #[error("log degree {found} exceeds the bound {bound}")]
    LogDegreeBound { found: u32, bound: u32 },

    #[error("duplicate cohomological degree q = {0}")]
    DuplicateDegree(u32),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Parse and I/O failures are input errors; everything else is a violated precondition.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Json(_) | Error::Io(_))
    }
}
