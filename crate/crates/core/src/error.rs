use thiserror::Error;

/// Errors raised while building or checking truncated Fock-space objects.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} {value} out of range [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: i64,
        lo: i64,
        hi: i64,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("oracle size cap: k = {k} exceeds the brute-force limit {cap}")]
    OracleSizeCap { k: usize, cap: usize },

    #[error(
        "positivity failure at level {level} (q = {q}): smallest eigenvalue {min_eig:e} <= {tol:e}"
    )]
    Positivity {
        level: usize,
        q: f64,
        min_eig: f64,
        tol: f64,
    },

    #[error("polar degeneracy at k = {k}: smallest singular value {min_sv:e} <= {tol:e}")]
    PolarDegeneracy { k: usize, min_sv: f64, tol: f64 },

    #[error("series divergent at q = {q}: |q| * ||L_1||^2 = {ratio} >= 1 (||L_1|| = {norm})")]
    Divergent { q: f64, norm: f64, ratio: f64 },

    #[error("empty level window [{lo}, {hi}]{context}")]
    EmptyWindow {
        lo: usize,
        hi: usize,
        context: String,
    },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for FockError {
    fn from(e: std::io::Error) -> Self {
        FockError::Io(e.to_string())
    }
}

impl From<csv::Error> for FockError {
    fn from(e: csv::Error) -> Self {
        FockError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for FockError {
    fn from(e: serde_json::Error) -> Self {
        FockError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FockError>;
