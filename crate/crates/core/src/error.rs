use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },
    #[error("empty equation {0}")]
    EmptyEquation(usize),
    #[error("invalid system: {message} (index {index})")]
    Invariant { index: usize, message: String },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate moments: mean {mu}, variance {sigma2} on [{lo}, {hi}]")]
    DegenerateMoments { mu: f64, sigma2: f64, lo: f64, hi: f64 },
    #[error("empty overlap between [{lo}, {hi}] and message support")]
    EmptyOverlap { lo: f64, hi: f64 },
    #[error("numerical underflow: all densities vanish on [{lo}, {hi}]")]
    NumericalUnderflow { lo: f64, hi: f64 },
    #[error("matrix is rank deficient (rank {rank} < {rows} rows)")]
    RankDeficient { rank: usize, rows: usize },
    #[error("reduced dimension {dim} exceeds the oracle limit {max}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("zero-length chord after {retries} direction draws")]
    ZeroChord { retries: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
