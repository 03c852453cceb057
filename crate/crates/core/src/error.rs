use thiserror::Error;

use crate::network::Violation;
use crate::optkernel::SolverError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {}", format_violations(.0))]
    InvalidNetwork(Vec<Violation>),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid demand data: {0}")]
    Demand(String),
    #[error("line {line}: {msg}")]
    Csv { line: u64, msg: String },
    #[error("scenario weights need a common denominator above {limit}; resample to equal weights")]
    WeightDenominator { limit: u64 },
    #[error("empty sample set")]
    EmptySamples,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid certificate: {0}")]
    Certificate(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
