//! LP and 0/1 MIP kernel used by every solver in the crate.

mod lp;
mod mip;
mod simplex;

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use thiserror::Error;

pub use lp::{LinearProgram, LpSolution, LpStatus, Row, Sense, Tolerances};
pub use mip::{solve_mip, MipFeasibilityProblem, MipOptions, MipOutcome, MipStats, DEFAULT_BINARY_LIMIT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("{count} binaries exceed the limit of {limit}; use the per-period decomposition")]
    BinaryLimit { count: usize, limit: usize },
    #[error("branch-and-bound node limit {0} reached without a feasible point")]
    NodeLimit(usize),
}

static DUMP_DIR: Mutex<Option<(PathBuf, usize)>> = Mutex::new(None);

/// Enables (or disables with `None`) writing every solved LP to `dir/lpNNNNNN.lp`.
pub fn set_dump_dir(dir: Option<&Path>) {
    *DUMP_DIR.lock().unwrap_or_else(|e| e.into_inner()) = dir.map(|d| (d.to_path_buf(), 0));
}

pub(crate) fn maybe_dump(lp: &LinearProgram) {
    let mut guard = DUMP_DIR.lock().unwrap_or_else(|e| e.into_inner());
    let Some((dir, count)) = guard.as_mut() else { return };
    let path = dir.join(format!("lp{:06}.lp", *count));
    *count += 1;
    if let Err(e) = std::fs::create_dir_all(&*dir).and_then(|_| std::fs::write(&path, lp.to_text())) {
        log::warn!("could not dump {}: {e}", path.display());
    }
}
