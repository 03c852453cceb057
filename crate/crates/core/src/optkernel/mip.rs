//! Depth-first branch-and-bound over binary variables.

use serde::Serialize;

use super::lp::{dot, LinearProgram, LpStatus, Sense, Tolerances};
use super::SolverError;

/// Default cap on the number of binaries accepted by [`solve_mip`].
pub const DEFAULT_BINARY_LIMIT: usize = 2048;

const INT_TOL: f64 = 1e-6;

/// A mixed 0/1 problem: an LP whose `binaries` must take values in {0, 1}.
///
/// Without an objective the search stops at the first integral point.
#[derive(Clone, Debug)]
pub struct MipFeasibilityProblem {
    pub lp: LinearProgram,
    pub binaries: Vec<usize>,
    pub objective: Option<Vec<f64>>,
    /// Known feasible assignment used as the starting incumbent.
    pub incumbent: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct MipOptions {
    pub binary_limit: usize,
    pub node_limit: usize,
    pub tol: Tolerances,
}

impl Default for MipOptions {
    fn default() -> Self {
        MipOptions {
            binary_limit: DEFAULT_BINARY_LIMIT,
            node_limit: 200_000,
            tol: Tolerances::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MipStats {
    pub nodes: usize,
    pub lp_iterations: usize,
    /// False when the node limit stopped an optimisation run early.
    pub proven_optimal: bool,
}

#[derive(Clone, Debug)]
pub enum MipOutcome {
    Feasible {
        x: Vec<f64>,
        objective: f64,
        stats: MipStats,
    },
    Infeasible {
        stats: MipStats,
    },
}

impl MipFeasibilityProblem {
    pub fn new(lp: LinearProgram, binaries: Vec<usize>) -> Self {
        MipFeasibilityProblem {
            lp,
            binaries,
            objective: None,
            incumbent: None,
        }
    }

    /// Checks every row, bound and integrality restriction at `x`.
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.lp.num_vars() {
            return false;
        }
        for (j, &v) in x.iter().enumerate() {
            let (l, u) = self.lp.bounds(j);
            if v < l - tol || v > u + tol {
                return false;
            }
        }
        for &b in &self.binaries {
            if (x[b] - x[b].round()).abs() > tol {
                return false;
            }
        }
        self.lp.rows().iter().all(|row| {
            let act: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let s = tol * (1.0 + row.rhs.abs());
            match row.sense {
                Sense::Le => act <= row.rhs + s,
                Sense::Ge => act >= row.rhs - s,
                Sense::Eq => (act - row.rhs).abs() <= s,
            }
        })
    }
}

/// Solves a binary feasibility (or optimisation) problem exactly by branch-and-bound.
pub fn solve_mip(problem: &MipFeasibilityProblem, opts: &MipOptions) -> Result<MipOutcome, SolverError> {
    if problem.binaries.len() > opts.binary_limit {
        return Err(SolverError::BinaryLimit {
            count: problem.binaries.len(),
            limit: opts.binary_limit,
        });
    }
    let n = problem.lp.num_vars();
    if problem.binaries.iter().any(|&b| b >= n) {
        return Err(SolverError::Malformed("binary index out of range".into()));
    }
    let mut root = problem.lp.clone();
    match &problem.objective {
        Some(obj) => {
            if obj.len() != n {
                return Err(SolverError::Malformed("objective length mismatch".into()));
            }
            for (j, &c) in obj.iter().enumerate() {
                root.set_cost(j, c);
            }
        }
        None => {
            for j in 0..n {
                root.set_cost(j, 0.0);
            }
        }
    }
    for &b in &problem.binaries {
        let (l, u) = root.bounds(b);
        root.set_bounds(b, l.max(0.0), u.min(1.0));
    }
    let optimise = problem.objective.is_some();
    let mut stats = MipStats {
        nodes: 0,
        lp_iterations: 0,
        proven_optimal: true,
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    if let (Some(inc), Some(obj)) = (&problem.incumbent, &problem.objective) {
        if problem.is_feasible(inc, opts.tol.feas) {
            best = Some((inc.clone(), dot(obj, inc)));
        }
    }

    // each node is a list of (binary, fixed value)
    let mut stack: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
    while let Some(fixes) = stack.pop() {
        if stats.nodes >= opts.node_limit {
            if best.is_some() {
                stats.proven_optimal = false;
                break;
            }
            return Err(SolverError::NodeLimit(opts.node_limit));
        }
        stats.nodes += 1;
        let mut node = root.clone();
        for &(b, v) in &fixes {
            node.set_bounds(b, v, v);
        }
        let sol = node.solve_with(&opts.tol)?;
        stats.lp_iterations += sol.iterations;
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Err(SolverError::Malformed("relaxation unbounded".into()));
            }
            LpStatus::Optimal => {}
        }
        if let Some((_, inc)) = &best {
            if sol.objective >= inc - opts.tol.gap * (1.0 + inc.abs()) {
                continue;
            }
        }
        let branch = problem
            .binaries
            .iter()
            .copied()
            .filter(|&b| {
                let v = sol.x[b];
                (v - v.round()).abs() > INT_TOL
            })
            .max_by(|&a, &b| {
                let fa = (sol.x[a] - 0.5).abs();
                let fb = (sol.x[b] - 0.5).abs();
                // most fractional first, smallest index on ties
                fb.partial_cmp(&fa).unwrap().then(b.cmp(&a))
            });
        match branch {
            None => {
                let Some((x, obj)) = polish(&node, problem, &sol.x, &opts.tol)? else {
                    continue;
                };
                if !optimise {
                    return Ok(MipOutcome::Feasible {
                        x,
                        objective: obj,
                        stats,
                    });
                }
                let better = match &best {
                    None => true,
                    Some((_, inc)) => obj < *inc,
                };
                if better {
                    best = Some((x, obj));
                }
            }
            Some(b) => {
                let v = sol.x[b];
                let near = if v >= 0.5 { 1.0 } else { 0.0 };
                let mut far_fix = fixes.clone();
                far_fix.push((b, 1.0 - near));
                let mut near_fix = fixes;
                near_fix.push((b, near));
                // near child is explored first
                stack.push(far_fix);
                stack.push(near_fix);
            }
        }
    }
    match best {
        Some((x, objective)) => Ok(MipOutcome::Feasible { x, objective, stats }),
        None => Ok(MipOutcome::Infeasible { stats }),
    }
}

/// Rounds binaries, re-solves the continuous part and checks the result.
fn polish(
    node: &LinearProgram,
    problem: &MipFeasibilityProblem,
    x: &[f64],
    tol: &Tolerances,
) -> Result<Option<(Vec<f64>, f64)>, SolverError> {
    let mut fixed = node.clone();
    for &b in &problem.binaries {
        let v = x[b].round();
        fixed.set_bounds(b, v, v);
    }
    let sol = fixed.solve_with(tol)?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    let mut out = sol.x;
    for &b in &problem.binaries {
        out[b] = out[b].round();
    }
    if !problem.is_feasible(&out, tol.feas * 10.0) {
        return Ok(None);
    }
    let obj = problem.objective.as_ref().map_or(0.0, |o| dot(o, &out));
    Ok(Some((out, obj)))
}
