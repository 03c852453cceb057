use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::simplex::{self, EngineOutcome};
use super::SolverError;

/// Constraint sense of a single row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// Numerical tolerances shared by the LP and MIP kernels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub feas: f64,
    pub gap: f64,
    pub cs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feas: 1e-8,
            gap: 1e-7,
            cs: 1e-7,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimization LP over bounded variables with sparse rows.
///
/// Variables default to `[0, +inf)`.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
    tie_break: Option<Vec<f64>>,
    names: Option<Vec<String>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of [`LinearProgram::solve`].
///
/// `duals` are sign-normalised multipliers: nonnegative for `Le` and `Ge`
/// rows at optimality, and `-d obj / d rhs` for `Le`/`Eq` rows
/// (`+d obj / d rhs` for `Ge` rows).
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; num_vars],
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            rows: Vec::new(),
            tie_break: None,
            names: None,
        }
    }

    /// Appends a variable with the given cost and bounds, returning its index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        if let Some(tb) = self.tie_break.as_mut() {
            tb.push(0.0);
        }
        if let Some(names) = self.names.as_mut() {
            names.push(format!("v{}", self.objective.len() - 1));
        }
        self.objective.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_cost(&mut self, j: usize, c: f64) {
        self.objective[j] = c;
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Secondary objective minimised over the optimal face of the primary one.
    pub fn set_tie_break(&mut self, coeffs: Vec<f64>) {
        assert_eq!(coeffs.len(), self.objective.len());
        self.tie_break = Some(coeffs);
    }

    pub fn set_names(&mut self, names: Vec<String>) {
        assert_eq!(names.len(), self.objective.len());
        self.names = Some(names);
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    fn check(&self) -> Result<(), SolverError> {
        let n = self.objective.len();
        for (j, (&c, (&l, &u))) in self
            .objective
            .iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .enumerate()
        {
            if !c.is_finite() || l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(SolverError::Malformed(format!("variable {j} has invalid cost or bounds")));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(SolverError::Malformed(format!("row {i} has a non-finite rhs")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n || !a.is_finite() {
                    return Err(SolverError::Malformed(format!("row {i} references bad column {j}")));
                }
            }
        }
        if let Some(tb) = &self.tie_break {
            if tb.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::Malformed("tie-break objective is not finite".into()));
            }
        }
        Ok(())
    }

    /// Solves with default tolerances.
    pub fn solve(&self) -> Result<LpSolution, SolverError> {
        self.solve_with(&Tolerances::default())
    }

    pub fn solve_with(&self, tol: &Tolerances) -> Result<LpSolution, SolverError> {
        self.check()?;
        super::maybe_dump(self);
        for (j, (&l, &u)) in self.lower.iter().zip(self.upper.iter()).enumerate() {
            if l > u + tol.feas {
                log::debug!("variable {j} has crossing bounds");
                return Ok(self.infeasible(0));
            }
        }
        let out = simplex::solve(self, tol)?;
        match out {
            EngineOutcome::Infeasible { iterations } => Ok(self.infeasible(iterations)),
            EngineOutcome::Unbounded { iterations } => Ok(LpSolution {
                status: LpStatus::Unbounded,
                x: Vec::new(),
                duals: Vec::new(),
                reduced_costs: Vec::new(),
                objective: f64::NEG_INFINITY,
                iterations,
            }),
            EngineOutcome::Optimal {
                x,
                row_prices,
                reduced_costs,
                iterations,
            } => {
                let duals = self
                    .rows
                    .iter()
                    .zip(row_prices.iter())
                    .map(|(r, &pi)| match r.sense {
                        Sense::Ge => pi,
                        Sense::Le | Sense::Eq => -pi,
                    })
                    .collect::<Vec<_>>();
                let objective = dot(&self.objective, &x);
                let sol = LpSolution {
                    status: LpStatus::Optimal,
                    x,
                    duals,
                    reduced_costs,
                    objective,
                    iterations,
                };
                self.certify(&sol, &row_prices, tol)?;
                Ok(sol)
            }
        }
    }

    fn infeasible(&self, iterations: usize) -> LpSolution {
        LpSolution {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            objective: f64::INFINITY,
            iterations,
        }
    }

    /// Primal feasibility, duality gap and complementary slackness of an optimal solution.
    fn certify(&self, sol: &LpSolution, pi: &[f64], tol: &Tolerances) -> Result<(), SolverError> {
        let scale = 1.0 + sol.objective.abs();
        let x = &sol.x;
        let mut worst_primal = 0.0f64;
        let mut worst_cs = 0.0f64;
        let mut dual_obj = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            let act: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let viol = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Ge => row.rhs - act,
                Sense::Eq => (act - row.rhs).abs(),
            };
            let rscale = 1.0 + row.rhs.abs();
            worst_primal = worst_primal.max(viol / rscale);
            dual_obj += pi[i] * row.rhs;
            if row.sense != Sense::Eq {
                worst_cs = worst_cs.max((sol.duals[i] * (act - row.rhs)).abs());
                if sol.duals[i] < -tol.cs * scale {
                    return Err(SolverError::NumericalFailure(format!(
                        "row {i} multiplier has the wrong sign ({})",
                        sol.duals[i]
                    )));
                }
            }
        }
        for (j, &xj) in x.iter().enumerate() {
            let (l, u) = (self.lower[j], self.upper[j]);
            worst_primal = worst_primal.max((l - xj) / (1.0 + l.abs().min(1e300)));
            if u.is_finite() {
                worst_primal = worst_primal.max((xj - u) / (1.0 + u.abs()));
            }
            let d = sol.reduced_costs[j];
            // d > 0 pairs with the lower bound, d < 0 with the upper bound
            if d > 0.0 {
                if l.is_finite() {
                    dual_obj += d * l;
                    worst_cs = worst_cs.max(d * (xj - l).abs());
                } else {
                    worst_cs = worst_cs.max(d.abs() * (1.0 + xj.abs()));
                }
            } else if d < 0.0 {
                if u.is_finite() {
                    dual_obj += d * u;
                    worst_cs = worst_cs.max(-d * (u - xj).abs());
                } else {
                    worst_cs = worst_cs.max(d.abs() * (1.0 + xj.abs()));
                }
            }
        }
        if worst_primal > tol.feas * 10.0 {
            return Err(SolverError::NumericalFailure(format!(
                "primal residual {worst_primal:.3e} exceeds tolerance"
            )));
        }
        let gap = (sol.objective - dual_obj).abs();
        if gap > tol.gap * scale {
            return Err(SolverError::NumericalFailure(format!("duality gap {gap:.3e} exceeds tolerance")));
        }
        if worst_cs > tol.cs * scale {
            return Err(SolverError::NumericalFailure(format!(
                "complementary slackness residual {worst_cs:.3e} exceeds tolerance"
            )));
        }
        Ok(())
    }

    /// Plain-text listing of the model for debugging.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let name = |j: usize| -> String {
            match &self.names {
                Some(v) => v[j].clone(),
                None => format!("v{j}"),
            }
        };
        let _ = writeln!(out, "# {} variables, {} rows", self.num_vars(), self.num_rows());
        let _ = write!(out, "min");
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                let _ = write!(out, " {:+} {}", c, name(j));
            }
        }
        let _ = writeln!(out);
        if let Some(tb) = &self.tie_break {
            let _ = write!(out, "then min");
            for (j, &c) in tb.iter().enumerate() {
                if c != 0.0 {
                    let _ = write!(out, " {:+} {}", c, name(j));
                }
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(out, "subject to");
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "r{i}:");
            for &(j, a) in &row.coeffs {
                let _ = write!(out, " {:+} {}", a, name(j));
            }
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, " {op} {}", row.rhs);
        }
        let _ = writeln!(out, "bounds");
        for j in 0..self.num_vars() {
            let _ = writeln!(out, "{} <= {} <= {}", self.lower[j], name(j), self.upper[j]);
        }
        out
    }

    pub(crate) fn tie_break(&self) -> Option<&[f64]> {
        self.tie_break.as_deref()
    }

    pub(crate) fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub(crate) fn upper(&self) -> &[f64] {
        &self.upper
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
