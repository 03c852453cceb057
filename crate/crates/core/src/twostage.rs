//! Second-stage allocation, fluid and SAA staffing problems, and the KKT verifier.
//!
//! Costs follow the per-period convention: `c` is charged every period, so the
//! horizon staffing cost is `c~ . b` with `c~ = c T`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::demand::DemandScenarioSet;
use crate::error::{Error, Result};
use crate::network::ServiceNetwork;
use crate::optkernel::{LinearProgram, LpStatus, Sense};

/// Tolerance used by [`verify_kkt`].
pub const TOL_KKT: f64 = 1e-6;

/// Deterministic `T x n` rate profile fed to the fluid model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRateProfile {
    pub lambda: Vec<Vec<f64>>,
}

impl ArrivalRateProfile {
    pub fn new(lambda: Vec<Vec<f64>>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::Dimension("profile needs at least one period".into()));
        }
        let n = lambda[0].len();
        if lambda.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("profile rows differ in length".into()));
        }
        if lambda.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Demand("profile entries must be finite and nonnegative".into()));
        }
        Ok(ArrivalRateProfile { lambda })
    }

    /// The same rate vector in each of `t` periods.
    pub fn constant(rate: Vec<f64>, t: usize) -> Result<Self> {
        Self::new(vec![rate; t])
    }

    pub fn periods(&self) -> usize {
        self.lambda.len()
    }

    pub fn classes(&self) -> usize {
        self.lambda[0].len()
    }

    pub fn as_scenario_set(&self) -> DemandScenarioSet {
        DemandScenarioSet::single(self.lambda.clone()).expect("validated profile")
    }
}

/// Selection rule among degenerate staffing optima.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Secondary minimisation of `sum_h b_h`.
    #[default]
    MinNorm,
    /// Secondary minimisation of `w . b`.
    Weighted(Vec<f64>),
    /// Whatever vertex the simplex stops at.
    None,
}

impl TieBreak {
    pub fn label(&self) -> &'static str {
        match self {
            TieBreak::MinNorm => "min-norm",
            TieBreak::Weighted(_) => "weighted",
            TieBreak::None => "none",
        }
    }
}

/// Options for [`solve_saa_with`].
#[derive(Clone, Debug, Default)]
pub struct SaaOptions {
    pub tie_break: TieBreak,
    /// Optional per-pool lower bounds on `b`.
    pub b_lower: Option<Vec<f64>>,
    /// Optional per-pool upper bounds on `b`.
    pub b_upper: Option<Vec<f64>>,
}

/// Staffing with per-scenario, per-period allocations and duals.
///
/// `x[z][t]` is the activity vector, `y[z][t]` the capacity prices and
/// `z[z][t]` the demand prices of slice `(z, t)`. Duals carry the scenario
/// weight, so `sum_{z,t} y[z][t] <= c~` at optimality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaffingSolution {
    pub b: Vec<f64>,
    pub objective: f64,
    pub staffing_cost: f64,
    pub abandonment_cost: f64,
    pub periods: usize,
    pub c_tilde: Vec<f64>,
    pub weights: Vec<f64>,
    pub x: Vec<Vec<Vec<f64>>>,
    pub y: Vec<Vec<Vec<f64>>>,
    pub z: Vec<Vec<Vec<f64>>>,
    pub tie_break: String,
}

/// Optimal value and multipliers of the allocation problem for a fixed `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondStage {
    pub value: f64,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
}

fn check_b(net: &ServiceNetwork, b: &[f64]) -> Result<()> {
    if b.len() != net.m() {
        return Err(Error::Dimension(format!("staffing has {} entries, network has {} pools", b.len(), net.m())));
    }
    if b.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Precondition("staffing must be finite and nonnegative".into()));
    }
    Ok(())
}

fn check_path(net: &ServiceNetwork, path: &[Vec<f64>]) -> Result<()> {
    if path.iter().any(|r| r.len() != net.n()) {
        return Err(Error::Dimension(format!("demand rows must have {} classes", net.n())));
    }
    Ok(())
}

/// Allocation LP of one period: returns `(p.D - p.Rx, x, y, z)`.
fn single_period(net: &ServiceNetwork, b: &[f64], d: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let k = net.k();
    let mut lp = LinearProgram::new(k);
    for j in 0..k {
        lp.set_cost(j, -net.p()[net.class_of(j)]);
    }
    for h in 0..net.m() {
        let row = net.activities_of_pool(h).map(|j| (j, net.usage(j))).collect();
        lp.add_row(row, Sense::Le, b[h]);
    }
    for i in 0..net.n() {
        let row = net.activities_of_class(i).map(|j| (j, 1.0)).collect();
        lp.add_row(row, Sense::Le, d[i]);
    }
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Precondition(format!("allocation LP returned {:?}", sol.status)));
    }
    let base: f64 = d.iter().zip(net.p()).map(|(a, b)| a * b).sum();
    let value = (base + sol.objective).max(0.0);
    let y = sol.duals[..net.m()].to_vec();
    let z = sol.duals[net.m()..].to_vec();
    Ok((value, sol.x, y, z))
}

/// `pi(b, D)`: minimal abandonment cost of a demand path under staffing `b`.
pub fn second_stage(net: &ServiceNetwork, b: &[f64], path: &[Vec<f64>]) -> Result<SecondStage> {
    check_b(net, b)?;
    check_path(net, path)?;
    let mut out = SecondStage {
        value: 0.0,
        x: Vec::with_capacity(path.len()),
        y: Vec::with_capacity(path.len()),
        z: Vec::with_capacity(path.len()),
    };
    for d in path {
        let (v, x, y, z) = single_period(net, b, d)?;
        out.value += v;
        out.x.push(x);
        out.y.push(y);
        out.z.push(z);
    }
    Ok(out)
}

/// `c~ . b + E[pi(b, D)]` under the scenario weights.
pub fn expected_cost(net: &ServiceNetwork, ds: &DemandScenarioSet, b: &[f64]) -> Result<f64> {
    check_b(net, b)?;
    let ct = net.c_tilde(ds.periods());
    let staffing: f64 = ct.iter().zip(b).map(|(c, v)| c * v).sum();
    let mut cache: HashMap<Vec<u64>, f64> = HashMap::new();
    let mut abandon = 0.0;
    for (path, &w) in ds.paths().iter().zip(ds.weights()) {
        check_path(net, path)?;
        for d in path {
            let key: Vec<u64> = d.iter().map(|v| v.to_bits()).collect();
            let v = match cache.get(&key) {
                Some(v) => *v,
                None => {
                    let v = single_period(net, b, d)?.0;
                    cache.insert(key, v);
                    v
                }
            };
            abandon += w * v;
        }
    }
    Ok(staffing + abandon)
}

/// Fluid problem: the SAA problem on the single deterministic path `lambda`.
///
/// Multipliers are replaced by the least-price dual solution compatible with
/// the primal optimum, so prices vanish wherever the optimality system allows.
pub fn solve_fluid(net: &ServiceNetwork, lambda: &ArrivalRateProfile, tie_break: TieBreak) -> Result<StaffingSolution> {
    let mut sol = solve_saa_with(
        net,
        &lambda.as_scenario_set(),
        &SaaOptions {
            tie_break,
            ..SaaOptions::default()
        },
    )?;
    if let Some((y, z)) = least_price_duals(net, lambda, &sol)? {
        sol.y = vec![y];
        sol.z = vec![z];
    }
    Ok(sol)
}

/// Minimises total price over the dual face fixed by complementary slackness.
/// Returns `None` if the polishing LP fails, leaving the simplex duals in place.
fn least_price_duals(net: &ServiceNetwork, lambda: &ArrivalRateProfile, sol: &StaffingSolution) -> Result<Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)>> {
    const ACTIVE: f64 = 1e-9;
    let (m, n, k, t) = (net.m(), net.n(), net.k(), lambda.periods());
    let ct = net.c_tilde(t);
    let yv = |s: usize, h: usize| s * (m + n) + h;
    let zv = |s: usize, i: usize| s * (m + n) + m + i;
    let mut lp = LinearProgram::new(t * (m + n));
    for s in 0..t {
        for h in 0..m {
            lp.set_cost(yv(s, h), 1.0);
        }
    }
    let x = &sol.x[0];
    for s in 0..t {
        let ax = net.a_times(&x[s]);
        let rx = net.r_times(&x[s]);
        for h in 0..m {
            if ax[h] < sol.b[h] - ACTIVE * (1.0 + sol.b[h]) {
                lp.set_bounds(yv(s, h), 0.0, 0.0);
            }
        }
        for i in 0..n {
            let d = lambda.lambda[s][i];
            if rx[i] < d - ACTIVE * (1.0 + d) {
                lp.set_bounds(zv(s, i), 0.0, 0.0);
            }
        }
        for j in 0..k {
            let (i, h) = (net.class_of(j), net.pool_of(j));
            let row = vec![(yv(s, h), net.usage(j)), (zv(s, i), 1.0)];
            let sense = if x[s][j] > ACTIVE { Sense::Eq } else { Sense::Ge };
            lp.add_row(row, sense, net.p()[i]);
        }
    }
    for h in 0..m {
        let row = (0..t).map(|s| (yv(s, h), 1.0)).collect();
        let sense = if sol.b[h] > ACTIVE { Sense::Eq } else { Sense::Le };
        lp.add_row(row, sense, ct[h]);
    }
    // capacity prices first, then class prices among the cheapest capacity prices
    let first = match lp.solve() {
        Ok(p) if p.status == LpStatus::Optimal => p,
        _ => return Ok(None),
    };
    for s in 0..t {
        for h in 0..m {
            let v = first.x[yv(s, h)].max(0.0);
            lp.set_cost(yv(s, h), 0.0);
            lp.set_bounds(yv(s, h), v, v);
        }
        for i in 0..n {
            lp.set_cost(zv(s, i), 1.0);
        }
    }
    let polished = match lp.solve() {
        Ok(p) if p.status == LpStatus::Optimal => p,
        _ => first,
    };
    let y = (0..t).map(|s| (0..m).map(|h| polished.x[yv(s, h)].max(0.0)).collect()).collect();
    let z = (0..t).map(|s| (0..n).map(|i| polished.x[zv(s, i)].max(0.0)).collect()).collect();
    Ok(Some((y, z)))
}

/// SAA staffing with the default min-norm tie-break.
pub fn solve_saa(net: &ServiceNetwork, ds: &DemandScenarioSet) -> Result<StaffingSolution> {
    solve_saa_with(net, ds, &SaaOptions::default())
}

/// Joint staffing LP over every scenario and period.
///
/// Identical period-slices share their allocation variables; their weights are
/// summed and the duals are split back in proportion to the scenario weights.
pub fn solve_saa_with(net: &ServiceNetwork, ds: &DemandScenarioSet, opts: &SaaOptions) -> Result<StaffingSolution> {
    if ds.classes() != net.n() {
        return Err(Error::Dimension(format!("demand has {} classes, network has {}", ds.classes(), net.n())));
    }
    let (m, n, k, t) = (net.m(), net.n(), net.k(), ds.periods());
    let ct = net.c_tilde(t);

    // merge identical slices into weighted blocks
    let mut block_of: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut blocks: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut slice_block = vec![vec![0usize; t]; ds.scenarios()];
    for (zi, (path, &w)) in ds.paths().iter().zip(ds.weights()).enumerate() {
        for (ti, d) in path.iter().enumerate() {
            let key: Vec<u64> = d.iter().map(|v| v.to_bits()).collect();
            let bi = *block_of.entry(key).or_insert_with(|| {
                blocks.push((d.clone(), 0.0));
                blocks.len() - 1
            });
            blocks[bi].1 += w;
            slice_block[zi][ti] = bi;
        }
    }

    let nb = blocks.len();
    let mut lp = LinearProgram::new(m + nb * k);
    for h in 0..m {
        lp.set_cost(h, ct[h]);
        let lo = opts.b_lower.as_ref().map_or(0.0, |v| v[h].max(0.0));
        let hi = opts.b_upper.as_ref().map_or(f64::INFINITY, |v| v[h]);
        lp.set_bounds(h, lo, hi);
    }
    for (bi, (d, w)) in blocks.iter().enumerate() {
        let base = m + bi * k;
        for j in 0..k {
            lp.set_cost(base + j, -w * net.p()[net.class_of(j)]);
        }
        for h in 0..m {
            let mut row: Vec<(usize, f64)> = net.activities_of_pool(h).map(|j| (base + j, net.usage(j))).collect();
            row.push((h, -1.0));
            lp.add_row(row, Sense::Le, 0.0);
        }
        for i in 0..n {
            let row = net.activities_of_class(i).map(|j| (base + j, 1.0)).collect();
            lp.add_row(row, Sense::Le, d[i]);
        }
    }
    match &opts.tie_break {
        TieBreak::MinNorm => {
            let mut tb = vec![0.0; lp.num_vars()];
            tb[..m].iter_mut().for_each(|v| *v = 1.0);
            lp.set_tie_break(tb);
        }
        TieBreak::Weighted(w) => {
            if w.len() != m {
                return Err(Error::Dimension("tie-break weights must have one entry per pool".into()));
            }
            let mut tb = vec![0.0; lp.num_vars()];
            tb[..m].copy_from_slice(w);
            lp.set_tie_break(tb);
        }
        TieBreak::None => {}
    }
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Precondition(format!("staffing LP returned {:?} (check bounds on b)", sol.status)));
    }
    let b: Vec<f64> = sol.x[..m].iter().map(|v| v.max(0.0)).collect();

    let mut x = Vec::with_capacity(ds.scenarios());
    let mut y = Vec::with_capacity(ds.scenarios());
    let mut z = Vec::with_capacity(ds.scenarios());
    let mut abandon = 0.0;
    for (zi, (path, &w)) in ds.paths().iter().zip(ds.weights()).enumerate() {
        let mut xs = Vec::with_capacity(t);
        let mut ys = Vec::with_capacity(t);
        let mut zs = Vec::with_capacity(t);
        for (ti, d) in path.iter().enumerate() {
            let bi = slice_block[zi][ti];
            let share = w / blocks[bi].1;
            let base = m + bi * k;
            let xt: Vec<f64> = sol.x[base..base + k].iter().map(|v| v.max(0.0)).collect();
            let served = net.r_times(&xt);
            abandon += w * (0..n).map(|i| net.p()[i] * (d[i] - served[i]).max(0.0)).sum::<f64>();
            let row0 = bi * (m + n);
            ys.push(sol.duals[row0..row0 + m].iter().map(|v| v * share).collect());
            zs.push(sol.duals[row0 + m..row0 + m + n].iter().map(|v| v * share).collect());
            xs.push(xt);
        }
        x.push(xs);
        y.push(ys);
        z.push(zs);
    }
    let staffing: f64 = ct.iter().zip(&b).map(|(c, v)| c * v).sum();
    Ok(StaffingSolution {
        b,
        objective: staffing + abandon,
        staffing_cost: staffing,
        abandonment_cost: abandon,
        periods: t,
        c_tilde: ct,
        weights: ds.weights().to_vec(),
        x,
        y,
        z,
        tie_break: opts.tie_break.label().to_string(),
    })
}

/// Residuals of the fluid optimality system, grouped by block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub primal_feas: f64,
    pub dual_feas: f64,
    /// `y_t (A x_t - b) = 0`
    pub cs_capacity: f64,
    /// `z_t (R x_t - lambda_t) = 0`
    pub cs_demand: f64,
    /// `b (c T - sum_t y_t) = 0`
    pub cs_staffing: f64,
    /// `x_t (A^T y_t + R^T z_t - R^T p) = 0`
    pub cs_allocation: f64,
    pub max_residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub failed_blocks: Vec<String>,
    pub reason: Option<String>,
}

pub const BLOCK_PRIMAL: &str = "primal feasibility";
pub const BLOCK_DUAL: &str = "dual feasibility";
pub const BLOCK_CS_CAPACITY: &str = "y(Ax - b) = 0";
pub const BLOCK_CS_DEMAND: &str = "z(Rx - lambda) = 0";
pub const BLOCK_CS_STAFFING: &str = "b(cT - sum y) = 0";
pub const BLOCK_CS_ALLOCATION: &str = "x(A'y + R'z - R'p) = 0";

/// Checks the optimality system of the fluid problem at `cand` (single scenario).
pub fn verify_kkt(net: &ServiceNetwork, lambda: &ArrivalRateProfile, cand: &StaffingSolution) -> KktReport {
    verify_kkt_tol(net, lambda, cand, TOL_KKT)
}

pub fn verify_kkt_tol(net: &ServiceNetwork, lambda: &ArrivalRateProfile, cand: &StaffingSolution, tol: f64) -> KktReport {
    let fail = |reason: &str| KktReport {
        primal_feas: f64::INFINITY,
        dual_feas: f64::INFINITY,
        cs_capacity: f64::INFINITY,
        cs_demand: f64::INFINITY,
        cs_staffing: f64::INFINITY,
        cs_allocation: f64::INFINITY,
        max_residual: f64::INFINITY,
        tol,
        pass: false,
        failed_blocks: Vec::new(),
        reason: Some(reason.to_string()),
    };
    let t = lambda.periods();
    let (m, n, k) = (net.m(), net.n(), net.k());
    let shape_ok = |v: &Vec<Vec<Vec<f64>>>, w: usize| v.len() == 1 && v[0].len() == t && v[0].iter().all(|r| r.len() == w);
    if cand.y.is_empty() || cand.z.is_empty() {
        return fail("no certificate");
    }
    if cand.b.len() != m || !shape_ok(&cand.x, k) || !shape_ok(&cand.y, m) || !shape_ok(&cand.z, n) || lambda.classes() != n {
        return fail("dimension mismatch");
    }
    let (x, y, z) = (&cand.x[0], &cand.y[0], &cand.z[0]);
    let ct = net.c_tilde(t);
    let p = net.p();
    let mut primal = cand.b.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
    let mut dual = 0.0f64;
    let (mut cs1, mut cs2, mut cs4) = (0.0f64, 0.0f64, 0.0f64);
    let mut ysum = vec![0.0; m];
    for s in 0..t {
        primal = primal.max(x[s].iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max));
        let ax = net.a_times(&x[s]);
        let rx = net.r_times(&x[s]);
        for h in 0..m {
            primal = primal.max(ax[h] - cand.b[h]);
            dual = dual.max(-y[s][h]);
            cs1 += y[s][h] * (ax[h] - cand.b[h]);
            ysum[h] += y[s][h];
        }
        for i in 0..n {
            primal = primal.max(rx[i] - lambda.lambda[s][i]);
            dual = dual.max(-z[s][i]);
            cs2 += z[s][i] * (rx[i] - lambda.lambda[s][i]);
        }
        for j in 0..k {
            let i = net.class_of(j);
            let h = net.pool_of(j);
            let red = net.usage(j) * y[s][h] + z[s][i] - p[i];
            dual = dual.max(-red);
            cs4 += x[s][j] * red;
        }
    }
    let mut cs3 = 0.0;
    for h in 0..m {
        dual = dual.max(ysum[h] - ct[h]);
        cs3 += cand.b[h] * (ct[h] - ysum[h]);
    }
    let primal = primal.max(0.0);
    let dual = dual.max(0.0);
    let (cs1, cs2, cs3, cs4) = (cs1.abs(), cs2.abs(), cs3.abs(), cs4.abs());
    let mut failed = Vec::new();
    for (name, v) in [
        (BLOCK_PRIMAL, primal),
        (BLOCK_DUAL, dual),
        (BLOCK_CS_CAPACITY, cs1),
        (BLOCK_CS_DEMAND, cs2),
        (BLOCK_CS_STAFFING, cs3),
        (BLOCK_CS_ALLOCATION, cs4),
    ] {
        if v > tol {
            failed.push(name.to_string());
        }
    }
    let max_residual = [primal, dual, cs1, cs2, cs3, cs4].into_iter().fold(0.0, f64::max);
    KktReport {
        primal_feas: primal,
        dual_feas: dual,
        cs_capacity: cs1,
        cs_demand: cs2,
        cs_staffing: cs3,
        cs_allocation: cs4,
        max_residual,
        tol,
        pass: max_residual <= tol,
        failed_blocks: failed,
        reason: None,
    }
}
