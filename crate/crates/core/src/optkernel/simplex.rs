//! Bounded revised primal simplex with a product-form inverse.
//!
//! Variables are laid out as `[structurals | slacks | artificials]`. Row `i`
//! reads `a_i x + s_i = rhs_i` with the slack bounds encoding the sense.
//! Pricing is Dantzig with a Harris ratio test; long degenerate stretches
//! switch to Bland's rule until progress resumes.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::lp::{LinearProgram, Sense, Tolerances};
use super::SolverError;

const PIVOT_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-14;
const DUAL_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const DEGEN_SWITCH: usize = 50;

pub(crate) enum EngineOutcome {
    Optimal {
        x: Vec<f64>,
        row_prices: Vec<f64>,
        reduced_costs: Vec<f64>,
        iterations: usize,
    },
    Infeasible {
        iterations: usize,
    },
    Unbounded {
        iterations: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable resting at zero.
    Zero,
}

struct Eta {
    row: usize,
    pivot_inv: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Engine {
    m: usize,
    ns: usize,
    cstart: Vec<usize>,
    crow: Vec<usize>,
    cval: Vec<f64>,
    art_row: Vec<usize>,
    art_sign: Vec<f64>,
    row_nnz: Vec<usize>,
    rhs: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    head: Vec<usize>,
    etas: Vec<Eta>,
    updates: usize,
    /// Eta nonzeros right after the last reinversion, and added since.
    base_nnz: usize,
    update_nnz: usize,
    iterations: usize,
    max_iter: usize,
    always_bland: bool,
    work: Vec<f64>,
}

pub(crate) fn solve(lp: &LinearProgram, tol: &Tolerances) -> Result<EngineOutcome, SolverError> {
    match solve_once(lp, tol, false) {
        Err(SolverError::NumericalFailure(msg)) => {
            log::debug!("simplex retry with Bland pricing after: {msg}");
            solve_once(lp, tol, true)
        }
        other => other,
    }
}

fn solve_once(lp: &LinearProgram, tol: &Tolerances, always_bland: bool) -> Result<EngineOutcome, SolverError> {
    let mut e = Engine::new(lp, always_bland);
    let scale = 1.0 + lp.rows().iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);

    if !e.art_row.is_empty() {
        let nart = e.art_row.len();
        let base = e.ns + e.m;
        e.cost.iter_mut().for_each(|c| *c = 0.0);
        for a in 0..nart {
            e.cost[base + a] = 1.0;
        }
        e.run_phase()?;
        let infeas: f64 = (0..nart).map(|a| e.x[base + a].max(0.0)).sum();
        if infeas > tol.feas * scale {
            return Ok(EngineOutcome::Infeasible {
                iterations: e.iterations,
            });
        }
        for a in 0..nart {
            e.ub[base + a] = 0.0;
            if e.state[base + a] != State::Basic {
                e.state[base + a] = State::Lower;
                e.x[base + a] = 0.0;
            }
        }
        e.drive_out_artificials();
        e.reinvert()?;
    }

    e.set_cost(lp.objective());
    if let PhaseEnd::Unbounded = e.run_phase()? {
        return Ok(EngineOutcome::Unbounded {
            iterations: e.iterations,
        });
    }
    let pi = e.prices();
    let reduced: Vec<f64> = (0..e.ns).map(|j| e.cost[j] - e.col_dot(j, &pi)).collect();

    if let Some(tb) = lp.tie_break() {
        // freeze every nonbasic variable whose reduced cost is nonzero, then re-optimise
        let dscale = 1.0 + lp.objective().iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let nvar = e.lb.len();
        let all_d: Vec<f64> = (0..nvar).map(|j| e.cost_of(j) - e.col_dot(j, &pi)).collect();
        for (j, d) in all_d.iter().enumerate() {
            if e.state[j] != State::Basic && d.abs() > DUAL_TOL * dscale {
                e.lb[j] = e.x[j];
                e.ub[j] = e.x[j];
            }
        }
        e.set_cost(tb);
        if let PhaseEnd::Unbounded = e.run_phase()? {
            log::debug!("tie-break objective unbounded on the optimal face; keeping primary vertex");
        }
    }

    let x = e.x[..e.ns].to_vec();
    Ok(EngineOutcome::Optimal {
        x,
        row_prices: pi,
        reduced_costs: reduced,
        iterations: e.iterations,
    })
}

impl Engine {
    fn new(lp: &LinearProgram, always_bland: bool) -> Engine {
        let m = lp.num_rows();
        let ns = lp.num_vars();
        let mut counts = vec![0usize; ns];
        let mut row_nnz = vec![0usize; m];
        for (i, row) in lp.rows().iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    counts[j] += 1;
                    row_nnz[i] += 1;
                }
            }
        }
        let mut cstart = vec![0usize; ns + 1];
        for j in 0..ns {
            cstart[j + 1] = cstart[j] + counts[j];
        }
        let nnz = cstart[ns];
        let mut crow = vec![0usize; nnz];
        let mut cval = vec![0.0; nnz];
        let mut fill = cstart.clone();
        for (i, row) in lp.rows().iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    crow[fill[j]] = i;
                    cval[fill[j]] = a;
                    fill[j] += 1;
                }
            }
        }
        // duplicate column entries in one row are summed by the dense scatter, which is fine

        let mut lb = lp.lower().to_vec();
        let mut ub = lp.upper().to_vec();
        let mut x = vec![0.0; ns];
        let mut state = vec![State::Lower; ns];
        for j in 0..ns {
            if lb[j].is_finite() {
                x[j] = lb[j];
                state[j] = State::Lower;
            } else if ub[j].is_finite() {
                x[j] = ub[j];
                state[j] = State::Upper;
            } else {
                state[j] = State::Zero;
            }
        }
        let mut act = vec![0.0; m];
        for j in 0..ns {
            if x[j] != 0.0 {
                for p in cstart[j]..cstart[j + 1] {
                    act[crow[p]] += cval[p] * x[j];
                }
            }
        }
        let rhs: Vec<f64> = lp.rows().iter().map(|r| r.rhs).collect();
        let mut art_row = Vec::new();
        let mut art_sign = Vec::new();
        let mut head = vec![0usize; m];
        for (i, row) in lp.rows().iter().enumerate() {
            let (sl, su) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lb.push(sl);
            ub.push(su);
            let s = rhs[i] - act[i];
            if s >= sl - PRIMAL_TOL && s <= su + PRIMAL_TOL {
                x.push(s);
                state.push(State::Basic);
                head[i] = ns + i;
            } else {
                let bound = if s < sl { sl } else { su };
                x.push(bound);
                state.push(if s < sl { State::Lower } else { State::Upper });
                art_row.push(i);
                art_sign.push(if s - bound >= 0.0 { 1.0 } else { -1.0 });
            }
        }
        for (a, &i) in art_row.iter().enumerate() {
            let resid = rhs[i] - act[i] - x[ns + i];
            lb.push(0.0);
            ub.push(f64::INFINITY);
            x.push(resid.abs());
            state.push(State::Basic);
            head[i] = ns + m + a;
        }
        let nvar = x.len();
        let mut e = Engine {
            m,
            ns,
            cstart,
            crow,
            cval,
            art_row,
            art_sign,
            row_nnz,
            rhs,
            lb,
            ub,
            cost: vec![0.0; nvar],
            x,
            state,
            head,
            etas: Vec::new(),
            updates: 0,
            base_nnz: 0,
            update_nnz: 0,
            iterations: 0,
            max_iter: 20_000 + 50 * (m + nvar),
            always_bland,
            work: vec![0.0; m],
        };
        // negative-signed artificials need an eta in the initial factorisation
        for (a, &i) in e.art_row.iter().enumerate() {
            if e.art_sign[a] < 0.0 {
                e.etas.push(Eta {
                    row: i,
                    pivot_inv: -1.0,
                    idx: Vec::new(),
                    val: Vec::new(),
                });
            }
        }
        e
    }

    fn cost_of(&self, j: usize) -> f64 {
        self.cost[j]
    }

    fn set_cost(&mut self, c: &[f64]) {
        self.cost.iter_mut().for_each(|v| *v = 0.0);
        self.cost[..self.ns].copy_from_slice(c);
    }

    fn scatter_col(&self, j: usize, v: &mut [f64]) {
        v.iter_mut().for_each(|e| *e = 0.0);
        if j < self.ns {
            for p in self.cstart[j]..self.cstart[j + 1] {
                v[self.crow[p]] += self.cval[p];
            }
        } else if j < self.ns + self.m {
            v[j - self.ns] = 1.0;
        } else {
            let a = j - self.ns - self.m;
            v[self.art_row[a]] = self.art_sign[a];
        }
    }

    fn col_dot(&self, j: usize, pi: &[f64]) -> f64 {
        if j < self.ns {
            (self.cstart[j]..self.cstart[j + 1]).map(|p| self.cval[p] * pi[self.crow[p]]).sum()
        } else if j < self.ns + self.m {
            pi[j - self.ns]
        } else {
            let a = j - self.ns - self.m;
            self.art_sign[a] * pi[self.art_row[a]]
        }
    }

    fn col_nnz(&self, j: usize) -> usize {
        if j < self.ns {
            self.cstart[j + 1] - self.cstart[j]
        } else {
            1
        }
    }

    fn ftran(&self, v: &mut [f64]) {
        for e in &self.etas {
            let t = v[e.row];
            if t != 0.0 {
                v[e.row] = t * e.pivot_inv;
                for (&i, &a) in e.idx.iter().zip(&e.val) {
                    v[i] += a * t;
                }
            }
        }
    }

    fn btran(&self, v: &mut [f64]) {
        for e in self.etas.iter().rev() {
            let mut s = v[e.row] * e.pivot_inv;
            for (&i, &a) in e.idx.iter().zip(&e.val) {
                s += a * v[i];
            }
            v[e.row] = s;
        }
    }

    fn push_eta(&mut self, r: usize, alpha: &[f64]) {
        let ar = alpha[r];
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            if i != r && a.abs() > DROP_TOL {
                idx.push(i);
                val.push(-a / ar);
            }
        }
        self.update_nnz += idx.len();
        self.etas.push(Eta {
            row: r,
            pivot_inv: 1.0 / ar,
            idx,
            val,
        });
    }

    fn prices(&self) -> Vec<f64> {
        let mut pi: Vec<f64> = self.head.iter().map(|&v| self.cost[v]).collect();
        self.btran(&mut pi);
        pi
    }

    fn nonbasic_at(&self, j: usize) -> (State, f64) {
        if self.lb[j].is_finite() {
            (State::Lower, self.lb[j])
        } else if self.ub[j].is_finite() {
            (State::Upper, self.ub[j])
        } else {
            (State::Zero, 0.0)
        }
    }

    /// Rebuilds the eta file from the current basic set and recomputes basic values.
    ///
    /// Each row is pivoted at most once, so the transformation of a column only
    /// visits etas whose pivot rows it reaches; these are drained in file order.
    fn reinvert(&mut self) -> Result<(), SolverError> {
        let m = self.m;
        self.etas.clear();
        self.updates = 0;
        let mut basics: Vec<usize> = self.head.clone();
        let mut taken = vec![false; m];
        let mut new_head = vec![usize::MAX; m];
        let mut eta_of_row = vec![usize::MAX; m];
        basics.sort_by_key(|&v| (v < self.ns, self.col_nnz(v), v));
        let mut dropped = Vec::new();
        let mut alpha = vec![0.0; m];
        let mut in_nz = vec![false; m];
        let mut nz: Vec<usize> = Vec::new();
        let mut heap: BinaryHeap<Reverse<usize>> = BinaryHeap::new();
        for &v in &basics {
            if v >= self.ns {
                let (row, sign) = if v < self.ns + self.m {
                    (v - self.ns, 1.0)
                } else {
                    let a = v - self.ns - self.m;
                    (self.art_row[a], self.art_sign[a])
                };
                if taken[row] {
                    dropped.push(v);
                    continue;
                }
                taken[row] = true;
                new_head[row] = v;
                if sign < 0.0 {
                    eta_of_row[row] = self.etas.len();
                    self.etas.push(Eta {
                        row,
                        pivot_inv: -1.0,
                        idx: Vec::new(),
                        val: Vec::new(),
                    });
                }
                continue;
            }
            for p in self.cstart[v]..self.cstart[v + 1] {
                let i = self.crow[p];
                if !in_nz[i] {
                    in_nz[i] = true;
                    nz.push(i);
                    if eta_of_row[i] != usize::MAX {
                        heap.push(Reverse(eta_of_row[i]));
                    }
                }
                alpha[i] += self.cval[p];
            }
            let mut last = usize::MAX;
            while let Some(Reverse(k)) = heap.pop() {
                if k == last {
                    continue;
                }
                last = k;
                let e = &self.etas[k];
                let t = alpha[e.row];
                if t == 0.0 {
                    continue;
                }
                alpha[e.row] = t * e.pivot_inv;
                for (&i, &a) in e.idx.iter().zip(&e.val) {
                    if !in_nz[i] {
                        in_nz[i] = true;
                        nz.push(i);
                    }
                    alpha[i] += a * t;
                    let ki = eta_of_row[i];
                    if ki != usize::MAX && ki > k {
                        heap.push(Reverse(ki));
                    }
                }
            }
            let mut amax = 0.0f64;
            for &i in &nz {
                if !taken[i] {
                    amax = amax.max(alpha[i].abs());
                }
            }
            let mut best: Option<usize> = None;
            if amax > PIVOT_TOL {
                for &i in &nz {
                    if taken[i] || alpha[i].abs() < 0.1 * amax {
                        continue;
                    }
                    best = match best {
                        None => Some(i),
                        Some(b) => {
                            let key_i = (self.row_nnz[i], -alpha[i].abs(), i);
                            let key_b = (self.row_nnz[b], -alpha[b].abs(), b);
                            if key_i < key_b {
                                Some(i)
                            } else {
                                Some(b)
                            }
                        }
                    };
                }
            }
            match best {
                None => dropped.push(v),
                Some(r) => {
                    let ar = alpha[r];
                    let mut idx = Vec::new();
                    let mut val = Vec::new();
                    for &i in &nz {
                        if i != r && alpha[i].abs() > DROP_TOL {
                            idx.push(i);
                            val.push(-alpha[i] / ar);
                        }
                    }
                    eta_of_row[r] = self.etas.len();
                    self.etas.push(Eta {
                        row: r,
                        pivot_inv: 1.0 / ar,
                        idx,
                        val,
                    });
                    taken[r] = true;
                    new_head[r] = v;
                }
            }
            for &i in &nz {
                alpha[i] = 0.0;
                in_nz[i] = false;
            }
            nz.clear();
        }
        self.base_nnz = self.etas.iter().map(|e| e.idx.len()).sum();
        self.update_nnz = 0;
        let singular = !dropped.is_empty();
        for v in dropped {
            let (s, val) = self.nonbasic_at(v);
            self.state[v] = s;
            self.x[v] = val;
        }
        for i in 0..m {
            if !taken[i] {
                let s = self.ns + i;
                new_head[i] = s;
                self.state[s] = State::Basic;
            }
        }
        self.head = new_head;
        self.recompute_basics();
        if singular {
            let worst = self.max_primal_violation();
            if worst > 1e-6 {
                return Err(SolverError::NumericalFailure(format!(
                    "singular basis repair lost feasibility ({worst:.2e})"
                )));
            }
        }
        Ok(())
    }

    fn recompute_basics(&mut self) {
        let mut r = self.rhs.clone();
        let nvar = self.lb.len();
        for j in 0..nvar {
            if self.state[j] == State::Basic || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            if j < self.ns {
                for p in self.cstart[j]..self.cstart[j + 1] {
                    r[self.crow[p]] -= self.cval[p] * xj;
                }
            } else if j < self.ns + self.m {
                r[j - self.ns] -= xj;
            } else {
                let a = j - self.ns - self.m;
                r[self.art_row[a]] -= self.art_sign[a] * xj;
            }
        }
        self.ftran(&mut r);
        for (pos, &v) in self.head.iter().enumerate() {
            self.x[v] = r[pos];
        }
    }

    fn max_primal_violation(&self) -> f64 {
        self.head
            .iter()
            .map(|&v| {
                let lo = self.lb[v] - self.x[v];
                let hi = self.x[v] - self.ub[v];
                lo.max(hi).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    fn run_phase(&mut self) -> Result<PhaseEnd, SolverError> {
        let nvar = self.lb.len();
        let mut degenerate_run = 0usize;
        let mut bland = self.always_bland;
        let mut alpha = vec![0.0; self.m];
        let mut verified = false;
        loop {
            if self.updates >= REFACTOR_EVERY || self.update_nnz > 2 * self.base_nnz + 4 * self.m {
                self.reinvert()?;
            }
            if self.iterations > self.max_iter {
                return Err(SolverError::NumericalFailure("simplex iteration limit reached".into()));
            }
            let pi = self.prices();
            let cscale = 1.0 + self.cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
            let dtol = DUAL_TOL * cscale;
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..nvar {
                let st = self.state[j];
                if st == State::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let d = self.cost[j] - self.col_dot(j, &pi);
                let attractive = match st {
                    State::Lower => d < -dtol,
                    State::Upper => d > dtol,
                    State::Zero => d.abs() > dtol,
                    State::Basic => false,
                };
                if !attractive {
                    continue;
                }
                if bland {
                    enter = Some((j, d));
                    break;
                }
                match enter {
                    Some((_, bd)) if bd.abs() >= d.abs() => {}
                    _ => enter = Some((j, d)),
                }
            }
            let Some((q, dq)) = enter else {
                if verified {
                    return Ok(PhaseEnd::Optimal);
                }
                // fresh factorisation before declaring optimality
                self.reinvert()?;
                verified = true;
                continue;
            };
            verified = false;
            let dir = if dq < 0.0 { 1.0 } else { -1.0 };
            self.scatter_col(q, &mut alpha);
            self.ftran(&mut alpha);

            let range = self.ub[q] - self.lb[q];
            let (theta, leave) = self.ratio_test(&alpha, dir, bland);
            let flip = range.is_finite() && leave.map_or(true, |_| range <= theta);
            if leave.is_none() && !flip {
                return Ok(PhaseEnd::Unbounded);
            }
            let step = if flip { range } else { theta };
            if step != 0.0 {
                self.x[q] += dir * step;
                for pos in 0..self.m {
                    let a = alpha[pos];
                    if a != 0.0 {
                        let v = self.head[pos];
                        self.x[v] -= dir * step * a;
                    }
                }
            }
            if flip {
                if dir > 0.0 {
                    self.state[q] = State::Upper;
                    self.x[q] = self.ub[q];
                } else {
                    self.state[q] = State::Lower;
                    self.x[q] = self.lb[q];
                }
            } else {
                let r = leave.expect("leaving row");
                let l = self.head[r];
                let moving_down = dir * alpha[r] > 0.0;
                if moving_down {
                    self.x[l] = self.lb[l];
                    self.state[l] = State::Lower;
                } else {
                    self.x[l] = self.ub[l];
                    self.state[l] = State::Upper;
                }
                self.push_eta(r, &alpha);
                self.updates += 1;
                self.head[r] = q;
                self.state[q] = State::Basic;
            }
            self.iterations += 1;
            if step <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run > DEGEN_SWITCH {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = self.always_bland;
            }
        }
    }

    /// Returns the step length and leaving position (None if unbounded in that direction).
    fn ratio_test(&self, alpha: &[f64], dir: f64, bland: bool) -> (f64, Option<usize>) {
        let m = self.m;
        if bland {
            let mut best: Option<(f64, usize, usize)> = None;
            for pos in 0..m {
                let a = dir * alpha[pos];
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                let v = self.head[pos];
                let ratio = if a > 0.0 {
                    if !self.lb[v].is_finite() {
                        continue;
                    }
                    ((self.x[v] - self.lb[v]) / a).max(0.0)
                } else {
                    if !self.ub[v].is_finite() {
                        continue;
                    }
                    ((self.ub[v] - self.x[v]) / -a).max(0.0)
                };
                best = match best {
                    None => Some((ratio, v, pos)),
                    Some((br, bv, bp)) => {
                        if ratio < br - 1e-12 || (ratio <= br + 1e-12 && v < bv) {
                            Some((ratio, v, pos))
                        } else {
                            Some((br, bv, bp))
                        }
                    }
                };
            }
            return match best {
                Some((r, _, p)) => (r, Some(p)),
                None => (f64::INFINITY, None),
            };
        }
        // Harris two-pass
        let mut theta_max = f64::INFINITY;
        for pos in 0..m {
            let a = dir * alpha[pos];
            if a.abs() < PIVOT_TOL {
                continue;
            }
            let v = self.head[pos];
            let lim = if a > 0.0 {
                if !self.lb[v].is_finite() {
                    continue;
                }
                (self.x[v] - self.lb[v] + PRIMAL_TOL) / a
            } else {
                if !self.ub[v].is_finite() {
                    continue;
                }
                (self.ub[v] - self.x[v] + PRIMAL_TOL) / -a
            };
            theta_max = theta_max.min(lim);
        }
        if !theta_max.is_finite() {
            return (f64::INFINITY, None);
        }
        let mut best: Option<(f64, f64, usize)> = None;
        for pos in 0..m {
            let a = dir * alpha[pos];
            if a.abs() < PIVOT_TOL {
                continue;
            }
            let v = self.head[pos];
            let ratio = if a > 0.0 {
                if !self.lb[v].is_finite() {
                    continue;
                }
                (self.x[v] - self.lb[v]) / a
            } else {
                if !self.ub[v].is_finite() {
                    continue;
                }
                (self.ub[v] - self.x[v]) / -a
            };
            if ratio <= theta_max {
                let mag = a.abs();
                best = match best {
                    Some((bm, br, bp)) if bm >= mag => Some((bm, br, bp)),
                    _ => Some((mag, ratio, pos)),
                };
            }
        }
        match best {
            Some((_, r, p)) => (r.max(0.0), Some(p)),
            None => (f64::INFINITY, None),
        }
    }

    /// Pivots basic artificials (already fixed at zero) out of the basis where possible.
    fn drive_out_artificials(&mut self) {
        let base = self.ns + self.m;
        let mut alpha = vec![0.0; self.m];
        for r in 0..self.m {
            let v = self.head[r];
            if v < base {
                continue;
            }
            // row r of B^{-1}
            let mut rho = std::mem::take(&mut self.work);
            rho.iter_mut().for_each(|e| *e = 0.0);
            rho[r] = 1.0;
            self.btran(&mut rho);
            let mut pick = None;
            for j in 0..base {
                if self.state[j] == State::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                if self.col_dot(j, &rho).abs() > 1e-7 {
                    pick = Some(j);
                    break;
                }
            }
            self.work = rho;
            if let Some(j) = pick {
                self.scatter_col(j, &mut alpha);
                self.ftran(&mut alpha);
                self.push_eta(r, &alpha);
                self.updates += 1;
                self.head[r] = j;
                self.state[j] = State::Basic;
                self.state[v] = State::Lower;
                self.x[v] = 0.0;
            }
        }
    }
}
