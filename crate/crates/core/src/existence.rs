//! Existence of decision-corrected rates: the parameter-only test and the
//! membership test for the fluid-correctable set `B`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::ServiceNetwork;
use crate::optkernel::{solve_mip, LinearProgram, MipFeasibilityProblem, MipOptions, MipOutcome, Sense, SolverError};

/// `b_h` above this counts as staffed.
pub const EPS_STAFF: f64 = 1e-9;
/// Tolerance of the independent certificate check.
pub const CERT_TOL: f64 = 1e-7;
/// Exact-arithmetic slack for the classwise-minimum test on parameters.
const PARAM_TOL: f64 = 1e-12;

/// Which pools need a witness in [`universal_existence`].
#[derive(Clone, Debug, PartialEq)]
pub enum RequiredPools {
    All,
    /// Pools staffed by the given vector.
    StaffedBy(Vec<f64>),
    List(Vec<usize>),
}

impl RequiredPools {
    fn resolve(&self, m: usize) -> Vec<usize> {
        match self {
            RequiredPools::All => (0..m).collect(),
            RequiredPools::StaffedBy(b) => (0..m).filter(|&h| b.get(h).copied().unwrap_or(0.0) > EPS_STAFF).collect(),
            RequiredPools::List(v) => {
                let mut v: Vec<usize> = v.iter().copied().filter(|&h| h < m).collect();
                v.sort_unstable();
                v.dedup();
                v
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolWitness {
    pub pool: usize,
    pub activity: Option<usize>,
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalExistenceReport {
    pub holds: bool,
    pub required_pools: Vec<usize>,
    pub per_pool_witness: Vec<PoolWitness>,
}

/// Classwise-minimal activities of the vector `r` over activities.
fn classwise_min(net: &ServiceNetwork, r: &[f64]) -> Vec<f64> {
    let mut best = vec![f64::INFINITY; net.n()];
    for j in 0..net.k() {
        let i = net.class_of(j);
        best[i] = best[i].min(r[j]);
    }
    best
}

/// Parameter-only existence: every required pool must own an activity that is
/// cheapest within its class under `A^T c` and priced at most its penalty.
pub fn universal_existence(net: &ServiceNetwork, required: &RequiredPools) -> UniversalExistenceReport {
    let pools = required.resolve(net.m());
    let cost = net.at_times(net.c());
    let best = classwise_min(net, &cost);
    let mut witnesses = Vec::with_capacity(pools.len());
    for &h in &pools {
        let mut reason = None;
        let mut found = None;
        for j in net.activities_of_pool(h) {
            let i = net.class_of(j);
            let minimal = cost[j] <= best[i] + PARAM_TOL * (1.0 + best[i].abs());
            let capped = cost[j] <= net.p()[i] + PARAM_TOL * (1.0 + net.p()[i].abs());
            if minimal && capped {
                found = Some(j);
                break;
            }
            if reason.is_none() {
                reason = Some(if !minimal {
                    format!("activity {j}: cost {} exceeds class {i} minimum {}", cost[j], best[i])
                } else {
                    format!("activity {j}: cost {} exceeds penalty {}", cost[j], net.p()[i])
                });
            }
        }
        witnesses.push(PoolWitness {
            pool: h,
            activity: found,
            reason: if found.is_some() { None } else { reason.or(Some("pool has no activities".into())) },
        });
    }
    UniversalExistenceReport {
        holds: witnesses.iter().all(|w| w.activity.is_some()),
        required_pools: pools,
        per_pool_witness: witnesses,
    }
}

/// Dual sequence witnessing membership in `B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateY {
    /// `T x m` capacity prices.
    pub y: Vec<Vec<f64>>,
    /// `witnesses[t][h]` is set whenever `y[t][h] > 0`.
    pub witnesses: Vec<Vec<Option<usize>>>,
    /// `c~ - sum_t y_t`.
    pub slack_b1: Vec<f64>,
}

impl CertificateY {
    pub fn periods(&self) -> usize {
        self.y.len()
    }

    /// The all-zero certificate, valid exactly when nothing is staffed.
    pub fn zero(net: &ServiceNetwork, t: usize) -> Self {
        CertificateY {
            y: vec![vec![0.0; net.m()]; t],
            witnesses: vec![vec![None; net.m()]; t],
            slack_b1: net.c_tilde(t),
        }
    }
}

/// Independent check of (B1)-(B3) for `cert` at staffing `b`; returns the list of violations.
pub fn check_certificate(net: &ServiceNetwork, b: &[f64], cert: &CertificateY, tol: f64) -> Vec<String> {
    let mut bad = Vec::new();
    let (m, t) = (net.m(), cert.periods());
    if b.len() != m || cert.y.iter().any(|r| r.len() != m) || cert.witnesses.len() != t || cert.witnesses.iter().any(|r| r.len() != m) {
        return vec!["dimension mismatch".into()];
    }
    let ct = net.c_tilde(t);
    for h in 0..m {
        let sum: f64 = cert.y.iter().map(|r| r[h]).sum();
        if sum > ct[h] + tol {
            bad.push(format!("(B1) pool {h}: sum y = {sum} > {}", ct[h]));
        }
        if b[h] > EPS_STAFF && (sum - ct[h]).abs() > tol {
            bad.push(format!("(B2) staffed pool {h}: sum y = {sum} != {}", ct[h]));
        }
    }
    for (s, ys) in cert.y.iter().enumerate() {
        if let Some(h) = ys.iter().position(|v| *v < -tol || !v.is_finite()) {
            bad.push(format!("y[{s}][{h}] is negative"));
        }
        let r = net.at_times(ys);
        let best = classwise_min(net, &r);
        for h in 0..m {
            if ys[h] <= tol {
                continue;
            }
            match cert.witnesses[s][h] {
                None => bad.push(format!("(B3) period {s}, pool {h}: no witness")),
                Some(j) if j >= net.k() || net.pool_of(j) != h => {
                    bad.push(format!("(B3) period {s}, pool {h}: activity {j} is not on this pool"))
                }
                Some(j) => {
                    let i = net.class_of(j);
                    if r[j] > best[i] + tol {
                        bad.push(format!("(B3) period {s}, pool {h}: activity {j} not classwise minimal"));
                    }
                    if r[j] > net.p()[i] + tol {
                        bad.push(format!("(B3) period {s}, pool {h}: activity {j} price above penalty"));
                    }
                }
            }
        }
    }
    bad
}

/// Column layout of the certificate MIP.
#[derive(Clone, Debug)]
pub struct CertificateLayout {
    pub periods: usize,
    m: usize,
    k: usize,
    smooth: bool,
}

impl CertificateLayout {
    fn stride(&self) -> usize {
        2 * (self.m + self.k)
    }
    pub fn y(&self, t: usize, h: usize) -> usize {
        t * self.stride() + h
    }
    pub fn r(&self, t: usize, j: usize) -> usize {
        t * self.stride() + self.m + j
    }
    pub fn w(&self, t: usize, h: usize) -> usize {
        t * self.stride() + self.m + self.k + h
    }
    pub fn v(&self, t: usize, j: usize) -> usize {
        t * self.stride() + 2 * self.m + self.k + j
    }
    /// Smoothness bound of pool `h`, present only in the smooth variant.
    pub fn delta(&self, h: usize) -> Option<usize> {
        self.smooth.then(|| self.periods * self.stride() + h)
    }
    pub fn num_vars(&self) -> usize {
        self.periods * self.stride() + if self.smooth { self.m } else { 0 }
    }
}

/// Big-M feasibility MIP for membership of `b` in `B` (optionally with the
/// smoothness objective `min sum_h delta_h`).
pub fn build_certificate_mip(net: &ServiceNetwork, t: usize, b: &[f64], smooth: bool) -> Result<(MipFeasibilityProblem, CertificateLayout)> {
    if b.len() != net.m() {
        return Err(Error::Dimension(format!("staffing has {} entries, network has {} pools", b.len(), net.m())));
    }
    if b.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Precondition("staffing must be finite and nonnegative".into()));
    }
    if t == 0 {
        return Err(Error::Precondition("horizon must have at least one period".into()));
    }
    let (m, k) = (net.m(), net.k());
    let lay = CertificateLayout { periods: t, m, k, smooth };
    let ct = net.c_tilde(t);
    let big = net.at_times(&ct);
    let mut lp = LinearProgram::new(lay.num_vars());
    let mut binaries = Vec::with_capacity(t * (m + k));
    for s in 0..t {
        for h in 0..m {
            lp.set_bounds(lay.w(s, h), 0.0, 1.0);
            binaries.push(lay.w(s, h));
        }
        for j in 0..k {
            lp.set_bounds(lay.v(s, j), 0.0, 1.0);
            binaries.push(lay.v(s, j));
        }
    }
    // (C1), with (C2) tightening staffed pools to equality
    for h in 0..m {
        let row = (0..t).map(|s| (lay.y(s, h), 1.0)).collect();
        let sense = if b[h] > EPS_STAFF { Sense::Eq } else { Sense::Le };
        lp.add_row(row, sense, ct[h]);
    }
    for s in 0..t {
        for j in 0..k {
            // (C3)
            let h = net.pool_of(j);
            lp.add_row(vec![(lay.r(s, j), 1.0), (lay.y(s, h), -net.usage(j))], Sense::Eq, 0.0);
        }
        for h in 0..m {
            // (C4)
            lp.add_row(vec![(lay.y(s, h), 1.0), (lay.w(s, h), -ct[h])], Sense::Le, 0.0);
            // (C5)
            let mut row: Vec<(usize, f64)> = net.activities_of_pool(h).map(|j| (lay.v(s, j), 1.0)).collect();
            row.push((lay.w(s, h), -1.0));
            lp.add_row(row, Sense::Ge, 0.0);
        }
        for j in 0..k {
            let i = net.class_of(j);
            // (C6)
            lp.add_row(vec![(lay.v(s, j), 1.0), (lay.w(s, net.pool_of(j)), -1.0)], Sense::Le, 0.0);
            // (C7)
            for other in net.activities_of_class(i).filter(|&o| o != j) {
                lp.add_row(
                    vec![(lay.r(s, j), 1.0), (lay.r(s, other), -1.0), (lay.v(s, j), big[j])],
                    Sense::Le,
                    big[j],
                );
            }
            // (C8)
            lp.add_row(vec![(lay.r(s, j), 1.0), (lay.v(s, j), big[j])], Sense::Le, net.p()[i] + big[j]);
        }
    }
    let mut objective = None;
    if smooth {
        let mut obj = vec![0.0; lay.num_vars()];
        for h in 0..m {
            let d = lay.delta(h).expect("smooth layout");
            obj[d] = 1.0;
            for s in 0..t.saturating_sub(1) {
                lp.add_row(vec![(lay.y(s, h), 1.0), (lay.y(s + 1, h), -1.0), (d, -1.0)], Sense::Le, 0.0);
                lp.add_row(vec![(lay.y(s + 1, h), 1.0), (lay.y(s, h), -1.0), (d, -1.0)], Sense::Le, 0.0);
            }
        }
        objective = Some(obj);
    }
    let mut problem = MipFeasibilityProblem::new(lp, binaries);
    problem.objective = objective;
    Ok((problem, lay))
}

/// How a membership verdict was reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Uniform budget split checked period by period; a success is exact.
    Heuristic,
    /// Branch and bound on the certificate MIP.
    Mip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Membership {
    InB { certificate: CertificateY, method: Method },
    NotInB { message: String },
    /// The MIP was too large and the heuristic did not find a certificate.
    Undecided { message: String },
}

impl Membership {
    pub fn is_member(&self) -> bool {
        matches!(self, Membership::InB { .. })
    }
}

pub const NOT_IN_B_MESSAGE: &str = "no dual sequence satisfies (B1)-(B3)";

#[derive(Clone, Debug)]
pub struct MembershipOptions {
    pub smooth: bool,
    pub mip: MipOptions,
    /// Node budget of the smoothing search; the best incumbent found is kept.
    pub smooth_node_limit: usize,
}

impl Default for MembershipOptions {
    fn default() -> Self {
        MembershipOptions {
            smooth: false,
            mip: MipOptions::default(),
            smooth_node_limit: 200,
        }
    }
}

/// Witness of pool `h` under prices `y`: smallest classwise-minimal activity within the cap.
fn find_witness(net: &ServiceNetwork, y: &[f64], h: usize, tol: f64) -> Option<usize> {
    let r = net.at_times(y);
    let best = classwise_min(net, &r);
    net.activities_of_pool(h).find(|&j| {
        let i = net.class_of(j);
        r[j] <= best[i] + tol && r[j] <= net.p()[i] + tol
    })
}

fn certificate_from_y(net: &ServiceNetwork, y: Vec<Vec<f64>>, tol: f64) -> Option<CertificateY> {
    let t = y.len();
    let ct = net.c_tilde(t);
    let mut witnesses = vec![vec![None; net.m()]; t];
    for (s, ys) in y.iter().enumerate() {
        for h in 0..net.m() {
            if ys[h] > tol {
                witnesses[s][h] = Some(find_witness(net, ys, h, tol)?);
            }
        }
    }
    let slack_b1 = (0..net.m()).map(|h| ct[h] - y.iter().map(|r| r[h]).sum::<f64>()).collect();
    Some(CertificateY { y, witnesses, slack_b1 })
}

/// Fast path: `y_t = c~ / T` on staffed pools in every period. Each unstaffed
/// pool tries zero or a price matching a staffed competitor in one of its
/// classes (capped at `c~_h / T`). A certificate found here is exact.
pub fn uniform_split_certificate(net: &ServiceNetwork, t: usize, b: &[f64]) -> Option<CertificateY> {
    const MAX_COMBOS: usize = 4096;
    let ct = net.c_tilde(t);
    let m = net.m();
    let base: Vec<f64> = (0..m).map(|h| if b[h] > EPS_STAFF { ct[h] / t as f64 } else { 0.0 }).collect();
    let r = net.at_times(&base);
    let mut choices: Vec<(usize, Vec<f64>)> = Vec::new();
    for h in (0..m).filter(|&h| b[h] <= EPS_STAFF) {
        let cap = ct[h] / t as f64;
        let mut vals = vec![0.0];
        for j in net.activities_of_pool(h) {
            for o in net.activities_of_class(net.class_of(j)) {
                if b[net.pool_of(o)] > EPS_STAFF {
                    let v = r[o] / net.usage(j);
                    if v <= cap + CERT_TOL && !vals.iter().any(|w: &f64| (w - v).abs() <= 1e-12) {
                        vals.push(v.min(cap));
                    }
                }
            }
        }
        choices.push((h, vals));
    }
    let combos = choices.iter().try_fold(1usize, |acc, (_, v)| acc.checked_mul(v.len()).filter(|c| *c <= MAX_COMBOS));
    let combos = combos.unwrap_or(1);
    for mut code in 0..combos {
        let mut row = base.clone();
        for (h, vals) in &choices {
            row[*h] = vals[code % vals.len()];
            code /= vals.len();
        }
        if let Some(cert) = certificate_from_y(net, vec![row; t], CERT_TOL) {
            if check_certificate(net, b, &cert, CERT_TOL).is_empty() {
                return Some(cert);
            }
        }
    }
    None
}

/// Decides whether `b` lies in `B` over a horizon of `t` periods.
pub fn membership_in_b(net: &ServiceNetwork, t: usize, b: &[f64], opts: &MembershipOptions) -> Result<Membership> {
    let (problem, lay) = build_certificate_mip(net, t, b, opts.smooth)?;
    if b.iter().all(|v| *v <= EPS_STAFF) && !opts.smooth {
        return Ok(Membership::InB {
            certificate: CertificateY::zero(net, t),
            method: Method::Heuristic,
        });
    }
    let quick = uniform_split_certificate(net, t, b);
    if let (Some(cert), false) = (&quick, opts.smooth) {
        return Ok(Membership::InB {
            certificate: cert.clone(),
            method: Method::Heuristic,
        });
    }
    let mut problem = problem;
    if let Some(cert) = &quick {
        problem.incumbent = Some(mip_point(net, &lay, cert));
    }
    let mut mip = opts.mip.clone();
    if opts.smooth && quick.is_some() {
        mip.node_limit = mip.node_limit.min(opts.smooth_node_limit);
    }
    match solve_mip(&problem, &mip) {
        Ok(MipOutcome::Infeasible { .. }) => Ok(Membership::NotInB {
            message: NOT_IN_B_MESSAGE.into(),
        }),
        Ok(MipOutcome::Feasible { x, .. }) => {
            let cert = extract_certificate(net, &lay, &x)?;
            let bad = check_certificate(net, b, &cert, CERT_TOL);
            if !bad.is_empty() {
                return Err(Error::Certificate(bad.join("; ")));
            }
            Ok(Membership::InB {
                certificate: cert,
                method: Method::Mip,
            })
        }
        Err(e @ (SolverError::BinaryLimit { .. } | SolverError::NodeLimit(_))) => match quick {
            Some(cert) => Ok(Membership::InB {
                certificate: cert,
                method: Method::Heuristic,
            }),
            None => Ok(Membership::Undecided { message: e.to_string() }),
        },
        Err(e) => Err(e.into()),
    }
}

/// MIP point corresponding to a certificate (binaries set from its witnesses).
fn mip_point(net: &ServiceNetwork, lay: &CertificateLayout, cert: &CertificateY) -> Vec<f64> {
    let mut x = vec![0.0; lay.num_vars()];
    for (s, ys) in cert.y.iter().enumerate() {
        let r = net.at_times(ys);
        for h in 0..net.m() {
            x[lay.y(s, h)] = ys[h];
            if let Some(j) = cert.witnesses[s][h] {
                x[lay.w(s, h)] = 1.0;
                x[lay.v(s, j)] = 1.0;
            }
        }
        for j in 0..net.k() {
            x[lay.r(s, j)] = r[j];
        }
    }
    for h in 0..net.m() {
        if let Some(d) = lay.delta(h) {
            x[d] = (1..cert.y.len()).map(|s| (cert.y[s][h] - cert.y[s - 1][h]).abs()).fold(0.0, f64::max);
        }
    }
    x
}

/// Reads `y` from a MIP point; witnesses come from the `v` binaries, smallest index first.
fn extract_certificate(net: &ServiceNetwork, lay: &CertificateLayout, x: &[f64]) -> Result<CertificateY> {
    let t = lay.periods;
    let ct = net.c_tilde(t);
    let mut y = vec![vec![0.0; net.m()]; t];
    let mut witnesses = vec![vec![None; net.m()]; t];
    for s in 0..t {
        for h in 0..net.m() {
            let v = x[lay.y(s, h)];
            y[s][h] = if v > EPS_STAFF * (1.0 + ct[h]) { v } else { 0.0 };
        }
        for h in 0..net.m() {
            if y[s][h] > 0.0 {
                let w = net.activities_of_pool(h).find(|&j| x[lay.v(s, j)] > 0.5);
                witnesses[s][h] = Some(w.ok_or_else(|| Error::Certificate(format!("period {s}, pool {h}: priced without witness")))?);
            }
        }
    }
    let slack_b1 = (0..net.m()).map(|h| ct[h] - y.iter().map(|r| r[h]).sum::<f64>()).collect();
    Ok(CertificateY { y, witnesses, slack_b1 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyViolation {
    pub property: String,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetBPropertyReport {
    pub samples: usize,
    pub members: usize,
    pub same_support_pairs: usize,
    pub subset_pairs: usize,
    pub midpoints: usize,
    pub undecided: usize,
    pub violations: Vec<PropertyViolation>,
}

fn support(b: &[f64]) -> Vec<bool> {
    b.iter().map(|v| *v > EPS_STAFF).collect()
}

/// Checks support invariance, subset monotonicity and midpoint convexity of `B`
/// on the given staffing samples, solving a membership problem for each vector.
pub fn set_b_properties(net: &ServiceNetwork, t: usize, samples: &[Vec<f64>], opts: &MembershipOptions) -> Result<SetBPropertyReport> {
    let verdict = |b: &[f64]| -> Result<Option<bool>> {
        Ok(match membership_in_b(net, t, b, opts)? {
            Membership::InB { .. } => Some(true),
            Membership::NotInB { .. } => Some(false),
            Membership::Undecided { .. } => None,
        })
    };
    let verdicts: Vec<Option<bool>> = samples.iter().map(|b| verdict(b)).collect::<Result<_>>()?;
    let mut rep = SetBPropertyReport {
        samples: samples.len(),
        members: verdicts.iter().filter(|v| **v == Some(true)).count(),
        same_support_pairs: 0,
        subset_pairs: 0,
        midpoints: 0,
        undecided: verdicts.iter().filter(|v| v.is_none()).count(),
        violations: Vec::new(),
    };
    let sup: Vec<Vec<bool>> = samples.iter().map(|b| support(b)).collect();
    for a in 0..samples.len() {
        for c in 0..samples.len() {
            if a == c {
                continue;
            }
            let (Some(va), Some(vc)) = (verdicts[a], verdicts[c]) else { continue };
            if a < c && sup[a] == sup[c] {
                rep.same_support_pairs += 1;
                if va != vc {
                    rep.violations.push(PropertyViolation {
                        property: "same-support invariance".into(),
                        first: samples[a].clone(),
                        second: samples[c].clone(),
                        detail: format!("verdicts {va} and {vc}"),
                    });
                }
            }
            if va && sup[c].iter().zip(&sup[a]).all(|(s, p)| !s || *p) {
                rep.subset_pairs += 1;
                if !vc {
                    rep.violations.push(PropertyViolation {
                        property: "subset monotonicity".into(),
                        first: samples[a].clone(),
                        second: samples[c].clone(),
                        detail: "smaller support rejected".into(),
                    });
                }
            }
            if a < c && va && vc {
                rep.midpoints += 1;
                let mid: Vec<f64> = samples[a].iter().zip(&samples[c]).map(|(x, y)| 0.5 * (x + y)).collect();
                match verdict(&mid)? {
                    Some(false) => rep.violations.push(PropertyViolation {
                        property: "midpoint convexity".into(),
                        first: samples[a].clone(),
                        second: samples[c].clone(),
                        detail: format!("midpoint {mid:?} rejected"),
                    }),
                    None => rep.undecided += 1,
                    Some(true) => {}
                }
            }
        }
    }
    Ok(rep)
}
