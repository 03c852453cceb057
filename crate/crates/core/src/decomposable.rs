//! Quantile corrections for decomposable networks, the two-customer newsvendor,
//! and the hybrid solve that mixes them with the general pipeline.

use serde::{Deserialize, Serialize};

use crate::correction::{self, CorrectionOptions, Outcome};
use crate::demand::{empirical_mixture_cdf, DemandScenarioSet, EmpiricalMixtureCdf};
use crate::error::{Error, Result};
use crate::network::{decompose, NetworkComponent, ServiceNetwork};
use crate::twostage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentKind {
    Case1SingleSingle,
    Case2ManySingle,
    SingleServerMultiCustomer,
    General,
}

/// Classification of one component, with the pools removed by dominance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentRule {
    pub component: NetworkComponent,
    pub kind: ComponentKind,
    /// Pools never staffed because a cheaper pool serves the same single class.
    pub pruned_pools: Vec<usize>,
    /// The pool kept after pruning (single-class components).
    pub kept_pool: Option<usize>,
}

/// Classifies a component of `net` (indices refer to `net`).
pub fn classify_component(net: &ServiceNetwork, comp: &NetworkComponent) -> ComponentRule {
    let (np, nc) = (comp.pools.len(), comp.classes.len());
    let mut rule = ComponentRule {
        component: comp.clone(),
        kind: ComponentKind::General,
        pruned_pools: Vec::new(),
        kept_pool: None,
    };
    if nc == 1 {
        // effective cost c_h A_hj of each pool's activity on the only class
        let mut best: Option<(f64, usize)> = None;
        for &j in &comp.activities {
            let h = net.pool_of(j);
            let cost = net.c()[h] * net.usage(j);
            if best.map_or(true, |(bc, bh)| cost < bc || (cost == bc && h < bh)) {
                best = Some((cost, h));
            }
        }
        let kept = best.map(|(_, h)| h);
        rule.kept_pool = kept;
        rule.pruned_pools = comp.pools.iter().copied().filter(|h| Some(*h) != kept).collect();
        rule.kind = if np == 1 { ComponentKind::Case1SingleSingle } else { ComponentKind::Case2ManySingle };
    } else if np == 1 && nc == 2 {
        rule.kind = ComponentKind::SingleServerMultiCustomer;
        rule.kept_pool = Some(comp.pools[0]);
    }
    rule
}

/// Quantile staffing of one pool serving one class through one activity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileRule {
    pub pool: usize,
    pub class: usize,
    pub activity: usize,
    /// Demand level `q` (class units); the corrected rate in every period.
    pub level: f64,
    pub b: f64,
}

/// `b* = A F_mix^{-1}(1 - c A / p)` for the single remaining activity of a
/// single-class component; zero when `c A >= p`.
pub fn case1_quantile(net: &ServiceNetwork, rule: &ComponentRule, ds: &DemandScenarioSet) -> Result<QuantileRule> {
    if !matches!(rule.kind, ComponentKind::Case1SingleSingle | ComponentKind::Case2ManySingle) {
        return Err(Error::Precondition("quantile rule needs a single-class component".into()));
    }
    let class = rule.component.classes[0];
    let pool = rule.kept_pool.ok_or_else(|| Error::Precondition("component has no pool".into()))?;
    let activity = rule
        .component
        .activities
        .iter()
        .copied()
        .find(|&j| net.pool_of(j) == pool && net.class_of(j) == class)
        .ok_or_else(|| Error::Precondition("kept pool has no activity".into()))?;
    let a = net.usage(activity);
    let ratio = net.c()[pool] * a / net.p()[class];
    let cdf = empirical_mixture_cdf(ds, class)?;
    if cdf.is_empty() {
        return Err(Error::EmptySamples);
    }
    let level = if ratio >= 1.0 { 0.0 } else { cdf.quantile(1.0 - ratio) };
    Ok(QuantileRule {
        pool,
        class,
        activity,
        level,
        b: a * level,
    })
}

/// Root of the Appendix-style first-order condition
/// `c = p1 (1 - F1(Q)) + p2 int_0^Q (1 - F2(Q - x)) dF1(x)`
/// with independent empirical distributions for the two classes.
pub fn two_customer_newsvendor(p1: f64, p2: f64, c: f64, f1: &[f64], f2: &[f64]) -> Result<f64> {
    if f1.len() < 2 || f2.len() < 2 {
        return Err(Error::Precondition("need at least two samples per class".into()));
    }
    check_prices(p1, p2, c)?;
    let mut s1 = f1.to_vec();
    let mut s2 = f2.to_vec();
    s1.sort_by(f64::total_cmp);
    s2.sort_by(f64::total_cmp);
    let c1 = EmpiricalMixtureCdf::from_samples(s1.clone())?;
    let c2 = EmpiricalMixtureCdf::from_samples(s2.clone())?;
    let m1 = s1.len() as f64;
    let g = |q: f64| -> f64 {
        let inner: f64 = s1.iter().take_while(|&&x| x < q).map(|&x| 1.0 - c2.cdf(q - x)).sum::<f64>() / m1;
        p1 * (1.0 - c1.cdf(q)) + p2 * inner - c
    };
    let hi = s1.last().copied().unwrap_or(0.0) + s2.last().copied().unwrap_or(0.0);
    Ok(bisect(g, 0.0, hi.max(0.0)))
}

/// Same condition with analytic distribution functions supported on `[0, upper]`.
pub fn two_customer_newsvendor_analytic(
    p1: f64,
    p2: f64,
    c: f64,
    f1: impl Fn(f64) -> f64,
    f2: impl Fn(f64) -> f64,
    upper: f64,
) -> Result<f64> {
    check_prices(p1, p2, c)?;
    const STEPS: usize = 20_000;
    let g = |q: f64| -> f64 {
        // Stieltjes sum of (1 - F2(Q - x)) dF1(x) over [0, Q] at midpoints
        let h = q / STEPS as f64;
        let mut inner = 0.0;
        let mut prev = f1(0.0);
        for s in 0..STEPS {
            let next = f1((s + 1) as f64 * h);
            let mid = (s as f64 + 0.5) * h;
            inner += (next - prev) * (1.0 - f2(q - mid));
            prev = next;
        }
        p1 * (1.0 - f1(q)) + p2 * inner - c
    };
    Ok(bisect(g, 0.0, upper))
}

fn check_prices(p1: f64, p2: f64, c: f64) -> Result<()> {
    if !(p1 >= p2 && p2 >= 0.0 && c > 0.0) || !p1.is_finite() {
        return Err(Error::Precondition("need p1 >= p2 >= 0 and c > 0".into()));
    }
    Ok(())
}

/// Largest-to-zero crossing of a nonincreasing function on `[lo, hi]`; `lo` if `g(lo) <= 0`.
fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    if g(lo) <= 0.0 {
        return lo;
    }
    if g(hi) > 0.0 {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * (1.0 + hi.abs()) {
            break;
        }
    }
    hi
}

/// Priority rule on one pool shared by two classes, evaluated on paired
/// per-period samples in capacity units. This is the smallest minimiser of the
/// sampled cost, so it coincides with the SAA staffing for the component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharedPoolRule {
    pub pool: usize,
    /// Classes by descending penalty per unit of capacity.
    pub priority: Vec<usize>,
    pub b: f64,
}

pub fn shared_pool_capacity(net: &ServiceNetwork, rule: &ComponentRule, ds: &DemandScenarioSet) -> Result<SharedPoolRule> {
    if rule.kind != ComponentKind::SingleServerMultiCustomer {
        return Err(Error::Precondition("shared-pool rule needs one pool and two classes".into()));
    }
    let pool = rule.component.pools[0];
    let acts: Vec<usize> = rule.component.activities.clone();
    if acts.len() != 2 {
        return Err(Error::Precondition("shared pool must have one activity per class".into()));
    }
    let unit = |j: usize| net.p()[net.class_of(j)] / net.usage(j);
    let (hi, lo) = if unit(acts[0]) >= unit(acts[1]) { (acts[0], acts[1]) } else { (acts[1], acts[0]) };
    let (p1, p2) = (unit(hi), unit(lo));
    let c = net.c()[pool];
    // weighted (first-class, combined) capacity demands per slice
    let mut pairs: Vec<(f64, f64, f64)> = Vec::new();
    let t = ds.periods() as f64;
    for (path, &w) in ds.paths().iter().zip(ds.weights()) {
        for d in path {
            let d1 = d[net.class_of(hi)] * net.usage(hi);
            let d2 = d[net.class_of(lo)] * net.usage(lo);
            pairs.push((w / t, d1, d1 + d2));
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptySamples);
    }
    // marginal value of capacity just above q
    let g = |q: f64| -> f64 {
        pairs
            .iter()
            .map(|&(w, d1, tot)| w * if d1 > q { p1 } else if tot > q { p2 } else { 0.0 })
            .sum::<f64>()
            - c
    };
    let mut cands: Vec<f64> = std::iter::once(0.0).chain(pairs.iter().flat_map(|&(_, a, b)| [a, b])).collect();
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    // g is a nonincreasing step function; find the first candidate with g <= 0
    let (mut lo_i, mut hi_i) = (0usize, cands.len() - 1);
    let b = if g(cands[0]) <= 0.0 {
        cands[0]
    } else if g(cands[hi_i]) > 0.0 {
        cands[hi_i]
    } else {
        while hi_i - lo_i > 1 {
            let mid = (lo_i + hi_i) / 2;
            if g(cands[mid]) > 0.0 {
                lo_i = mid;
            } else {
                hi_i = mid;
            }
        }
        cands[hi_i]
    };
    Ok(SharedPoolRule {
        pool,
        priority: vec![net.class_of(hi), net.class_of(lo)],
        b,
    })
}

/// Method used for one component of a hybrid plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentPlan {
    pub rule: ComponentRule,
    pub method: String,
    pub outcome: Option<Outcome>,
    /// Set when no corrected rate exists and a best-effort profile was used.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridPlan {
    /// Staffing over all pools of the network.
    pub b: Vec<f64>,
    /// Corrected `T x n` profile over all classes.
    pub lambda: Vec<Vec<f64>>,
    pub components: Vec<ComponentPlan>,
}

/// Best-effort constant profile: each staffed pool loads its cheapest activity
/// relative to the class minimum (smallest index on ties).
pub fn step1_fallback_lambda(net: &ServiceNetwork, b: &[f64], t: usize) -> Vec<Vec<f64>> {
    let cost = net.at_times(net.c());
    let mut best = vec![f64::INFINITY; net.n()];
    for j in 0..net.k() {
        best[net.class_of(j)] = best[net.class_of(j)].min(cost[j]);
    }
    let mut x = vec![0.0; net.k()];
    for h in 0..net.m() {
        if b[h] <= crate::existence::EPS_STAFF {
            continue;
        }
        let j = net
            .activities_of_pool(h)
            .min_by(|&a, &c| {
                let ka = cost[a] - best[net.class_of(a)];
                let kc = cost[c] - best[net.class_of(c)];
                ka.total_cmp(&kc).then(a.cmp(&c))
            })
            .expect("pool has an activity");
        x[j] = b[h] / net.usage(j);
    }
    vec![net.r_times(&x); t]
}

/// Splits capacity `b` of a shared pool over its classes in proportion to mean
/// capacity demand, restricted to classes worth serving.
fn shared_pool_profile(net: &ServiceNetwork, rule: &SharedPoolRule, ds: &DemandScenarioSet, acts: &[usize]) -> Vec<f64> {
    let mean = ds.mean_path();
    let t = ds.periods() as f64;
    let c = net.c()[rule.pool];
    let mut share: Vec<(usize, f64, f64)> = Vec::new();
    for &j in acts {
        let i = net.class_of(j);
        if c * net.usage(j) < net.p()[i] {
            let m: f64 = mean.iter().map(|r| r[i]).sum::<f64>() / t;
            share.push((i, net.usage(j), m * net.usage(j)));
        }
    }
    let mut out = vec![0.0; net.n()];
    if share.is_empty() || rule.b <= 0.0 {
        return out;
    }
    let total: f64 = share.iter().map(|s| s.2).sum();
    for &(i, a, w) in &share {
        let frac = if total > 0.0 { w / total } else { 1.0 / share.len() as f64 };
        out[i] = rule.b * frac / a;
    }
    out
}

/// Solves every component with the cheapest applicable rule and assembles
/// network-wide staffing and a corrected profile.
pub fn hybrid_solve(net: &ServiceNetwork, ds: &DemandScenarioSet, opts: &CorrectionOptions) -> Result<HybridPlan> {
    if ds.classes() != net.n() {
        return Err(Error::Dimension(format!("demand has {} classes, network has {}", ds.classes(), net.n())));
    }
    let t = ds.periods();
    let mut b = vec![0.0; net.m()];
    let mut lambda = vec![vec![0.0; net.n()]; t];
    let mut plans = Vec::new();
    for comp in decompose(net) {
        let rule = classify_component(net, &comp);
        let mut plan = ComponentPlan {
            rule: rule.clone(),
            method: String::new(),
            outcome: None,
            flagged: false,
        };
        match rule.kind {
            ComponentKind::Case1SingleSingle | ComponentKind::Case2ManySingle => {
                let q = case1_quantile(net, &rule, ds)?;
                b[q.pool] = q.b;
                for row in lambda.iter_mut() {
                    row[q.class] = q.level;
                }
                plan.method = "quantile".into();
            }
            ComponentKind::SingleServerMultiCustomer => {
                let s = shared_pool_capacity(net, &rule, ds)?;
                b[s.pool] = s.b;
                let rate = shared_pool_profile(net, &s, ds, &comp.activities);
                for row in lambda.iter_mut() {
                    for &i in &comp.classes {
                        row[i] = rate[i];
                    }
                }
                plan.method = "shared-pool-priority".into();
            }
            ComponentKind::General => {
                let sub = net.restrict(&comp)?;
                let sub_ds = ds.restrict_classes(&comp.classes)?;
                let res = correction::run_algorithm1(&sub, &sub_ds, opts)?;
                for (local, &h) in comp.pools.iter().enumerate() {
                    b[h] = res.b_star[local];
                }
                let profile = match &res.lambda {
                    Some(l) => l.lambda.clone(),
                    None => {
                        plan.flagged = true;
                        step1_fallback_lambda(&sub, &res.b_star, t)
                    }
                };
                for (s, row) in lambda.iter_mut().enumerate() {
                    for (local, &i) in comp.classes.iter().enumerate() {
                        row[i] = profile[s][local];
                    }
                }
                plan.outcome = Some(res.outcome);
                plan.method = "algorithm1".into();
            }
        }
        plans.push(plan);
    }
    Ok(HybridPlan { b, lambda, components: plans })
}

/// SAA objective of each component solved on its own.
pub fn componentwise_saa_objectives(net: &ServiceNetwork, ds: &DemandScenarioSet) -> Result<Vec<f64>> {
    decompose(net)
        .iter()
        .map(|comp| {
            let sub = net.restrict(comp)?;
            let sub_ds = ds.restrict_classes(&comp.classes)?;
            Ok(twostage::solve_saa(&sub, &sub_ds)?.objective)
        })
        .collect()
}
