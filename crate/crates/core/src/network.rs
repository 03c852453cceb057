//! Service-network topology: classes, pools and the activities linking them.
//!
//! Indices are 0-based throughout. Activity `j` serves class `class_of[j]`
//! from pool `pool_of[j]` and consumes `A[pool_of[j]][j]` units of pool
//! capacity per unit of served demand.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One invariant failure reported by [`validate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DimensionMismatch { detail: String },
    NonFinite { field: String },
    Negative { field: String, index: usize },
    RoutingNotBinary { class: usize, activity: usize },
    RoutingColumn { activity: usize, nonzeros: usize },
    CapacityColumn { activity: usize, positives: usize },
    ClassUnreachable { class: usize },
    PoolUnused { pool: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DimensionMismatch { detail } => write!(f, "dimension mismatch: {detail}"),
            Violation::NonFinite { field } => write!(f, "non-finite entry in {field}"),
            Violation::Negative { field, index } => write!(f, "negative entry {index} in {field}"),
            Violation::RoutingNotBinary { class, activity } => {
                write!(f, "R[{class}][{activity}] is not 0 or 1")
            }
            Violation::RoutingColumn { activity, nonzeros } => {
                write!(f, "activity {activity} has {nonzeros} classes in R (expected 1)")
            }
            Violation::CapacityColumn { activity, positives } => {
                write!(f, "activity {activity} has {positives} positive pools in A (expected 1)")
            }
            Violation::ClassUnreachable { class } => write!(f, "class unreachable: class {class} has no activity"),
            Violation::PoolUnused { pool } => write!(f, "pool unused: pool {pool} has no activity"),
        }
    }
}

/// A matrix given either flat row-major or as nested rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixInput {
    Nested(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

/// Unvalidated network description, the on-disk JSON form.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    #[serde(rename = "R")]
    pub r: MatrixInput,
    #[serde(rename = "A")]
    pub a: MatrixInput,
    pub c: Vec<f64>,
    pub p: Vec<f64>,
}

fn to_rows(mat: &MatrixInput, rows: usize, cols: usize, name: &str) -> std::result::Result<Vec<Vec<f64>>, Violation> {
    let out = match mat {
        MatrixInput::Nested(v) => v.clone(),
        MatrixInput::Flat(v) => {
            if v.len() != rows * cols {
                return Err(Violation::DimensionMismatch {
                    detail: format!("{name} has {} entries, expected {rows}x{cols}", v.len()),
                });
            }
            v.chunks(cols.max(1)).map(|c| c.to_vec()).take(rows).collect()
        }
    };
    if out.len() != rows || out.iter().any(|r| r.len() != cols) {
        return Err(Violation::DimensionMismatch {
            detail: format!("{name} is not {rows}x{cols}"),
        });
    }
    Ok(out)
}

/// Validated, immutable service network.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ServiceNetwork {
    n: usize,
    m: usize,
    k: usize,
    r: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    c: Vec<f64>,
    p: Vec<f64>,
    class_of: Vec<usize>,
    pool_of: Vec<usize>,
}

/// Returns every violated invariant of `spec`; empty means valid.
pub fn validate(spec: &NetworkSpec) -> Vec<Violation> {
    let NetworkSpec { n, m, k, .. } = *spec;
    let mut out = Vec::new();
    let r = match to_rows(&spec.r, n, k, "R") {
        Ok(r) => Some(r),
        Err(v) => {
            out.push(v);
            None
        }
    };
    let a = match to_rows(&spec.a, m, k, "A") {
        Ok(a) => Some(a),
        Err(v) => {
            out.push(v);
            None
        }
    };
    if spec.c.len() != m {
        out.push(Violation::DimensionMismatch {
            detail: format!("c has length {}, expected {m}", spec.c.len()),
        });
    }
    if spec.p.len() != n {
        out.push(Violation::DimensionMismatch {
            detail: format!("p has length {}, expected {n}", spec.p.len()),
        });
    }
    for (field, v) in [("c", &spec.c), ("p", &spec.p)] {
        for (i, &x) in v.iter().enumerate() {
            if !x.is_finite() {
                out.push(Violation::NonFinite { field: field.into() });
            } else if x < 0.0 {
                out.push(Violation::Negative {
                    field: field.into(),
                    index: i,
                });
            }
        }
    }
    if let Some(r) = &r {
        let mut class_has = vec![false; n];
        for j in 0..k {
            let mut nz = 0;
            for (i, row) in r.iter().enumerate() {
                let v = row[j];
                if !v.is_finite() {
                    out.push(Violation::NonFinite { field: "R".into() });
                } else if v != 0.0 && v != 1.0 {
                    out.push(Violation::RoutingNotBinary { class: i, activity: j });
                }
                if v != 0.0 {
                    nz += 1;
                    class_has[i] = true;
                }
            }
            if nz != 1 {
                out.push(Violation::RoutingColumn {
                    activity: j,
                    nonzeros: nz,
                });
            }
        }
        for (i, has) in class_has.iter().enumerate() {
            if !has {
                out.push(Violation::ClassUnreachable { class: i });
            }
        }
    }
    if let Some(a) = &a {
        let mut pool_has = vec![false; m];
        for j in 0..k {
            let mut pos = 0;
            for (h, row) in a.iter().enumerate() {
                let v = row[j];
                if !v.is_finite() {
                    out.push(Violation::NonFinite { field: "A".into() });
                } else if v < 0.0 {
                    out.push(Violation::Negative {
                        field: "A".into(),
                        index: h * k + j,
                    });
                } else if v > 0.0 {
                    pos += 1;
                    pool_has[h] = true;
                }
            }
            if pos != 1 {
                out.push(Violation::CapacityColumn {
                    activity: j,
                    positives: pos,
                });
            }
        }
        for (h, has) in pool_has.iter().enumerate() {
            if !has {
                out.push(Violation::PoolUnused { pool: h });
            }
        }
    }
    out
}

impl ServiceNetwork {
    pub fn from_spec(spec: &NetworkSpec) -> Result<Self> {
        let violations = validate(spec);
        if !violations.is_empty() {
            return Err(Error::InvalidNetwork(violations));
        }
        let r = to_rows(&spec.r, spec.n, spec.k, "R").expect("validated");
        let a = to_rows(&spec.a, spec.m, spec.k, "A").expect("validated");
        let class_of = (0..spec.k).map(|j| (0..spec.n).find(|&i| r[i][j] != 0.0).expect("validated")).collect();
        let pool_of = (0..spec.k).map(|j| (0..spec.m).find(|&h| a[h][j] > 0.0).expect("validated")).collect();
        Ok(ServiceNetwork {
            n: spec.n,
            m: spec.m,
            k: spec.k,
            r,
            a,
            c: spec.c.clone(),
            p: spec.p.clone(),
            class_of,
            pool_of,
        })
    }

    /// Builds a network from nested `R` (n×k) and `A` (m×k).
    pub fn new(r: Vec<Vec<f64>>, a: Vec<Vec<f64>>, c: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        let spec = NetworkSpec {
            n: r.len(),
            m: a.len(),
            k: r.first().map_or(0, |row| row.len()),
            r: MatrixInput::Nested(r),
            a: MatrixInput::Nested(a),
            c,
            p,
        };
        Self::from_spec(&spec)
    }

    /// Builds a network from an activity list `(class, pool, capacity use)`.
    pub fn from_activities(n: usize, m: usize, acts: &[(usize, usize, f64)], c: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        let k = acts.len();
        let mut r = vec![vec![0.0; k]; n];
        let mut a = vec![vec![0.0; k]; m];
        for (j, &(i, h, w)) in acts.iter().enumerate() {
            if i >= n || h >= m {
                return Err(Error::InvalidNetwork(vec![Violation::DimensionMismatch {
                    detail: format!("activity {j} references class {i} / pool {h}"),
                }]));
            }
            r[i][j] = 1.0;
            a[h][j] = w;
        }
        Self::new(r, a, c, p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: NetworkSpec = serde_json::from_str(&text)?;
        Self::from_spec(&spec)
    }

    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec {
            n: self.n,
            m: self.m,
            k: self.k,
            r: MatrixInput::Nested(self.r.clone()),
            a: MatrixInput::Nested(self.a.clone()),
            c: self.c.clone(),
            p: self.p.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn routing(&self) -> &[Vec<f64>] {
        &self.r
    }
    pub fn capacity(&self) -> &[Vec<f64>] {
        &self.a
    }
    /// Per-period staffing cost.
    pub fn c(&self) -> &[f64] {
        &self.c
    }
    pub fn p(&self) -> &[f64] {
        &self.p
    }
    pub fn class_of(&self, j: usize) -> usize {
        self.class_of[j]
    }
    pub fn pool_of(&self, j: usize) -> usize {
        self.pool_of[j]
    }

    /// Capacity consumed per unit of activity `j` in its own pool.
    pub fn usage(&self, j: usize) -> f64 {
        self.a[self.pool_of[j]][j]
    }

    /// Horizon cost `c~ = c T`.
    pub fn c_tilde(&self, t: usize) -> Vec<f64> {
        self.c.iter().map(|&v| v * t as f64).collect()
    }

    /// `(A^T y)_j` for a pool-indexed vector `y`.
    pub fn at_times(&self, y: &[f64]) -> Vec<f64> {
        (0..self.k).map(|j| self.usage(j) * y[self.pool_of[j]]).collect()
    }

    /// `(R x)_i` for an activity-indexed vector `x`.
    pub fn r_times(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (j, &v) in x.iter().enumerate() {
            out[self.class_of[j]] += v;
        }
        out
    }

    /// `(A x)_h` for an activity-indexed vector `x`.
    pub fn a_times(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (j, &v) in x.iter().enumerate() {
            out[self.pool_of[j]] += self.usage(j) * v;
        }
        out
    }

    pub fn activities_of_class(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.k).filter(move |&j| self.class_of[j] == i)
    }

    pub fn activities_of_pool(&self, h: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.k).filter(move |&j| self.pool_of[j] == h)
    }

    /// Same topology with new per-period costs.
    pub fn with_costs(&self, c: Vec<f64>) -> Result<Self> {
        let mut spec = self.to_spec();
        spec.c = c;
        Self::from_spec(&spec)
    }

    /// Sub-network on the component's pools, classes and activities, in index order.
    pub fn restrict(&self, comp: &NetworkComponent) -> Result<Self> {
        let acts: Vec<(usize, usize, f64)> = comp
            .activities
            .iter()
            .map(|&j| {
                let i = comp.classes.binary_search(&self.class_of[j]).expect("class in component");
                let h = comp.pools.binary_search(&self.pool_of[j]).expect("pool in component");
                (i, h, self.usage(j))
            })
            .collect();
        let c = comp.pools.iter().map(|&h| self.c[h]).collect();
        let p = comp.classes.iter().map(|&i| self.p[i]).collect();
        Self::from_activities(comp.classes.len(), comp.pools.len(), &acts, c, p)
    }
}

/// A connected piece of the class–pool bipartite graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkComponent {
    pub pools: Vec<usize>,
    pub classes: Vec<usize>,
    pub activities: Vec<usize>,
}

/// Connected components ordered by their smallest pool index.
pub fn decompose(net: &ServiceNetwork) -> Vec<NetworkComponent> {
    // nodes: pools 0..m, classes m..m+n
    let total = net.m + net.n;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); total];
    for j in 0..net.k {
        let h = net.pool_of[j];
        let i = net.m + net.class_of[j];
        adj[h].push(i);
        adj[i].push(h);
    }
    let mut label = vec![usize::MAX; total];
    let mut comps = Vec::new();
    for start in 0..total {
        if label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut queue = VecDeque::from([start]);
        label[start] = id;
        let mut pools = Vec::new();
        let mut classes = Vec::new();
        while let Some(v) = queue.pop_front() {
            if v < net.m {
                pools.push(v);
            } else {
                classes.push(v - net.m);
            }
            for &w in &adj[v] {
                if label[w] == usize::MAX {
                    label[w] = id;
                    queue.push_back(w);
                }
            }
        }
        pools.sort_unstable();
        classes.sort_unstable();
        let activities = (0..net.k).filter(|&j| label[net.pool_of[j]] == id).collect();
        comps.push(NetworkComponent {
            pools,
            classes,
            activities,
        });
    }
    comps.sort_by_key(|c| c.pools.first().copied().unwrap_or(usize::MAX));
    comps
}

/// Ready-made networks used in examples and tests.
pub mod catalog {
    use super::ServiceNetwork;

    /// Two classes, two dedicated pools and one flexible pool between them.
    ///
    /// Activities: (class 0, pool 0), (class 0, pool 1), (class 1, pool 1), (class 1, pool 2).
    pub fn two_class_bridge() -> ServiceNetwork {
        ServiceNetwork::from_activities(
            2,
            3,
            &[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0), (1, 2, 1.0)],
            vec![4.0, 6.0, 5.0],
            vec![30.0, 32.0],
        )
        .expect("valid network")
    }

    /// Daily staffing costs of the emergency-department network.
    pub const ED_DAILY_COST: [f64; 7] = [50.0, 60.0, 40.0, 70.0, 60.0, 80.0, 70.0];
    /// Hourly abandonment penalties of the emergency-department network.
    pub const ED_PENALTY: [f64; 6] = [140.0, 135.0, 130.0, 120.0, 150.0, 175.0];

    /// Six classes and seven pools with hourly periods (per-period cost = daily cost / 24).
    ///
    /// Pools 1 and 2 both serve class 1; pool 3 serves classes 2 and 3;
    /// pools 4, 5, 6 form a chain serving classes 4 and 5.
    pub fn emergency_department() -> ServiceNetwork {
        let acts = [
            (0, 0, 1.0),
            (1, 1, 1.0),
            (1, 2, 1.0),
            (2, 3, 1.0),
            (3, 3, 1.0),
            (4, 4, 1.0),
            (4, 5, 1.0),
            (5, 5, 1.0),
            (5, 6, 1.0),
        ];
        let c = ED_DAILY_COST.iter().map(|v| v / 24.0).collect();
        ServiceNetwork::from_activities(6, 7, &acts, c, ED_PENALTY.to_vec()).expect("valid network")
    }

    /// One class served by one pool.
    pub fn single(c: f64, p: f64, usage: f64) -> ServiceNetwork {
        ServiceNetwork::from_activities(1, 1, &[(0, 0, usage)], vec![c], vec![p]).expect("valid network")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bridge_network_is_valid() {
        let net = catalog::two_class_bridge();
        assert!(validate(&net.to_spec()).is_empty());
        assert_eq!((net.n(), net.m(), net.k()), (2, 3, 4));
        assert_eq!(net.class_of(2), 1);
        assert_eq!(net.pool_of(2), 1);
    }

    #[test]
    fn empty_rows_are_reported() {
        let mut spec = catalog::two_class_bridge().to_spec();
        spec.r = MatrixInput::Nested(vec![vec![1.0, 1.0, 1.0, 1.0], vec![0.0; 4]]);
        let v = validate(&spec);
        assert!(v.contains(&Violation::ClassUnreachable { class: 1 }));
        assert!(v.iter().any(|x| x.to_string().contains("class unreachable")));

        let mut spec = catalog::two_class_bridge().to_spec();
        spec.a = MatrixInput::Nested(vec![vec![1.0, 1.0, 0.0, 0.0], vec![0.0; 4], vec![0.0, 0.0, 1.0, 1.0]]);
        let v = validate(&spec);
        assert!(v.iter().any(|x| x.to_string().contains("pool unused")));
    }

    #[test]
    fn dimension_mismatch_is_its_own_kind() {
        let mut spec = catalog::two_class_bridge().to_spec();
        spec.c = vec![1.0];
        let v = validate(&spec);
        assert!(matches!(v[0], Violation::DimensionMismatch { .. }));
        spec.r = MatrixInput::Flat(vec![1.0; 3]);
        assert!(validate(&spec).iter().filter(|x| matches!(x, Violation::DimensionMismatch { .. })).count() >= 2);
    }

    #[test]
    fn flat_json_round_trip() {
        let json = r#"{"n":2,"m":3,"k":4,"R":[1,1,0,0, 0,0,1,1],"A":[1,0,0,0, 0,1,1,0, 0,0,0,1],"c":[4,6,5],"p":[30,32]}"#;
        let spec: NetworkSpec = serde_json::from_str(json).unwrap();
        let net = ServiceNetwork::from_spec(&spec).unwrap();
        assert_eq!(net, catalog::two_class_bridge());
    }

    #[test]
    fn non_binary_routing_rejected() {
        let mut spec = catalog::two_class_bridge().to_spec();
        spec.r = MatrixInput::Nested(vec![vec![0.5, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 1.0]]);
        assert!(validate(&spec).contains(&Violation::RoutingNotBinary { class: 0, activity: 0 }));
    }

    #[test]
    fn emergency_department_components() {
        let comps = decompose(&catalog::emergency_department());
        let pools: Vec<Vec<usize>> = comps.iter().map(|c| c.pools.clone()).collect();
        assert_eq!(pools, vec![vec![0], vec![1, 2], vec![3], vec![4, 5, 6]]);
        assert_eq!(comps[2].classes, vec![2, 3]);
        assert_eq!(comps[3].classes, vec![4, 5]);
        assert_eq!(comps[3].activities, vec![5, 6, 7, 8]);
    }

    #[test]
    fn diagonal_and_star_networks() {
        let acts: Vec<_> = (0..4).map(|i| (i, i, 1.0)).collect();
        let net = ServiceNetwork::from_activities(4, 4, &acts, vec![1.0; 4], vec![2.0; 4]).unwrap();
        assert_eq!(decompose(&net).len(), 4);
        let acts: Vec<_> = (0..4).map(|i| (i, 0, 1.0)).collect();
        let net = ServiceNetwork::from_activities(4, 1, &acts, vec![1.0], vec![2.0; 4]).unwrap();
        assert_eq!(decompose(&net).len(), 1);
    }

    #[test]
    fn restrict_reindexes() {
        let net = catalog::emergency_department();
        let comp = decompose(&net).pop().unwrap();
        let sub = net.restrict(&comp).unwrap();
        assert_eq!((sub.n(), sub.m(), sub.k()), (2, 3, 4));
        assert_eq!(sub.p(), &[150.0, 175.0]);
        assert!((sub.c()[1] - 80.0 / 24.0).abs() < 1e-12);
    }

    fn random_network() -> impl Strategy<Value = ServiceNetwork> {
        (1usize..6, 1usize..6).prop_flat_map(|(n, m)| {
            let extra = prop::collection::vec((0..n, 0..m, 0.5f64..2.0), 0..8);
            extra.prop_map(move |extra| {
                // cover every class and pool, then add random edges
                let mut acts = Vec::new();
                for i in 0..n.max(m) {
                    acts.push((i % n, i % m, 1.0));
                }
                acts.extend(extra);
                ServiceNetwork::from_activities(n, m, &acts, vec![1.0; m], vec![2.0; n]).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn decompose_partitions_and_connects(net in random_network()) {
            let comps = decompose(&net);
            let mut pools: Vec<usize> = comps.iter().flat_map(|c| c.pools.clone()).collect();
            let mut classes: Vec<usize> = comps.iter().flat_map(|c| c.classes.clone()).collect();
            let mut acts: Vec<usize> = comps.iter().flat_map(|c| c.activities.clone()).collect();
            pools.sort();
            classes.sort();
            acts.sort();
            prop_assert_eq!(pools, (0..net.m()).collect::<Vec<_>>());
            prop_assert_eq!(classes, (0..net.n()).collect::<Vec<_>>());
            prop_assert_eq!(acts, (0..net.k()).collect::<Vec<_>>());
            for c in &comps {
                for &j in &c.activities {
                    prop_assert!(c.pools.contains(&net.pool_of(j)) && c.classes.contains(&net.class_of(j)));
                }
                // BFS over the component's own activities reaches every pool
                let mut seen = vec![c.pools[0]];
                let mut changed = true;
                while changed {
                    changed = false;
                    for &j in &c.activities {
                        let i = net.class_of(j);
                        let linked = c.activities.iter().any(|&k| net.class_of(k) == i && seen.contains(&net.pool_of(k)));
                        if linked && !seen.contains(&net.pool_of(j)) {
                            seen.push(net.pool_of(j));
                            changed = true;
                        }
                    }
                }
                prop_assert_eq!(seen.len(), c.pools.len());
            }
            let firsts: Vec<usize> = comps.iter().map(|c| c.pools[0]).collect();
            let mut sorted = firsts.clone();
            sorted.sort();
            prop_assert_eq!(firsts, sorted);
        }
    }
}
