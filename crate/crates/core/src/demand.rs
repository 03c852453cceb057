//! Finite-support demand: weighted scenario paths, scenario expansion,
//! pooled empirical CDFs, CSV ingestion and synthetic weekly generation.

use std::collections::HashMap;
use std::path::Path;

use rand::distr::{Distribution, weighted::WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on the common weight denominator accepted by [`expand`].
pub const DEFAULT_DENOMINATOR_LIMIT: u64 = 1_000_000;

/// `Z` weighted demand paths, each `T` periods by `n` classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandScenarioSet {
    t: usize,
    n: usize,
    weights: Vec<f64>,
    paths: Vec<Vec<Vec<f64>>>,
}

impl DemandScenarioSet {
    pub fn new(weights: Vec<f64>, paths: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Demand("at least one scenario is required".into()));
        }
        if weights.len() != paths.len() {
            return Err(Error::Demand(format!("{} weights for {} scenarios", weights.len(), paths.len())));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Demand("weights must be strictly positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Demand(format!("weights sum to {total}, not 1")));
        }
        let t = paths[0].len();
        if t == 0 {
            return Err(Error::Demand("paths must have at least one period".into()));
        }
        let n = paths[0][0].len();
        for (z, path) in paths.iter().enumerate() {
            if path.len() != t {
                return Err(Error::Demand(format!("scenario {z} has {} periods, expected {t}", path.len())));
            }
            for (s, row) in path.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::Demand(format!("scenario {z} period {s} has {} classes, expected {n}", row.len())));
                }
                if row.iter().any(|&v| !v.is_finite() || v < 0.0) {
                    return Err(Error::Demand(format!("scenario {z} period {s} has a negative or non-finite value")));
                }
            }
        }
        Ok(DemandScenarioSet { t, n, weights, paths })
    }

    /// Equal-weight scenario set.
    pub fn equal_weights(paths: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let z = paths.len().max(1);
        let mut w = vec![1.0 / z as f64; paths.len()];
        // absorb rounding so the sum is 1 to machine precision
        if let Some(last) = w.last_mut() {
            let rest: f64 = (0..paths.len() - 1).map(|_| 1.0 / z as f64).sum();
            *last = 1.0 - rest;
        }
        Self::new(w, paths)
    }

    /// One deterministic path.
    pub fn single(path: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(vec![1.0], vec![path])
    }

    pub fn periods(&self) -> usize {
        self.t
    }
    pub fn classes(&self) -> usize {
        self.n
    }
    pub fn scenarios(&self) -> usize {
        self.paths.len()
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn paths(&self) -> &[Vec<Vec<f64>>] {
        &self.paths
    }
    pub fn path(&self, z: usize) -> &[Vec<f64>] {
        &self.paths[z]
    }

    /// Keeps periods `start..start+len` of every path.
    pub fn restrict_periods(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.t || len == 0 {
            return Err(Error::Dimension(format!("period window {start}+{len} outside 0..{}", self.t)));
        }
        let paths = self.paths.iter().map(|p| p[start..start + len].to_vec()).collect();
        Self::new(self.weights.clone(), paths)
    }

    /// Keeps the listed classes in the given order.
    pub fn restrict_classes(&self, classes: &[usize]) -> Result<Self> {
        if classes.iter().any(|&i| i >= self.n) {
            return Err(Error::Dimension("class index out of range".into()));
        }
        let paths = self
            .paths
            .iter()
            .map(|p| p.iter().map(|row| classes.iter().map(|&i| row[i]).collect()).collect())
            .collect();
        Self::new(self.weights.clone(), paths)
    }

    /// Weighted mean path.
    pub fn mean_path(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.t];
        for (w, path) in self.weights.iter().zip(&self.paths) {
            for (o, row) in out.iter_mut().zip(path) {
                for (a, b) in o.iter_mut().zip(row) {
                    *a += w * b;
                }
            }
        }
        out
    }

    /// Draws `count` scenarios with probabilities `weights` and returns them with equal weights.
    pub fn resample_equal_weights(&self, count: usize, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::Demand("resample size must be positive".into()));
        }
        let dist = WeightedIndex::new(&self.weights).map_err(|e| Error::Demand(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let paths = (0..count).map(|_| self.paths[dist.sample(&mut rng)].clone()).collect();
        log::info!("resampled {} weighted scenarios into {count} equal-weight scenarios", self.paths.len());
        Self::equal_weights(paths)
    }

    /// Writes the set in the `scenario,period,class,count` schema (equal weights assumed by readers).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Demand(e.to_string()))?;
        w.write_record(["scenario", "period", "class", "count"]).map_err(|e| Error::Demand(e.to_string()))?;
        for (z, p) in self.paths.iter().enumerate() {
            for (t, row) in p.iter().enumerate() {
                for (i, v) in row.iter().enumerate() {
                    w.write_record([format!("s{z}"), t.to_string(), i.to_string(), v.to_string()])
                        .map_err(|e| Error::Demand(e.to_string()))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Equal-weight duplication of period-slices.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpandedDemandSequence {
    /// Number of slices, `T * z_tilde`.
    pub taus: usize,
    pub demands: Vec<Vec<f64>>,
    /// Divisor `z_tilde * T` of the equal-weight objective.
    pub scale: f64,
    pub z_tilde: u64,
    /// Duplication count `N_z` per scenario.
    pub counts: Vec<u64>,
}

/// Best rational approximation of `x` with denominator at most `max_den`.
pub fn rationalize(x: f64, max_den: u64) -> (u64, u64) {
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut r = x;
    loop {
        let a = r.floor();
        if a > 1e15 {
            break;
        }
        let a = a as u64;
        let q2 = a.saturating_mul(q1).saturating_add(q0);
        if q2 > max_den {
            // semiconvergent check
            let k = (max_den - q0) / q1.max(1);
            let (pk, qk) = (k * p1 + p0, k * q1 + q0);
            if qk > 0 && (x - pk as f64 / qk as f64).abs() < (x - p1 as f64 / q1.max(1) as f64).abs() {
                return (pk, qk);
            }
            break;
        }
        let p2 = a * p1 + p0;
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = r - a as f64;
        if frac.abs() < 1e-15 || (x - p1 as f64 / q1 as f64).abs() < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    (p1, q1.max(1))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Scenario expansion: replicate scenario `z` `N_z = p_z * z_tilde` times and
/// append all period-slices into one equal-weight sequence.
pub fn expand(ds: &DemandScenarioSet, max_den: u64) -> Result<ExpandedDemandSequence> {
    let mut lcm: u64 = 1;
    let mut fracs = Vec::with_capacity(ds.scenarios());
    for &w in ds.weights() {
        let (num, den) = rationalize(w, max_den);
        // only exact small-denominator rationals qualify; anything else needs resampling
        if (w - num as f64 / den as f64).abs() > 4.0 * f64::EPSILON {
            return Err(Error::WeightDenominator { limit: max_den });
        }
        fracs.push((num, den));
        lcm = lcm / gcd(lcm, den) * den;
        if lcm > max_den {
            return Err(Error::WeightDenominator { limit: max_den });
        }
    }
    let counts: Vec<u64> = fracs.iter().map(|&(num, den)| num * (lcm / den)).collect();
    if counts.iter().sum::<u64>() != lcm {
        return Err(Error::WeightDenominator { limit: max_den });
    }
    let taus = lcm as usize * ds.periods();
    if taus > 50_000_000 {
        return Err(Error::Demand(format!("expansion would hold {taus} slices; resample to equal weights")));
    }
    let mut demands = Vec::with_capacity(taus);
    for (path, &count) in ds.paths().iter().zip(&counts) {
        for _ in 0..count {
            demands.extend(path.iter().cloned());
        }
    }
    Ok(ExpandedDemandSequence {
        taus,
        demands,
        scale: taus as f64,
        z_tilde: lcm,
        counts,
    })
}

/// Pooled empirical distribution of one class over all periods and scenarios.
///
/// Each sample carries weight `p_z / T`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMixtureCdf {
    samples: Vec<f64>,
    cum: Vec<f64>,
    equal: bool,
}

impl EmpiricalMixtureCdf {
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        samples.sort_by(|a, b| a.total_cmp(b));
        let m = samples.len() as f64;
        let cum = (1..=samples.len()).map(|k| k as f64 / m).collect();
        Ok(EmpiricalMixtureCdf { samples, cum, equal: true })
    }

    pub fn from_weighted(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptySamples);
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let mut acc = 0.0;
        let mut cum = Vec::with_capacity(pairs.len());
        for p in &pairs {
            acc += p.1 / total;
            cum.push(acc);
        }
        let w0 = pairs[0].1;
        let equal = pairs.iter().all(|p| (p.1 - w0).abs() <= 1e-12 * w0.abs());
        let samples = pairs.into_iter().map(|p| p.0).collect();
        Ok(EmpiricalMixtureCdf { samples, cum, equal })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// `F(x) = P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.samples.partition_point(|&s| s <= x);
        if k == 0 {
            0.0
        } else {
            self.cum[k - 1]
        }
    }

    /// Lower quantile `inf { x : F(x) >= q }`; `quantile(0)` is the minimum.
    pub fn quantile(&self, q: f64) -> f64 {
        let m = self.samples.len();
        if q <= 0.0 {
            return self.samples[0];
        }
        if q >= 1.0 {
            return self.samples[m - 1];
        }
        let idx = if self.equal {
            let k = (q * m as f64 - 1e-9).ceil().max(1.0) as usize;
            k.min(m) - 1
        } else {
            self.cum.partition_point(|&c| c < q - 1e-12).min(m - 1)
        };
        self.samples[idx]
    }
}

/// Pooled empirical mixture CDF of class `i`.
pub fn empirical_mixture_cdf(ds: &DemandScenarioSet, class: usize) -> Result<EmpiricalMixtureCdf> {
    if class >= ds.classes() {
        return Err(Error::Dimension(format!("class {class} outside 0..{}", ds.classes())));
    }
    let t = ds.periods() as f64;
    let pairs: Vec<(f64, f64)> = ds
        .paths()
        .iter()
        .zip(ds.weights())
        .flat_map(|(path, &w)| path.iter().map(move |row| (row[class], w / t)))
        .collect();
    EmpiricalMixtureCdf::from_weighted(pairs)
}

fn csv_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Csv { line, msg: msg.into() }
}

/// Reads the `scenario,period,class,count` schema into an equal-weight set.
pub fn load_csv(path: &Path) -> Result<DemandScenarioSet> {
    let file = std::fs::File::open(path)?;
    read_csv(file)
}

pub fn read_csv<R: std::io::Read>(reader: R) -> Result<DemandScenarioSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_err(1, e.to_string()))?.clone();
    let expected = ["scenario", "period", "class", "count"];
    if headers.len() != 4 || headers.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(csv_err(1, "header must be scenario,period,class,count"));
    }
    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize, usize), f64> = HashMap::new();
    let mut dims: Vec<(usize, usize)> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_err(line, format!("malformed row: {e}"))
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(csv_err(line, format!("malformed row: expected 4 fields, found {}", record.len())));
        }
        let scen = record[0].to_string();
        let period: usize = record[1].parse().map_err(|_| csv_err(line, format!("malformed row: bad period '{}'", &record[1])))?;
        let class: usize = record[2].parse().map_err(|_| csv_err(line, format!("malformed row: bad class '{}'", &record[2])))?;
        let count: f64 = record[3].parse().map_err(|_| csv_err(line, format!("malformed row: bad count '{}'", &record[3])))?;
        if !count.is_finite() {
            return Err(csv_err(line, "malformed row: non-finite count"));
        }
        if count < 0.0 {
            return Err(csv_err(line, format!("negative demand at line {line}")));
        }
        let z = *index.entry(scen.clone()).or_insert_with(|| {
            order.push(scen);
            dims.push((0, 0));
            order.len() - 1
        });
        if cells.insert((z, period, class), count).is_some() {
            return Err(csv_err(line, format!("duplicate cell (scenario {}, period {period}, class {class})", order[z])));
        }
        dims[z].0 = dims[z].0.max(period + 1);
        dims[z].1 = dims[z].1.max(class + 1);
    }
    if order.is_empty() {
        return Err(Error::Demand("no demand rows".into()));
    }
    let (t, n) = dims[0];
    for (z, &(tz, nz)) in dims.iter().enumerate() {
        if tz != t {
            return Err(Error::Demand(format!("inconsistent T: scenario {} has {tz} periods, expected {t}", order[z])));
        }
        if nz != n {
            return Err(Error::Demand(format!("inconsistent n: scenario {} has {nz} classes, expected {n}", order[z])));
        }
    }
    let mut paths = Vec::with_capacity(order.len());
    for (z, name) in order.iter().enumerate() {
        let mut path = vec![vec![0.0; n]; t];
        for (s, row) in path.iter_mut().enumerate() {
            for (i, v) in row.iter_mut().enumerate() {
                *v = *cells
                    .get(&(z, s, i))
                    .ok_or_else(|| Error::Demand(format!("missing cell (scenario {name}, period {s}, class {i})")))?;
            }
        }
        paths.push(path);
    }
    DemandScenarioSet::equal_weights(paths)
}

/// Hourly base rates indexed `[day][class][hour]`, seven days by 24 hours.
pub type WeeklyRates = Vec<Vec<Vec<f64>>>;

/// Repeats one `[class][hour]` day profile over the seven days of a week.
pub fn replicate_day(day: &[Vec<f64>]) -> WeeklyRates {
    vec![day.to_vec(); 7]
}

fn poisson(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    if rate <= 0.0 {
        return 0.0;
    }
    Poisson::new(rate).expect("positive finite rate").sample(rng)
}

/// `weeks` independent weeks of Poisson demand with rate `base[d][i][t] * trend^d`.
///
/// Each week is one scenario with `T = 168` periods ordered `24 d + t`.
pub fn generate_synthetic_weeks(base: &WeeklyRates, trend: f64, weeks: usize, seed: u64) -> Result<DemandScenarioSet> {
    if base.len() != 7 || base.iter().any(|d| d.iter().any(|c| c.len() != 24)) {
        return Err(Error::Dimension("base rates must be 7 days x n classes x 24 hours".into()));
    }
    if !(trend > 0.0) {
        return Err(Error::Demand("trend factor must be positive".into()));
    }
    if base.iter().flatten().flatten().any(|&r| !(r >= 0.0) || !r.is_finite()) {
        return Err(Error::Demand("base rates must be finite and nonnegative".into()));
    }
    if weeks == 0 {
        return Err(Error::Demand("at least one week is required".into()));
    }
    let n = base[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut paths = Vec::with_capacity(weeks);
    for _ in 0..weeks {
        let mut path = Vec::with_capacity(168);
        for (d, day) in base.iter().enumerate() {
            let f = trend.powi(d as i32);
            for t in 0..24 {
                path.push((0..n).map(|i| poisson(&mut rng, day[i][t] * f)).collect());
            }
        }
        paths.push(path);
    }
    DemandScenarioSet::equal_weights(paths)
}

/// `count` independent paths of Poisson demand with rate `scale * day[i][t]`.
///
/// `day` is indexed `[class][period]`; every class needs the same number of periods.
pub fn generate_days(day: &[Vec<f64>], scale: f64, count: usize, seed: u64) -> Result<DemandScenarioSet> {
    let t = day.first().map_or(0, |c| c.len());
    if count == 0 || t == 0 || day.iter().any(|c| c.len() != t) {
        return Err(Error::Demand("day profile must be n x T with T > 0 and count positive".into()));
    }
    if day.iter().flatten().any(|&r| !(r >= 0.0) || !r.is_finite()) || !(scale >= 0.0) {
        return Err(Error::Demand("rates must be finite and nonnegative".into()));
    }
    let n = day.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paths = (0..count)
        .map(|_| (0..t).map(|s| (0..n).map(|i| poisson(&mut rng, day[i][s] * scale)).collect()).collect())
        .collect();
    DemandScenarioSet::equal_weights(paths)
}

/// Default Monday profile (`[class][hour]`) for the emergency-department network.
///
/// Classes 0-3 follow a diurnal cycle with a night trough; classes 4-5 peak around noon.
pub fn ed_monday_profile() -> Vec<Vec<f64>> {
    let diurnal = |base: f64, amp: f64| -> Vec<f64> {
        (0..24)
            .map(|t| {
                let phase = 2.0 * std::f64::consts::PI * (t as f64 - 4.0) / 24.0;
                base + amp * (1.0 - phase.cos()) / 2.0
            })
            .collect()
    };
    let noon = |base: f64, amp: f64, centre: f64, width: f64| -> Vec<f64> {
        (0..24)
            .map(|t| base + amp * (-(t as f64 - centre).powi(2) / (2.0 * width * width)).exp())
            .collect()
    };
    vec![
        diurnal(3.0, 6.0),
        diurnal(2.5, 5.0),
        diurnal(2.0, 4.0),
        diurnal(1.5, 4.0),
        noon(1.0, 7.0, 12.0, 3.0),
        noon(1.0, 6.0, 13.0, 2.5),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn expand_single_scenario() {
        let ds = DemandScenarioSet::single(vec![vec![1.0], vec![2.0]]).unwrap();
        let e = expand(&ds, DEFAULT_DENOMINATOR_LIMIT).unwrap();
        assert_eq!(e.z_tilde, 1);
        assert_eq!(e.demands, vec![vec![1.0], vec![2.0]]);
        assert_eq!(e.scale, 2.0);
    }

    #[test]
    fn expand_two_halves() {
        let ds = DemandScenarioSet::equal_weights(vec![vec![vec![3.0, 0.0]], vec![vec![0.0, 3.0]]]).unwrap();
        let e = expand(&ds, DEFAULT_DENOMINATOR_LIMIT).unwrap();
        assert_eq!(e.taus, 2);
        assert_eq!(e.demands, vec![vec![3.0, 0.0], vec![0.0, 3.0]]);
    }

    #[test]
    fn expand_thirds_duplicates_second_path() {
        let ds = DemandScenarioSet::new(vec![1.0 / 3.0, 2.0 / 3.0], vec![vec![vec![1.0]], vec![vec![5.0]]]).unwrap();
        let e = expand(&ds, DEFAULT_DENOMINATOR_LIMIT).unwrap();
        assert_eq!(e.z_tilde, 3);
        assert_eq!(e.counts, vec![1, 2]);
        assert_eq!(e.demands, vec![vec![1.0], vec![5.0], vec![5.0]]);
    }

    #[test]
    fn irrational_weights_are_rejected() {
        let w = 1.0 / std::f64::consts::PI;
        let ds = DemandScenarioSet::new(vec![w, 1.0 - w], vec![vec![vec![1.0]], vec![vec![2.0]]]).unwrap();
        let err = expand(&ds, DEFAULT_DENOMINATOR_LIMIT).unwrap_err();
        assert!(err.to_string().contains("resample"));
        let eq = ds.resample_equal_weights(20, 3).unwrap();
        assert_eq!(eq.scenarios(), 20);
        assert!(expand(&eq, DEFAULT_DENOMINATOR_LIMIT).is_ok());
    }

    #[test]
    fn rationalize_recovers_small_fractions() {
        assert_eq!(rationalize(0.5, 1000), (1, 2));
        assert_eq!(rationalize(1.0 / 3.0, 1000), (1, 3));
        assert_eq!(rationalize(0.125, 1000), (1, 8));
        assert_eq!(rationalize(1.0, 10), (1, 1));
        assert_eq!(rationalize(0.0, 10), (0, 1));
    }

    #[test]
    fn quantile_order_statistics() {
        let f = EmpiricalMixtureCdf::from_samples(vec![4.0, 2.0, 1.0, 3.0]).unwrap();
        assert_eq!(f.quantile(0.5), 2.0);
        assert_eq!(f.quantile(0.0), 1.0);
        assert_eq!(f.quantile(1.0), 4.0);
        assert_eq!(f.quantile(0.75), 3.0);
        assert_eq!(f.quantile(0.76), 4.0);
        let g = EmpiricalMixtureCdf::from_samples(vec![7.0; 5]).unwrap();
        assert_eq!(g.quantile(0.3), 7.0);
        assert!(EmpiricalMixtureCdf::from_samples(vec![]).is_err());
    }

    #[test]
    fn uniform_quantile_by_sorting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<f64> = (0..5000).map(|_| rng.random_range(0.0..100.0)).collect();
        let mut sorted = v.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let f = EmpiricalMixtureCdf::from_samples(v).unwrap();
        assert_eq!(f.quantile(0.75), sorted[3749]);
        assert!((f.quantile(0.75) - 75.0).abs() < 3.0);
    }

    #[test]
    fn mixture_pools_periods_and_weights() {
        let ds = DemandScenarioSet::new(vec![0.25, 0.75], vec![vec![vec![1.0], vec![2.0]], vec![vec![3.0], vec![4.0]]]).unwrap();
        let f = empirical_mixture_cdf(&ds, 0).unwrap();
        assert!((f.cdf(2.0) - 0.25).abs() < 1e-12);
        assert_eq!(f.quantile(0.25), 2.0);
        assert_eq!(f.quantile(0.26), 3.0);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let paths: Vec<Vec<Vec<f64>>> = (0..2).map(|z| (0..24).map(|t| (0..6).map(|i| (z + t + i) as f64).collect()).collect()).collect();
        let ds = DemandScenarioSet::equal_weights(paths).unwrap();
        ds.write_csv(&path).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!((back.scenarios(), back.periods(), back.classes()), (2, 24, 6));
        assert_eq!(back.paths(), ds.paths());

        let neg = "scenario,period,class,count\na,0,0,1\na,1,0,-2\n";
        let e = read_csv(neg.as_bytes()).unwrap_err().to_string();
        assert!(e.contains("negative demand at line 3"), "{e}");
        let dup = "scenario,period,class,count\na,0,0,1\na,0,0,2\n";
        assert!(read_csv(dup.as_bytes()).unwrap_err().to_string().contains("duplicate cell"));
        let bad = "scenario,period,class,count\na,0,0,x\n";
        let e = read_csv(bad.as_bytes()).unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("malformed"), "{e}");
        let missing = "scenario,period,class,count\na,0,0,1\na,1,1,1\n";
        assert!(read_csv(missing.as_bytes()).unwrap_err().to_string().contains("missing cell"));
        let uneven = "scenario,period,class,count\na,0,0,1\nb,0,0,1\nb,1,0,1\n";
        assert!(read_csv(uneven.as_bytes()).unwrap_err().to_string().contains("inconsistent T"));
    }

    #[test]
    fn synthetic_weeks_trend_mean() {
        let mut day = vec![vec![0.0; 24]];
        day[0][0] = 10.0;
        let base = replicate_day(&day);
        let ds = generate_synthetic_weeks(&base, 1.1, 10_000, 5).unwrap();
        assert_eq!(ds.periods(), 168);
        let mean: f64 = ds.paths().iter().map(|p| p[6 * 24][0]).sum::<f64>() / 10_000.0;
        let target = 10.0 * 1.1f64.powi(6);
        assert!((mean - target).abs() < 0.02 * target, "{mean} vs {target}");
        assert!((target - 17.7156).abs() < 1e-3);
    }

    #[test]
    fn synthetic_zero_rates_and_determinism() {
        let base = replicate_day(&vec![vec![0.0; 24]; 2]);
        let ds = generate_synthetic_weeks(&base, 1.0, 3, 1).unwrap();
        assert!(ds.paths().iter().flatten().flatten().all(|&v| v == 0.0));
        let base = replicate_day(&ed_monday_profile());
        let a = generate_synthetic_weeks(&base, 1.1, 4, 42).unwrap();
        let b = generate_synthetic_weeks(&base, 1.1, 4, 42).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn quantile_monotone_and_permutation_invariant(mut v in prop::collection::vec(0.0f64..50.0, 1..60), q1 in 0.0f64..1.0, q2 in 0.0f64..1.0) {
            let f = EmpiricalMixtureCdf::from_samples(v.clone()).unwrap();
            let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            prop_assert!(f.quantile(lo) <= f.quantile(hi));
            v.reverse();
            let g = EmpiricalMixtureCdf::from_samples(v).unwrap();
            prop_assert_eq!(f.quantile(q1), g.quantile(q1));
        }

        #[test]
        fn expansion_counts_match_weights(nums in prop::collection::vec(1u64..20, 1..5)) {
            let total: u64 = nums.iter().sum();
            let w: Vec<f64> = nums.iter().map(|&k| k as f64 / total as f64).collect();
            let paths = (0..nums.len()).map(|z| vec![vec![z as f64]]).collect();
            let ds = DemandScenarioSet::new(w.clone(), paths).unwrap();
            let e = expand(&ds, DEFAULT_DENOMINATOR_LIMIT).unwrap();
            for (z, &nz) in e.counts.iter().enumerate() {
                prop_assert!((nz as f64 / e.z_tilde as f64 - w[z]).abs() < 1e-12);
                let copies = e.demands.iter().filter(|d| d[0] == z as f64).count() as u64;
                prop_assert_eq!(copies, nz);
            }
        }
    }
}
