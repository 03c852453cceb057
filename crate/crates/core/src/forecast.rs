//! Weekly profiles and next-day forecasts.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::correction::CorrectionOptions;
use crate::decomposable::{hybrid_solve, HybridPlan};
use crate::demand::DemandScenarioSet;
use crate::error::{Error, Result};
use crate::network::ServiceNetwork;

pub const DAYS: usize = 7;
pub const HOURS: usize = 24;
pub const WEEK: usize = DAYS * HOURS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Average,
    Corrected,
}

/// Hourly rates indexed `[day][class][hour]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeeklyProfile {
    pub rates: Vec<Vec<Vec<f64>>>,
    pub provenance: Provenance,
    /// Days whose corrected rate did not exist and were filled best-effort.
    #[serde(default)]
    pub flagged_days: Vec<usize>,
}

impl WeeklyProfile {
    pub fn new(rates: Vec<Vec<Vec<f64>>>, provenance: Provenance) -> Result<Self> {
        let n = rates.first().map_or(0, |d| d.len());
        if rates.len() != DAYS || n == 0 || rates.iter().any(|d| d.len() != n || d.iter().any(|c| c.len() != HOURS)) {
            return Err(Error::Dimension("weekly profile must be 7 x n x 24".into()));
        }
        if rates.iter().flatten().flatten().any(|&r| !(r >= 0.0) || !r.is_finite()) {
            return Err(Error::Demand("weekly profile rates must be finite and nonnegative".into()));
        }
        Ok(Self {
            rates,
            provenance,
            flagged_days: Vec::new(),
        })
    }

    pub fn classes(&self) -> usize {
        self.rates[0].len()
    }

    /// The 168-hour series of one class.
    pub fn series(&self, class: usize) -> Vec<f64> {
        self.rates.iter().flat_map(|d| d[class].iter().copied()).collect()
    }
}

fn check_week(ds: &DemandScenarioSet) -> Result<()> {
    if ds.periods() != WEEK {
        return Err(Error::Dimension(format!("weekly data needs T = {WEEK}, got {}", ds.periods())));
    }
    Ok(())
}

/// Element-wise weighted mean over the training weeks.
pub fn average_weekly_profile(ds: &DemandScenarioSet) -> Result<WeeklyProfile> {
    check_week(ds)?;
    let mean = ds.mean_path();
    let n = ds.classes();
    let rates = (0..DAYS)
        .map(|d| (0..n).map(|i| (0..HOURS).map(|t| mean[d * HOURS + t][i]).collect()).collect())
        .collect();
    WeeklyProfile::new(rates, Provenance::Average)
}

/// Per-day hybrid plan behind a corrected weekly profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectedWeek {
    pub profile: WeeklyProfile,
    pub days: Vec<HybridPlan>,
}

/// Runs the hybrid correction independently on each day of the week.
pub fn corrected_weekly_profile(net: &ServiceNetwork, ds: &DemandScenarioSet, opts: &CorrectionOptions) -> Result<CorrectedWeek> {
    check_week(ds)?;
    let n = ds.classes();
    let mut rates = Vec::with_capacity(DAYS);
    let mut days = Vec::with_capacity(DAYS);
    let mut flagged = Vec::new();
    for d in 0..DAYS {
        let day = ds.restrict_periods(d * HOURS, HOURS)?;
        let plan = hybrid_solve(net, &day, opts)?;
        if plan.components.iter().any(|c| c.flagged) {
            log::warn!("day {d}: no corrected rate for some component, using best-effort profile");
            flagged.push(d);
        }
        rates.push((0..n).map(|i| (0..HOURS).map(|t| plan.lambda[t][i]).collect()).collect());
        days.push(plan);
    }
    let mut profile = WeeklyProfile::new(rates, Provenance::Corrected)?;
    profile.flagged_days = flagged;
    Ok(CorrectedWeek { profile, days })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Forecaster {
    /// Monday slice times the fitted week-over-week growth.
    #[default]
    SeasonalNaive24,
    /// Least squares `x_t = a x_{t-1} + b x_{t-24} + mu` per class, rolled forward.
    Ar1PlusSeasonal,
}

/// Daily growth factor from a least-squares line through log daily totals.
/// Days with zero total are skipped; fewer than two usable days give 1.
pub fn fitted_daily_growth(profile: &WeeklyProfile) -> f64 {
    let pts: Vec<(f64, f64)> = profile
        .rates
        .iter()
        .enumerate()
        .filter_map(|(d, day)| {
            let total: f64 = day.iter().flatten().sum();
            (total > 0.0).then(|| (d as f64, total.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return 1.0;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxy / sxx).exp()
}

/// Coefficients `(a, b, mu)` of the lag-1 / lag-24 regression (minimum norm).
pub fn fit_ar1_seasonal(series: &[f64]) -> Result<[f64; 3]> {
    if series.len() <= HOURS {
        return Err(Error::Dimension("series must be longer than one day".into()));
    }
    let rows = series.len() - HOURS;
    let x = DMatrix::from_fn(rows, 3, |r, c| match c {
        0 => series[r + HOURS - 1],
        1 => series[r],
        _ => 1.0,
    });
    let y = DVector::from_iterator(rows, series[HOURS..].iter().copied());
    let sol = x
        .svd(true, true)
        .solve(&y, 1e-10)
        .map_err(|e| Error::Precondition(format!("regression failed: {e}")))?;
    Ok([sol[0], sol[1], sol[2]])
}

/// Next Monday's rates, indexed `[hour][class]`, clamped at zero.
pub fn forecast_next_day(profile: &WeeklyProfile, forecaster: Forecaster) -> Result<Vec<Vec<f64>>> {
    let n = profile.classes();
    let mut out = vec![vec![0.0; n]; HOURS];
    match forecaster {
        Forecaster::SeasonalNaive24 => {
            let scale = fitted_daily_growth(profile).powi(DAYS as i32);
            for (t, row) in out.iter_mut().enumerate() {
                for (i, v) in row.iter_mut().enumerate() {
                    *v = (profile.rates[0][i][t] * scale).max(0.0);
                }
            }
        }
        Forecaster::Ar1PlusSeasonal => {
            for i in 0..n {
                let mut series = profile.series(i);
                if series.iter().all(|&v| v == 0.0) {
                    continue;
                }
                let [a, b, mu] = fit_ar1_seasonal(&series)?;
                for t in 0..HOURS {
                    let len = series.len();
                    let next = (a * series[len - 1] + b * series[len - HOURS] + mu).max(0.0);
                    series.push(next);
                    out[t][i] = next;
                }
            }
        }
    }
    Ok(out)
}
