//! Out-of-sample evaluation and the weekly benchmark-versus-corrected experiment.

use std::io::Write;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::correction::CorrectionOptions;
use crate::demand::{generate_days, generate_synthetic_weeks, DemandScenarioSet, WeeklyRates};
use crate::error::{Error, Result};
use crate::forecast::{average_weekly_profile, corrected_weekly_profile, forecast_next_day, Forecaster};
use crate::network::ServiceNetwork;
use crate::twostage::{second_stage, solve_fluid, ArrivalRateProfile, TieBreak};

pub const SCHEMA_VERSION: u32 = 1;

/// Cost of one staffing vector on a test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub b: Vec<f64>,
    pub staffing_cost: f64,
    pub mean_abandonment: f64,
    pub total: f64,
    /// Abandonment cost of each test scenario.
    pub per_scenario: Vec<f64>,
}

/// `c~ . b` plus the weighted mean second-stage cost over `test`.
pub fn evaluate(net: &ServiceNetwork, b: &[f64], test: &DemandScenarioSet) -> Result<Evaluation> {
    if b.len() != net.m() || test.classes() != net.n() {
        return Err(Error::Dimension("staffing or test demand does not match the network".into()));
    }
    if b.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Precondition("staffing must be finite and nonnegative".into()));
    }
    let c_tilde = net.c_tilde(test.periods());
    let staffing_cost: f64 = c_tilde.iter().zip(b).map(|(c, v)| c * v).sum();
    let per_scenario = test
        .paths()
        .iter()
        .map(|path| second_stage(net, b, path).map(|s| s.value))
        .collect::<Result<Vec<_>>>()?;
    let mean_abandonment: f64 = per_scenario.iter().zip(test.weights()).map(|(v, w)| v * w).sum();
    Ok(Evaluation {
        b: b.to_vec(),
        staffing_cost,
        mean_abandonment,
        total: staffing_cost + mean_abandonment,
        per_scenario,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Base rates `[day][class][hour]` before the daily trend.
    pub base: WeeklyRates,
    pub trend: f64,
    pub training_sizes: Vec<usize>,
    pub test_size: usize,
    pub trials: usize,
    pub seed: u64,
    pub forecaster: Forecaster,
    /// Minimise hour-to-hour jumps of the certificate duals.
    pub smooth: bool,
    /// Require only the pools staffed by the SAA solution in the universal test.
    pub pools_from_saa: bool,
}

impl ExperimentConfig {
    /// Defaults for the emergency-department network: Monday base replicated
    /// over the week, trend 1.1, N in {5, 10, 20}, 30 test days, 5 trials,
    /// lag-1 / lag-24 forecaster.
    pub fn emergency_department(seed: u64) -> Self {
        Self {
            base: crate::demand::replicate_day(&crate::demand::ed_monday_profile()),
            trend: 1.1,
            training_sizes: vec![5, 10, 20],
            test_size: 30,
            trials: 5,
            seed,
            forecaster: Forecaster::Ar1PlusSeasonal,
            smooth: false,
            pools_from_saa: false,
        }
    }

    pub fn correction_options(&self) -> CorrectionOptions {
        let mut opts = CorrectionOptions {
            pools_from_saa: self.pools_from_saa,
            ..CorrectionOptions::default()
        };
        opts.membership.smooth = self.smooth;
        opts
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Benchmark,
    Corrected,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Benchmark => "benchmark",
            Method::Corrected => "corrected",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub training_weeks: usize,
    pub method: Method,
    pub evaluation: Evaluation,
    /// Days whose correction fell back to a best-effort profile.
    pub flagged_days: Vec<usize>,
    /// Excluded from the aggregate because every day failed.
    pub excluded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub training_weeks: usize,
    pub method: Method,
    pub trials: usize,
    pub mean_total: f64,
    pub se_total: f64,
    pub mean_staffing: f64,
    pub mean_abandonment: f64,
    pub mean_b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    /// Seeds `(training, test)` per trial.
    pub seeds: Vec<(u64, u64)>,
    pub tie_break: String,
    pub results: Vec<TrialResult>,
    pub summary: Vec<SummaryRow>,
}

/// Seeds of one trial: stream `2 t` feeds training weeks, `2 t + 1` the test days.
pub fn trial_seeds(seed: u64, trial: usize) -> (u64, u64) {
    let draw = |stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng.next_u64()
    };
    (draw(2 * trial as u64), draw(2 * trial as u64 + 1))
}

fn fluid_staffing(net: &ServiceNetwork, rates: Vec<Vec<f64>>) -> Result<Vec<f64>> {
    Ok(solve_fluid(net, &ArrivalRateProfile::new(rates)?, TieBreak::MinNorm)?.b)
}

fn validate(net: &ServiceNetwork, cfg: &ExperimentConfig) -> Result<()> {
    if cfg.base.len() != 7 || cfg.base.iter().any(|d| d.len() != net.n()) {
        return Err(Error::Dimension("base rates must be 7 days x n classes x 24 hours".into()));
    }
    if cfg.training_sizes.is_empty() || cfg.training_sizes.contains(&0) || cfg.trials == 0 || cfg.test_size == 0 {
        return Err(Error::Precondition("trials, test size and training sizes must be positive".into()));
    }
    Ok(())
}

fn run_trial(net: &ServiceNetwork, cfg: &ExperimentConfig, trial: usize) -> Result<Vec<TrialResult>> {
    let (train_seed, test_seed) = trial_seeds(cfg.seed, trial);
    let max_n = *cfg.training_sizes.iter().max().expect("nonempty");
    // training sets are nested prefixes of one stream of weeks
    let weeks = generate_synthetic_weeks(&cfg.base, cfg.trend, max_n, train_seed)?;
    let test = generate_days(&cfg.base[0], cfg.trend.powi(7), cfg.test_size, test_seed)?;
    let mut out = Vec::new();
    for &n in &cfg.training_sizes {
        let train = DemandScenarioSet::equal_weights(weeks.paths()[..n].to_vec())?;
        let avg = average_weekly_profile(&train)?;
        let b_bench = fluid_staffing(net, forecast_next_day(&avg, cfg.forecaster)?)?;
        out.push(TrialResult {
            trial,
            training_weeks: n,
            method: Method::Benchmark,
            evaluation: evaluate(net, &b_bench, &test)?,
            flagged_days: Vec::new(),
            excluded: false,
        });
        let corrected = corrected_weekly_profile(net, &train, &cfg.correction_options())?;
        let b_corr = fluid_staffing(net, forecast_next_day(&corrected.profile, cfg.forecaster)?)?;
        let all_failed = corrected.days.iter().all(|d| !d.components.is_empty() && d.components.iter().all(|c| c.flagged));
        out.push(TrialResult {
            trial,
            training_weeks: n,
            method: Method::Corrected,
            evaluation: evaluate(net, &b_corr, &test)?,
            flagged_days: corrected.profile.flagged_days.clone(),
            excluded: all_failed,
        });
        log::info!("trial {trial} N={n}: benchmark {:.3} corrected {:.3}", out[out.len() - 2].evaluation.total, out[out.len() - 1].evaluation.total);
    }
    Ok(out)
}

fn summarise(cfg: &ExperimentConfig, results: &[TrialResult], m: usize) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &n in &cfg.training_sizes {
        for method in [Method::Benchmark, Method::Corrected] {
            let sel: Vec<&TrialResult> = results
                .iter()
                .filter(|r| r.training_weeks == n && r.method == method && !r.excluded)
                .collect();
            let k = sel.len() as f64;
            let mean = |f: &dyn Fn(&TrialResult) -> f64| if sel.is_empty() { f64::NAN } else { sel.iter().map(|r| f(r)).sum::<f64>() / k };
            let mean_total = mean(&|r| r.evaluation.total);
            let se_total = if sel.len() > 1 {
                let var = sel.iter().map(|r| (r.evaluation.total - mean_total).powi(2)).sum::<f64>() / (k - 1.0);
                (var / k).sqrt()
            } else {
                0.0
            };
            rows.push(SummaryRow {
                training_weeks: n,
                method,
                trials: sel.len(),
                mean_total,
                se_total,
                mean_staffing: mean(&|r| r.evaluation.staffing_cost),
                mean_abandonment: mean(&|r| r.evaluation.mean_abandonment),
                mean_b: (0..m).map(|h| mean(&|r| r.evaluation.b[h])).collect(),
            });
        }
    }
    rows
}

/// Runs every trial (in parallel threads) and aggregates per training size.
pub fn run_experiment(net: &ServiceNetwork, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    validate(net, cfg)?;
    let per_trial: Vec<Result<Vec<TrialResult>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..cfg.trials).map(|t| s.spawn(move || run_trial(net, cfg, t))).collect();
        handles.into_iter().map(|h| h.join().expect("trial thread panicked")).collect()
    });
    let mut results = Vec::new();
    for r in per_trial {
        results.extend(r?);
    }
    let summary = summarise(cfg, &results, net.m());
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        seeds: (0..cfg.trials).map(|t| trial_seeds(cfg.seed, t)).collect(),
        tie_break: TieBreak::MinNorm.label().to_string(),
        results,
        summary,
    })
}

impl ExperimentReport {
    pub fn summary_for(&self, n: usize, method: Method) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.training_weeks == n && r.method == method)
    }

    /// `schema_version,training_weeks,method,trials,mean_total,se_total,mean_staffing,mean_abandonment`
    pub fn write_cost_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        out.write_record(["schema_version", "training_weeks", "method", "trials", "mean_total", "se_total", "mean_staffing", "mean_abandonment"])
            .map_err(io)?;
        for r in &self.summary {
            out.write_record([
                SCHEMA_VERSION.to_string(),
                r.training_weeks.to_string(),
                r.method.label().to_string(),
                r.trials.to_string(),
                r.mean_total.to_string(),
                r.se_total.to_string(),
                r.mean_staffing.to_string(),
                r.mean_abandonment.to_string(),
            ])
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }

    /// `schema_version,training_weeks,method,pool,mean_b`
    pub fn write_staffing_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        out.write_record(["schema_version", "training_weeks", "method", "pool", "mean_b"]).map_err(io)?;
        for r in &self.summary {
            for (h, b) in r.mean_b.iter().enumerate() {
                out.write_record([
                    SCHEMA_VERSION.to_string(),
                    r.training_weeks.to_string(),
                    r.method.label().to_string(),
                    h.to_string(),
                    b.to_string(),
                ])
                .map_err(io)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `report.json`, `cost_vs_n.csv` and `staffing_vs_n.csv` into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)?)?;
        self.write_cost_csv(std::fs::File::create(dir.join("cost_vs_n.csv"))?)?;
        self.write_staffing_csv(std::fs::File::create(dir.join("staffing_vs_n.csv"))?)?;
        Ok(())
    }
}
