use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use fluidcorr::correction::{run_algorithm1, CorrectionOptions, Outcome};
use fluidcorr::decomposable::hybrid_solve;
use fluidcorr::demand::{self, DemandScenarioSet};
use fluidcorr::eval::{evaluate, run_experiment, ExperimentConfig, SCHEMA_VERSION};
use fluidcorr::existence::{check_certificate, membership_in_b, universal_existence, Membership, MembershipOptions, RequiredPools};
use fluidcorr::forecast::{average_weekly_profile, corrected_weekly_profile, forecast_next_day, Forecaster, Provenance, WeeklyProfile};
use fluidcorr::network::{catalog, ServiceNetwork};
use fluidcorr::twostage::{solve_fluid, solve_saa, verify_kkt_tol, ArrivalRateProfile, TieBreak};

#[derive(Parser)]
#[command(name = "fluidcorr", version, about = "Two-stage staffing and decision-corrected arrival rates")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Network JSON, or `catalog:two-class-bridge` / `catalog:emergency-department`.
    #[arg(long, global = true)]
    network: Option<String>,
    /// Demand CSV with header `scenario,period,class,count`.
    #[arg(long, global = true)]
    demand: Option<PathBuf>,
    /// Generate weekly Poisson demand for the network instead of reading a CSV.
    #[arg(long, global = true)]
    synthetic: bool,
    #[arg(long, global = true, default_value_t = 10)]
    weeks: usize,
    #[arg(long, global = true, default_value_t = 1.1)]
    trend: f64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (directory for `experiment`); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tolerance for KKT and certificate checks.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol: f64,
    /// Write every solved LP as text into this directory.
    #[arg(long, global = true)]
    dump_lp: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the sample-average two-stage staffing problem.
    SolveSaa,
    /// Solve the deterministic fluid model and verify its KKT conditions.
    SolveFluid {
        /// JSON `T x n` rates; defaults to the mean path of `--demand`.
        #[arg(long)]
        rates: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TieArg::MinNorm)]
        tie_break: TieArg,
    },
    /// Decide whether a staffing vector admits a corrected arrival rate.
    CheckExistence {
        /// JSON array of staffing levels (or an object with field `b`).
        #[arg(long)]
        staffing: Option<PathBuf>,
        /// Number of periods when `--staffing` is given without demand.
        #[arg(long, default_value_t = 1)]
        periods: usize,
        #[arg(long, value_enum, default_value_t = PoolsArg::All)]
        pools: PoolsArg,
        /// Prefer certificates with small hour-to-hour jumps (bounded search)
        #[arg(long)]
        smooth: bool,
    },
    /// Compute a decision-corrected arrival-rate profile.
    Correct {
        #[arg(long, value_enum, default_value_t = PoolsArg::All)]
        pools: PoolsArg,
        /// Prefer certificates with small hour-to-hour jumps (bounded search)
        #[arg(long)]
        smooth: bool,
    },
    /// Solve each network component with its cheapest applicable rule.
    HybridSolve {
        /// Prefer certificates with small hour-to-hour jumps (bounded search)
        #[arg(long)]
        smooth: bool,
    },
    /// Forecast next Monday's hourly rates from a weekly profile.
    Forecast {
        /// Weekly profile JSON; built from `--demand` when absent.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MethodArg::Avg)]
        method: MethodArg,
        #[arg(long, value_enum, default_value_t = ModelArg::Naive)]
        model: ModelArg,
    },
    /// Score a staffing vector on held-out demand.
    Evaluate {
        #[arg(long)]
        staffing: PathBuf,
    },
    /// Run the benchmark-versus-corrected weekly experiment.
    Experiment {
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, value_delimiter = ',', default_values_t = vec![5, 10, 20])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 30)]
        test_size: usize,
        /// JSON base rates `[day][class][hour]`; the network's default profile otherwise.
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModelArg::Ar1)]
        model: ModelArg,
        /// Prefer certificates with small hour-to-hour jumps (bounded search)
        #[arg(long)]
        smooth: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TieArg {
    MinNorm,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum PoolsArg {
    All,
    FromSaa,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Avg,
    Corrected,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Naive,
    Ar1,
}

impl From<ModelArg> for Forecaster {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Naive => Forecaster::SeasonalNaive24,
            ModelArg::Ar1 => Forecaster::Ar1PlusSeasonal,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_network(g: &Global) -> Result<ServiceNetwork> {
    let spec = g.network.as_deref().ok_or_else(|| anyhow!("--network is required"))?;
    match spec {
        "catalog:two-class-bridge" => Ok(catalog::two_class_bridge()),
        "catalog:emergency-department" => Ok(catalog::emergency_department()),
        s if s.starts_with("catalog:") => bail!("unknown catalog network {s}"),
        path => ServiceNetwork::load(Path::new(path)).with_context(|| format!("loading network {path}")),
    }
}

fn load_demand(g: &Global, net: &ServiceNetwork) -> Result<DemandScenarioSet> {
    if g.synthetic {
        let base = default_base(net)?;
        return Ok(demand::generate_synthetic_weeks(&base, g.trend, g.weeks, g.seed)?);
    }
    let path = g.demand.as_ref().ok_or_else(|| anyhow!("--demand (or --synthetic) is required"))?;
    let ds = demand::load_csv(path).with_context(|| format!("loading demand {}", path.display()))?;
    if ds.classes() != net.n() {
        bail!("demand has {} classes but the network has {}", ds.classes(), net.n());
    }
    Ok(ds)
}

fn default_base(net: &ServiceNetwork) -> Result<demand::WeeklyRates> {
    let day = demand::ed_monday_profile();
    if day.len() != net.n() {
        bail!("synthetic demand needs the emergency-department network or explicit base rates");
    }
    Ok(demand::replicate_day(&day))
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// A plain array, or an object carrying the array in field `key`.
fn array_field<T: serde::de::DeserializeOwned>(v: Value, key: &str) -> Result<T> {
    let inner = match v {
        Value::Object(mut map) => map.remove(key).ok_or_else(|| anyhow!("missing field `{key}`"))?,
        other => other,
    };
    Ok(serde_json::from_value(inner)?)
}

fn emit<T: Serialize>(g: &Global, body: &T) -> Result<()> {
    let mut value = serde_json::to_value(body)?;
    match &mut value {
        Value::Object(map) => {
            map.insert("schema_version".into(), json!(SCHEMA_VERSION));
        }
        other => value = json!({ "schema_version": SCHEMA_VERSION, "result": other.take() }),
    }
    let text = serde_json::to_string_pretty(&value)?;
    match &g.out {
        Some(path) => std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => write_stdout(&text)?,
    }
    Ok(())
}

/// Prints to stdout, treating a closed pipe as success.
fn write_stdout(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn correction_options(pools: PoolsArg, smooth: bool) -> CorrectionOptions {
    CorrectionOptions {
        pools_from_saa: matches!(pools, PoolsArg::FromSaa),
        membership: MembershipOptions {
            smooth,
            ..MembershipOptions::default()
        },
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    if let Some(dir) = &g.dump_lp {
        fluidcorr::optkernel::set_dump_dir(Some(dir));
    }
    match cli.command {
        Command::SolveSaa => {
            let net = load_network(g)?;
            let ds = load_demand(g, &net)?;
            emit(g, &solve_saa(&net, &ds)?)?;
        }
        Command::SolveFluid { rates, tie_break } => {
            let net = load_network(g)?;
            let lambda = match rates {
                Some(p) => ArrivalRateProfile::new(array_field(read_json(&p)?, "lambda")?)?,
                None => ArrivalRateProfile::new(load_demand(g, &net)?.mean_path())?,
            };
            let tb = match tie_break {
                TieArg::MinNorm => TieBreak::MinNorm,
                TieArg::None => TieBreak::None,
            };
            let sol = solve_fluid(&net, &lambda, tb)?;
            let kkt = verify_kkt_tol(&net, &lambda, &sol, g.tol);
            emit(g, &json!({ "solution": sol, "kkt": kkt }))?;
        }
        Command::CheckExistence { staffing, periods, pools, smooth } => {
            let net = load_network(g)?;
            let (b, t) = match staffing {
                Some(p) => (array_field::<Vec<f64>>(read_json(&p)?, "b")?, periods),
                None => {
                    let ds = load_demand(g, &net)?;
                    (solve_saa(&net, &ds)?.b, ds.periods())
                }
            };
            if b.len() != net.m() {
                bail!("staffing has {} entries but the network has {} pools", b.len(), net.m());
            }
            let required = match pools {
                PoolsArg::All => RequiredPools::All,
                PoolsArg::FromSaa => RequiredPools::StaffedBy(b.clone()),
            };
            let universal = universal_existence(&net, &required);
            let opts = correction_options(pools, smooth).membership;
            let membership = membership_in_b(&net, t, &b, &opts)?;
            let violations = match &membership {
                Membership::InB { certificate, .. } => check_certificate(&net, &b, certificate, g.tol.max(1e-7)),
                _ => Vec::new(),
            };
            emit(
                g,
                &json!({ "b": b, "periods": t, "universal": universal, "membership": membership, "certificate_violations": violations }),
            )?;
        }
        Command::Correct { pools, smooth } => {
            let net = load_network(g)?;
            let ds = load_demand(g, &net)?;
            let res = run_algorithm1(&net, &ds, &correction_options(pools, smooth))?;
            emit(g, &res)?;
            if res.outcome == Outcome::Nonexistent {
                return Ok(ExitCode::from(2));
            }
        }
        Command::HybridSolve { smooth } => {
            let net = load_network(g)?;
            let ds = load_demand(g, &net)?;
            emit(g, &hybrid_solve(&net, &ds, &correction_options(PoolsArg::All, smooth))?)?;
        }
        Command::Forecast { profile, method, model } => {
            let profile = match profile {
                Some(p) => {
                    let v = read_json(&p)?;
                    match serde_json::from_value::<WeeklyProfile>(v.clone()) {
                        Ok(w) => WeeklyProfile::new(w.rates, w.provenance)?,
                        Err(_) => WeeklyProfile::new(array_field(v, "rates")?, Provenance::Average)?,
                    }
                }
                None => {
                    let net = load_network(g)?;
                    let ds = load_demand(g, &net)?;
                    match method {
                        MethodArg::Avg => average_weekly_profile(&ds)?,
                        MethodArg::Corrected => corrected_weekly_profile(&net, &ds, &CorrectionOptions::default())?.profile,
                    }
                }
            };
            let forecaster: Forecaster = model.into();
            let lambda = forecast_next_day(&profile, forecaster)?;
            emit(g, &json!({ "model": forecaster, "provenance": profile.provenance, "flagged_days": profile.flagged_days, "lambda": lambda }))?;
        }
        Command::Evaluate { staffing } => {
            let net = load_network(g)?;
            let ds = load_demand(g, &net)?;
            let b: Vec<f64> = array_field(read_json(&staffing)?, "b")?;
            emit(g, &evaluate(&net, &b, &ds)?)?;
        }
        Command::Experiment { trials, sizes, test_size, base, model, smooth } => {
            let net = match g.network {
                Some(_) => load_network(g)?,
                None => catalog::emergency_department(),
            };
            let base = match base {
                Some(p) => array_field(read_json(&p)?, "base")?,
                None => default_base(&net)?,
            };
            let cfg = ExperimentConfig {
                base,
                trend: g.trend,
                training_sizes: sizes,
                test_size,
                trials,
                seed: g.seed,
                forecaster: model.into(),
                smooth,
                pools_from_saa: false,
            };
            let report = run_experiment(&net, &cfg)?;
            match &g.out {
                Some(dir) => report.write_all(dir).with_context(|| format!("writing {}", dir.display()))?,
                None => report.write_cost_csv(std::io::stdout())?,
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
