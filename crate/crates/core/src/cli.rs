//! Batch front end: calibrate, price, and emit plot-ready CSVs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibrator::{greedy_calibrate, CalibrationResult, GreedySettings};
use crate::error::{Error, Result};
use crate::loss_engine::{cluster_rates_at, intensity_ratio_curve, term_structure, IntensitySchedule};
use crate::market_data::{format_date, load_curve, load_quotes, parse_date, DiscountCurve, QuotePanel};
use crate::model::{ModelKind, PoolSpec, Strategy};
use crate::pricer::{PanelPricer, PricingReport, DEFAULT_GRID_STEP_DAYS};
use crate::simulator::empirical_distributions;

pub const DEFAULT_SEED: u64 = 20061002;
pub const DEFAULT_VALUATION_DATE: &str = "02-Oct-06";

#[derive(Debug, Parser)]
#[command(name = "gpcl", version, about = "Cluster default models: loss distributions, tranche pricing, calibration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Greedy calibration to a quote panel; writes calibration.json, parameters.csv and epsilon.csv.
    Calibrate(CalibrateArgs),
    /// Loss distribution CSVs at the requested times.
    Dist(DistArgs),
    /// Intensity ratio h(c)/h(0) of the four strategies over c = 0..M.
    IntensityCurve(CurveArgs),
    /// Prices a panel under a fixed schedule; writes report.json and epsilon.csv.
    Price(PriceArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long, default_value_t = 125)]
    pub pool_size: usize,
    #[arg(long, default_value_t = 0.4)]
    pub recovery: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct MarketArgs {
    #[arg(long)]
    pub curve: PathBuf,
    #[arg(long)]
    pub quotes: PathBuf,
    /// Refinement of the default-leg grid, in days.
    #[arg(long, default_value_t = DEFAULT_GRID_STEP_DAYS)]
    pub grid_step: f64,
    #[arg(long, default_value = DEFAULT_VALUATION_DATE)]
    pub valuation_date: String,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub model: ModelKind,
    #[command(flatten)]
    pub market: MarketArgs,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 7)]
    pub max_modes: usize,
    /// Restrict the amplitude scan to these sizes (default: every 1..=M).
    #[arg(long, value_delimiter = ',')]
    pub candidates: Option<Vec<usize>>,
    /// Exit nonzero if any fit stopped on its evaluation budget.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    #[arg(long)]
    pub schedule: PathBuf,
    #[command(flatten)]
    pub common: Common,
    /// Times in years.
    #[arg(long, value_delimiter = ',', default_values_t = vec![3.0, 5.0, 7.0, 10.0])]
    pub times: Vec<f64>,
    /// Add Monte Carlo frequencies and standard errors.
    #[arg(long)]
    pub simulate: bool,
    #[arg(long, default_value_t = 100_000)]
    pub paths: u64,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub schedule: PathBuf,
    #[command(flatten)]
    pub common: Common,
    /// Time in years at which cluster rates are read (default: last knot).
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    #[arg(long)]
    pub schedule: PathBuf,
    #[command(flatten)]
    pub market: MarketArgs,
    #[command(flatten)]
    pub common: Common,
}

/// Everything that determines a run's output; hashed into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub curve: Option<PathBuf>,
    pub quotes: Option<PathBuf>,
    pub schedule: Option<PathBuf>,
    pub model: Option<ModelKind>,
    pub pool_size: usize,
    pub recovery: f64,
    pub grid_step: Option<f64>,
    pub valuation_date: Option<NaiveDate>,
    pub seed: u64,
    pub n_paths: Option<u64>,
    pub times: Vec<f64>,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config always serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn pool(&self) -> Result<PoolSpec> {
        PoolSpec::new(self.pool_size, self.recovery)
    }

    /// Input files exist and numeric settings are usable.
    pub fn validate(&self) -> Result<()> {
        for p in [&self.curve, &self.quotes, &self.schedule].into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
                ));
            }
        }
        self.pool()?;
        if let Some(g) = self.grid_step {
            if !(g > 0.0) {
                return Err(Error::validation("--grid-step must be positive"));
            }
        }
        if self.n_paths == Some(0) {
            return Err(Error::validation("--paths must be positive"));
        }
        if self.times.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
            return Err(Error::validation("--times must be non-negative"));
        }
        Ok(())
    }
}

/// JSON artifact: run tag, config, and the payload's own fields.
#[derive(Debug, Serialize, Deserialize)]
pub struct Tagged<T> {
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    #[serde(flatten)]
    pub body: T,
}

/// What a finished command produced.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Optimizer hit a budget and `--strict` was given.
    pub strict_failure: bool,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, config: &RunConfig, body: T) -> Result<()> {
    let tagged = Tagged {
        config_hash: config.hash(),
        seed: config.seed,
        config: config.clone(),
        body,
    };
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &tagged)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// CSV writer whose first line is a `#` comment carrying the run tag.
fn tagged_csv(path: &Path, config: &RunConfig) -> Result<BufWriter<File>> {
    let mut w = create(path)?;
    writeln!(w, "# config_hash={} seed={}", config.hash(), config.seed).map_err(|e| Error::io(path, e))?;
    Ok(w)
}

/// Reads a plain schedule JSON, or the schedule inside a calibration artifact.
pub fn load_schedule(path: &Path) -> Result<IntensitySchedule> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let inner = match value.get("schedule") {
        Some(s) => s.to_string(),
        None => text,
    };
    IntensitySchedule::from_json(&inner)
}

fn valuation_date(raw: &str) -> Result<NaiveDate> {
    parse_date(raw).ok_or_else(|| Error::validation(format!("bad valuation date `{raw}`")))
}

fn load_market(m: &MarketArgs, date: NaiveDate) -> Result<(DiscountCurve, QuotePanel)> {
    let curve = load_curve(open(&m.curve)?, date)?;
    let panel = load_quotes(open(&m.quotes)?, date)?;
    Ok((curve, panel))
}

fn base_config(command: &str, c: &Common) -> RunConfig {
    RunConfig {
        command: command.into(),
        curve: None,
        quotes: None,
        schedule: None,
        model: None,
        pool_size: c.pool_size,
        recovery: c.recovery,
        grid_step: None,
        valuation_date: None,
        seed: c.seed,
        n_paths: None,
        times: Vec::new(),
        out: c.out.clone(),
    }
}

fn with_market(mut cfg: RunConfig, m: &MarketArgs) -> Result<RunConfig> {
    cfg.curve = Some(m.curve.clone());
    cfg.quotes = Some(m.quotes.clone());
    cfg.grid_step = Some(m.grid_step);
    cfg.valuation_date = Some(valuation_date(&m.valuation_date)?);
    Ok(cfg)
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Cumulated intensities as an amplitude x maturity table.
fn write_parameters(path: &Path, config: &RunConfig, s: &IntensitySchedule, maturities: &[NaiveDate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(tagged_csv(path, config)?);
    let mut header = vec!["amplitude".to_string()];
    header.extend(maturities.iter().map(|d| format_date(*d)));
    w.write_record(&header)?;
    for (a, row) in s.amplitudes.iter().zip(&s.cumulated) {
        let mut rec = vec![a.to_string()];
        rec.extend(row.iter().map(|v| format!("{v:.6}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_epsilon(path: &Path, config: &RunConfig, report: &PricingReport) -> Result<()> {
    let w = tagged_csv(path, config)?;
    report.write_epsilon_table(w)
}

pub fn calibrate(args: &CalibrateArgs) -> Result<Outcome> {
    let mut cfg = with_market(base_config("calibrate", &args.common), &args.market)?;
    cfg.model = Some(args.model);
    cfg.validate()?;
    let pool = cfg.pool()?;
    let date = cfg.valuation_date.expect("set by with_market");
    let (curve, panel) = load_market(&args.market, date)?;
    let pricer = PanelPricer::new(&pool, &panel, &curve, args.market.grid_step)?;
    let settings = GreedySettings {
        max_modes: args.max_modes,
        seed: args.common.seed,
        candidates: args.candidates.clone(),
        ..GreedySettings::new(args.model)
    };
    let result: CalibrationResult = greedy_calibrate(&pricer, &settings)?;
    let report = pricer.price(&result.schedule)?;

    prepare_out(&cfg.out)?;
    let files = vec![
        cfg.out.join("calibration.json"),
        cfg.out.join("parameters.csv"),
        cfg.out.join("epsilon.csv"),
    ];
    write_json(&files[0], &cfg, &result)?;
    write_parameters(&files[1], &cfg, &result.schedule, &panel.maturities())?;
    write_epsilon(&files[2], &cfg, &report)?;
    if result.warning {
        log::warn!("some fits stopped on their evaluation budget");
    }
    Ok(Outcome {
        files,
        strict_failure: args.strict && result.warning,
    })
}

pub fn price(args: &PriceArgs) -> Result<Outcome> {
    let mut cfg = with_market(base_config("price", &args.common), &args.market)?;
    cfg.schedule = Some(args.schedule.clone());
    cfg.validate()?;
    let pool = cfg.pool()?;
    let schedule = load_schedule(&args.schedule)?;
    cfg.model = Some(schedule.model);
    let (curve, panel) = load_market(&args.market, cfg.valuation_date.expect("set by with_market"))?;
    let pricer = PanelPricer::new(&pool, &panel, &curve, args.market.grid_step)?;
    let report = pricer.price(&schedule)?;

    prepare_out(&cfg.out)?;
    let files = vec![cfg.out.join("report.json"), cfg.out.join("epsilon.csv")];
    write_json(&files[0], &cfg, &report)?;
    write_epsilon(&files[1], &cfg, &report)?;
    Ok(Outcome {
        files,
        strict_failure: false,
    })
}

/// Strategy whose pathwise count has the model's law.
fn strategy_for(model: ModelKind) -> Strategy {
    match model {
        ModelKind::Gpl => Strategy::S0,
        ModelKind::Gpcl => Strategy::S2,
    }
}

fn time_label(t: f64) -> String {
    format!("{t}").replace('.', "_")
}

pub fn dist(args: &DistArgs) -> Result<Outcome> {
    let mut cfg = base_config("dist", &args.common);
    cfg.schedule = Some(args.schedule.clone());
    cfg.times = args.times.clone();
    if args.simulate {
        cfg.n_paths = Some(args.paths);
    }
    cfg.validate()?;
    let pool = cfg.pool()?;
    let schedule = load_schedule(&args.schedule)?;
    schedule.validate(&pool)?;
    cfg.model = Some(schedule.model);

    let mut order: Vec<usize> = (0..args.times.len()).collect();
    order.sort_by(|&a, &b| args.times[a].total_cmp(&args.times[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| args.times[i]).collect();
    let exact = term_structure(&pool, &schedule, &sorted)?;
    let simulated = if args.simulate {
        let positive: Vec<f64> = sorted.iter().copied().filter(|&t| t > 0.0).collect();
        let mut sims = if positive.is_empty() {
            Vec::new()
        } else {
            empirical_distributions(&pool, &schedule, strategy_for(schedule.model), &positive, args.paths, args.common.seed)?
        };
        // t = 0 is a point mass; no paths needed
        let mut out = Vec::with_capacity(sorted.len());
        for &t in &sorted {
            if t > 0.0 {
                out.push(Some(sims.remove(0)));
            } else {
                out.push(None);
            }
        }
        Some(out)
    } else {
        None
    };

    prepare_out(&cfg.out)?;
    let mut files = Vec::new();
    for (i, (t, d)) in sorted.iter().zip(&exact).enumerate() {
        let path = cfg.out.join(format!("dist_{}y.csv", time_label(*t)));
        let mut w = csv::Writer::from_writer(tagged_csv(&path, &cfg)?);
        let mc = simulated.as_ref().map(|s| &s[i]);
        let mut header = vec!["count", "loss_fraction", "probability"];
        if mc.is_some() {
            header.extend(["mc_frequency", "mc_std_error"]);
        }
        w.write_record(&header)?;
        for (k, p) in d.probs.iter().enumerate() {
            let mut rec = vec![k.to_string(), format!("{}", pool.loss_fraction(k)), format!("{p:e}")];
            match mc {
                Some(Some(e)) => rec.extend([format!("{:e}", e.frequencies[k]), format!("{:e}", e.std_errors[k])]),
                Some(None) => rec.extend([if k == 0 { "1" } else { "0" }.to_string(), "0".to_string()]),
                None => {}
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        files.push(path);
    }
    Ok(Outcome {
        files,
        strict_failure: false,
    })
}

pub fn intensity_curve(args: &CurveArgs) -> Result<Outcome> {
    let mut cfg = base_config("intensity-curve", &args.common);
    cfg.schedule = Some(args.schedule.clone());
    cfg.validate()?;
    let pool = cfg.pool()?;
    let schedule = load_schedule(&args.schedule)?;
    cfg.model = Some(schedule.model);
    let t = args
        .times
        .as_ref()
        .and_then(|v| v.first().copied())
        .unwrap_or_else(|| schedule.horizon());
    cfg.times = vec![t];
    let rates = cluster_rates_at(&pool, &schedule, t)?;
    let curves = Strategy::ALL
        .iter()
        .map(|&s| intensity_ratio_curve(s, &pool, &rates))
        .collect::<Result<Vec<_>>>()?;

    prepare_out(&cfg.out)?;
    let path = cfg.out.join("intensity_ratio.csv");
    let mut w = csv::Writer::from_writer(tagged_csv(&path, &cfg)?);
    let mut header = vec!["c".to_string(), "c_over_m".to_string()];
    header.extend(Strategy::ALL.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for c in 0..=pool.size {
        let mut rec = vec![c.to_string(), format!("{}", c as f64 / pool.size as f64)];
        rec.extend(curves.iter().map(|v| format!("{}", v[c])));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(Outcome {
        files: vec![path],
        strict_failure: false,
    })
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Calibrate(a) => calibrate(a),
        Command::Dist(a) => dist(a),
        Command::IntensityCurve(a) => intensity_curve(a),
        Command::Price(a) => price(a),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if outcome.strict_failure {
                eprintln!("error: optimizer stopped on its budget (--strict)");
                1
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
