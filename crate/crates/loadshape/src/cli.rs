//! The `loadshape` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use loadshape_core::cluster::{
    household_entropy, kmeans_euclidean, kmedoids_dtw, nearest_prototype, quality, quality_under,
    ClusterModel, ClusterOptions, Metric,
};
use loadshape_core::curves::{
    check_periods, normalize_slice, smooth_spline, smoothing_to_lambda, LoadCurve,
};
use loadshape_core::pld::{
    pld_estimate, sparse_pld, BoundDistribution, PowerVector, Sigma1Law, CALIBRATION_SAMPLES,
};
use loadshape_core::predict::{
    dtwe, forecast_next_day, group_households, model_select, ForecastOptions, PredictionSource,
    ScalingMethod, SelectOptions,
};
use loadshape_core::rng::derive_seed;
use loadshape_core::synth::{benchmark_archetypes, generate_population, HouseholdArchetype};
use loadshape_core::HOURS;
use serde::{Deserialize, Serialize};

use crate::io::{
    csv_bytes, curves_csv, emit, fmt_f64, json_bytes, parse_date, read_curves, read_json,
    write_atomic,
};
use crate::model::ModelFile;
use crate::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "loadshape",
    version,
    about = "Shape-based clustering and next-day forecasting of household load curves"
)]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic household population.
    Synth(SynthArgs),
    /// Cluster normalised curves, one model per period of the day.
    Cluster(ClusterArgs),
    /// WC, WB and WCBCR of fitted models.
    Quality(QualityArgs),
    /// Forecast the next day of every household in a history file.
    Predict(PredictArgs),
    /// DTWE of forecasts against actual curves.
    Evaluate(EvaluateArgs),
    /// Leave-one-out DTWE over a grid of K and periods per day.
    Select(SelectArgs),
    /// Power level decomposition.
    #[command(subcommand)]
    Pld(PldCommand),
}

#[derive(Debug, Subcommand)]
pub enum PldCommand {
    /// Usage matrix of one curve.
    Estimate(PldEstimateArgs),
    /// CDFs of the prediction error bounds over a grid of t.
    Bounds(PldBoundsArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Master seed; falls back to LOADSHAPE_SEED, then 0.
    #[arg(long, env = "LOADSHAPE_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Archetype file; the bundled benchmark when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Households per archetype.
    #[arg(long, default_value_t = 20)]
    pub households: usize,
    #[arg(long, default_value_t = 22)]
    pub days: usize,
    /// First simulated day.
    #[arg(long, default_value = "2012-07-19")]
    pub start: String,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for ground-truth usage matrices, power vectors and labels.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// dtw (k-medoids) or euclidean (k-means).
    #[arg(long, default_value = "dtw")]
    pub metric: String,
    #[arg(long)]
    pub k: usize,
    /// Periods per day.
    #[arg(long = "np", default_value_t = 1)]
    pub n_p: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Spline smoothing in [0, 1]; 0 leaves curves untouched.
    #[arg(long, default_value_t = 0.0)]
    pub smoothing: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QualityArgs {
    /// Model file; repeat for a sweep.
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    /// Evaluate under this metric instead of each model's own.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-household entropy CSV.
    #[arg(long)]
    pub entropy: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub history: PathBuf,
    /// Discount of older days in the scale fit, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Use only the most recent N days for the scale fit.
    #[arg(long)]
    pub window: Option<usize>,
    /// Pool weekdays and weekends in one transition model.
    #[arg(long)]
    pub no_split: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Cluster indices and scale factors; defaults to the output path with
    /// a `.json` extension.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub actual: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub kmin: usize,
    #[arg(long, default_value_t = 26)]
    pub kmax: usize,
    #[arg(long, default_value_t = 2)]
    pub kstep: usize,
    /// Comma separated periods-per-day values.
    #[arg(long = "np", value_delimiter = ',', default_values_t = [1, 2, 3])]
    pub n_p: Vec<usize>,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0.0)]
    pub smoothing: f64,
    #[arg(long)]
    pub no_split: bool,
    /// Table of mean DTWE, one row per K and one column per n_p.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Long-form results with fold counts, day-type means and the
    /// persistence baseline.
    #[arg(long)]
    pub detail: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// JSON list of power levels, or an object with `power` and optional
    /// `names` and `alpha`.
    #[arg(long)]
    pub power: PathBuf,
    /// Overrides the file's alpha (default 1).
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PldEstimateArgs {
    /// Curve file holding exactly one row.
    #[arg(long)]
    pub curve: PathBuf,
    #[command(flatten)]
    pub power: PowerArgs,
    /// L1 weight; selects the sparse estimate.
    #[arg(long)]
    pub l1: Option<f64>,
    /// Frobenius weight of the sparse estimate (default 1).
    #[arg(long)]
    pub frob: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PldBoundsArgs {
    /// Forecast curve file holding exactly one row.
    #[arg(long)]
    pub pred: PathBuf,
    /// Actual curve file holding exactly one row.
    #[arg(long)]
    pub actual: PathBuf,
    #[command(flatten)]
    pub power: PowerArgs,
    /// Rank bound of the perturbation; min(24, J) when omitted.
    #[arg(long)]
    pub rank: Option<usize>,
    /// `t0:t1:steps`
    #[arg(long, default_value = "0:1:101")]
    pub grid: String,
    /// Monte-Carlo draws calibrating the largest-eigenvalue law.
    #[arg(long, default_value_t = CALIBRATION_SAMPLES)]
    pub samples: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments").trim();
            eprintln!("{line}");
            return 2;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::invalid("--threads must be at least 1"));
        }
        // A pool may already exist when called repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Cluster(a) => cluster(a),
        Command::Quality(a) => quality_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Select(a) => select(a),
        Command::Pld(PldCommand::Estimate(a)) => pld_estimate_cmd(a),
        Command::Pld(PldCommand::Bounds(a)) => pld_bounds(a),
    }
}

/// Archetype file layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeConfig {
    pub archetypes: Vec<HouseholdArchetype>,
}

impl ArchetypeConfig {
    pub fn benchmark() -> Self {
        ArchetypeConfig {
            archetypes: benchmark_archetypes(),
        }
    }
}

/// Power levels as written by `synth --truth` and read by `pld`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
    pub power: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PowerSpec {
    List(Vec<f64>),
    File(PowerFile),
}

fn load_power(args: &PowerArgs) -> CliResult<(PowerVector, Vec<String>)> {
    let file = match read_json::<PowerSpec>(&args.power)? {
        PowerSpec::List(power) => PowerFile {
            names: None,
            power,
            alpha: None,
        },
        PowerSpec::File(f) => f,
    };
    let alpha = args.alpha.or(file.alpha).unwrap_or(1.0);
    let names = match file.names {
        Some(n) if n.len() == file.power.len() => n,
        Some(_) => {
            return Err(CliError::invalid(
                "power file: names and power differ in length",
            ))
        }
        None => (1..=file.power.len()).map(|j| format!("d{j}")).collect(),
    };
    Ok((PowerVector::new(file.power, alpha)?, names))
}

fn check_smoothing(s: f64) -> CliResult<()> {
    smoothing_to_lambda(s).map(|_| ()).map_err(CliError::from)
}

fn apply_smoothing(curves: Vec<LoadCurve>, smoothing: f64) -> CliResult<Vec<LoadCurve>> {
    if smoothing == 0.0 {
        return Ok(curves);
    }
    curves
        .iter()
        .map(|c| smooth_spline(c, smoothing).map_err(CliError::from))
        .collect()
}

fn single_curve(path: &Path) -> CliResult<LoadCurve> {
    let mut curves = read_curves(path)?;
    if curves.len() != 1 {
        return Err(CliError::invalid(format!(
            "{}: expected exactly one curve, found {}",
            path.display(),
            curves.len()
        )));
    }
    Ok(curves.remove(0))
}

fn synth(a: SynthArgs) -> CliResult<()> {
    if a.days == 0 {
        return Err(CliError::invalid("--days must be at least 1"));
    }
    let start = parse_date(&a.start)?;
    let config = match &a.config {
        Some(path) => read_json::<ArchetypeConfig>(path)?,
        None => ArchetypeConfig::benchmark(),
    };
    for arch in &config.archetypes {
        arch.validate()
            .map_err(|e| CliError::invalid(format!("archetype `{}`: {e}", arch.id)))?;
    }
    let pop = generate_population(&config.archetypes, a.households, a.days, start, a.seed.seed)?;
    write_atomic(&a.out, &curves_csv(&pop.curves())?)?;
    if let Some(dir) = &a.truth {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut labels = Vec::new();
        let mut overflow = Vec::new();
        for h in &pop.households {
            labels.push(vec![h.id.clone(), h.archetype.clone()]);
            let mut header = vec!["date".to_string(), "hour".to_string()];
            header.extend(h.columns.iter().cloned());
            let mut rows = Vec::new();
            for day in &h.days {
                for hour in 0..HOURS {
                    let mut row = vec![day.curve.date.to_string(), hour.to_string()];
                    row.extend((0..h.columns.len()).map(|j| fmt_f64(day.truth.get(hour, j))));
                    rows.push(row);
                }
                for dev in &day.overflow {
                    overflow.push(vec![h.id.clone(), day.curve.date.to_string(), dev.clone()]);
                }
            }
            write_atomic(
                &dir.join(format!("{}.csv", h.id)),
                &csv_bytes(&header, rows)?,
            )?;
            let power = PowerFile {
                names: Some(h.columns.clone()),
                power: h.power.power().to_vec(),
                alpha: Some(h.power.alpha()),
            };
            write_atomic(
                &dir.join(format!("{}.power.json", h.id)),
                &json_bytes(&power)?,
            )?;
        }
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        write_atomic(
            &dir.join("labels.csv"),
            &csv_bytes(&s(&["household_id", "archetype"]), labels)?,
        )?;
        write_atomic(
            &dir.join("overflow.csv"),
            &csv_bytes(&s(&["household_id", "date", "device"]), overflow)?,
        )?;
    }
    Ok(())
}

/// Normalised slices of period `p` for every curve.
fn period_slices(curves: &[LoadCurve], n_p: usize, p: usize) -> CliResult<Vec<Vec<f64>>> {
    let width = check_periods(n_p)?;
    curves
        .iter()
        .map(|c| {
            normalize_slice(&c.values()[p * width..(p + 1) * width]).map_err(|_| {
                CliError::invalid(format!(
                    "{} {}: period {} has no consumption",
                    c.household_id,
                    c.date,
                    p + 1
                ))
            })
        })
        .collect()
}

fn parse_metric(s: &str) -> CliResult<Metric> {
    s.parse::<Metric>()
        .map_err(|_| CliError::invalid(format!("unknown metric `{s}` (expected dtw or euclidean)")))
}

fn cluster(a: ClusterArgs) -> CliResult<()> {
    let metric = parse_metric(&a.metric)?;
    check_periods(a.n_p)?;
    check_smoothing(a.smoothing)?;
    if a.k == 0 || a.restarts == 0 || a.max_iter == 0 {
        return Err(CliError::invalid(
            "--k, --restarts and --max-iter must be at least 1",
        ));
    }
    let curves = apply_smoothing(read_curves(&a.input)?, a.smoothing)?;
    if curves.is_empty() {
        return Err(CliError::invalid(format!(
            "{}: no curves",
            a.input.display()
        )));
    }
    let mut models = Vec::new();
    let mut reports = Vec::new();
    for p in 0..a.n_p {
        let slices = period_slices(&curves, a.n_p, p)?;
        let opts = ClusterOptions {
            k: a.k,
            seed: derive_seed(a.seed.seed, "cluster", p as u64),
            max_iter: a.max_iter,
            restarts: a.restarts,
        };
        let mut model = match metric {
            Metric::Dtw => kmedoids_dtw(&slices, &opts)?,
            Metric::Euclidean => kmeans_euclidean(&slices, &opts)?,
        };
        model.period = p;
        reports.push(quality(&model, &slices)?);
        models.push(model);
    }
    let keys: Vec<(String, NaiveDate)> = curves
        .iter()
        .map(|c| (c.household_id.clone(), c.date))
        .collect();
    let file = ModelFile::from_models(
        &models,
        &reports,
        &keys,
        a.seed.seed,
        a.restarts,
        a.max_iter,
        a.smoothing,
    )?;
    write_atomic(&a.out, &json_bytes(&file)?)
}

fn load_model(path: &Path) -> CliResult<ModelFile> {
    let model: ModelFile = read_json(path)?;
    model
        .validate()
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    Ok(model)
}

fn quality_cmd(a: QualityArgs) -> CliResult<()> {
    let override_metric = a.metric.as_deref().map(parse_metric).transpose()?;
    let models = a
        .model
        .iter()
        .map(|p| load_model(p))
        .collect::<CliResult<Vec<_>>>()?;
    let raw = read_curves(&a.input)?;
    if raw.is_empty() {
        return Err(CliError::invalid(format!(
            "{}: no curves",
            a.input.display()
        )));
    }
    let mut rows = Vec::new();
    let mut entropy_rows = Vec::new();
    for (mi, file) in models.iter().enumerate() {
        let curves = apply_smoothing(raw.clone(), file.smoothing)?;
        let known = file.assignment_map();
        let metric = override_metric.unwrap_or(file.metric);
        for (p, period) in file.periods.iter().enumerate() {
            let slices = period_slices(&curves, file.n_p, p)?;
            let assignments = curves
                .iter()
                .zip(&slices)
                .map(
                    |(c, s)| match known.get(&(c.household_id.as_str(), c.date)) {
                        Some(clusters) => Ok(clusters[p]),
                        None => {
                            nearest_prototype(&period.prototypes, s, file.metric).map(|(k, _)| k)
                        }
                    },
                )
                .collect::<Result<Vec<_>, _>>()?;
            let model = ClusterModel {
                metric: file.metric,
                period: p,
                k: file.k,
                prototypes: period.prototypes.clone(),
                assignments,
                wc: period.wc,
                wc_history: Vec::new(),
                converged: period.converged,
            };
            let q = quality_under(&model, &slices, metric)?;
            rows.push(vec![
                file.k.to_string(),
                metric.as_str().to_string(),
                fmt_f64(q.wc),
                fmt_f64(q.wb),
                q.wcbcr.map(fmt_f64).unwrap_or_default(),
            ]);
            let mut by_household: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (c, &k) in curves.iter().zip(&model.assignments) {
                by_household
                    .entry(c.household_id.as_str())
                    .or_default()
                    .push(k);
            }
            let mut values = Vec::new();
            for (id, labels) in by_household {
                if labels.len() < 2 {
                    continue;
                }
                let s = household_entropy(&labels, file.k)?;
                values.push(s);
                entropy_rows.push(vec![
                    (mi + 1).to_string(),
                    (p + 1).to_string(),
                    file.k.to_string(),
                    id.to_string(),
                    fmt_f64(s),
                ]);
            }
            if !values.is_empty() {
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                entropy_rows.push(vec![
                    (mi + 1).to_string(),
                    (p + 1).to_string(),
                    file.k.to_string(),
                    "mean".into(),
                    fmt_f64(mean),
                ]);
            }
        }
    }
    let header: Vec<String> = ["k", "metric", "WC", "WB", "WCBCR"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let table = csv_bytes(&header, rows)?;
    if let Some(path) = &a.entropy {
        let header: Vec<String> = ["model", "p", "k", "household_id", "entropy"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        write_atomic(path, &csv_bytes(&header, entropy_rows)?)?;
    }
    emit(a.out.as_deref(), &table)
}

#[derive(Debug, Serialize)]
struct ForecastRecord {
    household_id: String,
    date: NaiveDate,
    day_type: &'static str,
    /// 1-based cluster per period.
    clusters: Vec<usize>,
    sources: Vec<PredictionSource>,
    alphas: Vec<f64>,
    scaling: &'static str,
    scaling_days: usize,
}

fn predict(a: PredictArgs) -> CliResult<()> {
    if !(a.beta > 0.0 && a.beta <= 1.0) {
        return Err(CliError::invalid(format!(
            "--beta must lie in (0, 1], got {}",
            a.beta
        )));
    }
    if a.window == Some(0) {
        return Err(CliError::invalid("--window must be at least 1"));
    }
    let model = load_model(&a.model)?;
    let set = model.prototype_set()?;
    let history = apply_smoothing(read_curves(&a.history)?, model.smoothing)?;
    if history.is_empty() {
        return Err(CliError::invalid(format!(
            "{}: no curves",
            a.history.display()
        )));
    }
    let opts = ForecastOptions {
        beta: a.beta,
        split_day_type: !a.no_split,
        window: a.window,
    };
    let mut out_curves = Vec::new();
    let mut records = Vec::new();
    for h in group_households(&history) {
        let f = forecast_next_day(&h.days, &set, &opts)
            .map_err(|e| CliError::invalid(format!("household {}: {e}", h.id)))?;
        let last = h
            .days
            .last()
            .expect("grouped households are non-empty")
            .date;
        let date = last
            .succ_opt()
            .ok_or_else(|| CliError::invalid("date out of range"))?;
        let clamped: Vec<f64> = f.values.iter().map(|v| v.max(0.0)).collect();
        let curve =
            loadshape_core::curves::validate_curve(&clamped, h.id.clone(), date).map_err(|e| {
                CliError::Runtime(format!(
                    "household {}: forecast is not a valid curve: {e}",
                    h.id
                ))
            })?;
        out_curves.push(curve);
        let (scaling, scaling_days) = match f.scaling {
            ScalingMethod::Naive => ("naive", h.days.len()),
            ScalingMethod::Weighted { days } => ("weighted", days),
        };
        records.push(ForecastRecord {
            household_id: h.id.clone(),
            date,
            day_type: f.day_type.as_str(),
            clusters: f.clusters.iter().map(|c| c + 1).collect(),
            sources: f.sources,
            alphas: f.alphas,
            scaling,
            scaling_days,
        });
    }
    let sidecar = a
        .sidecar
        .clone()
        .unwrap_or_else(|| a.out.with_extension("json"));
    if sidecar == a.out {
        return Err(CliError::invalid("--sidecar must differ from --out"));
    }
    write_atomic(&a.out, &curves_csv(&out_curves)?)?;
    write_atomic(&sidecar, &json_bytes(&records)?)
}

fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let pred = read_curves(&a.pred)?;
    let actual = read_curves(&a.actual)?;
    let lookup: BTreeMap<(&str, NaiveDate), &LoadCurve> = actual
        .iter()
        .map(|c| ((c.household_id.as_str(), c.date), c))
        .collect();
    if pred.is_empty() {
        return Err(CliError::invalid(format!(
            "{}: no forecasts",
            a.pred.display()
        )));
    }
    let mut per_household: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for p in &pred {
        let truth = lookup
            .get(&(p.household_id.as_str(), p.date))
            .ok_or_else(|| {
                CliError::invalid(format!("no actual curve for {} {}", p.household_id, p.date))
            })?;
        per_household
            .entry(p.household_id.as_str())
            .or_default()
            .push(dtwe(p.values(), truth.values())?);
    }
    let mut rows = Vec::new();
    let mut means = Vec::new();
    for (id, errors) in &per_household {
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        means.push(mean);
        rows.push(vec![
            id.to_string(),
            errors.len().to_string(),
            fmt_f64(mean),
        ]);
    }
    let overall = means.iter().sum::<f64>() / means.len() as f64;
    rows.push(vec![
        "mean".into(),
        pred.len().to_string(),
        fmt_f64(overall),
    ]);
    let header: Vec<String> = ["household_id", "days", "dtwe"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    emit(a.out.as_deref(), &csv_bytes(&header, rows)?)
}

fn select(a: SelectArgs) -> CliResult<()> {
    if a.kmin == 0 || a.kstep == 0 || a.kmax < a.kmin {
        return Err(CliError::invalid(
            "need 1 <= --kmin <= --kmax and --kstep >= 1",
        ));
    }
    if a.n_p.is_empty() {
        return Err(CliError::invalid("--np needs at least one value"));
    }
    for &n_p in &a.n_p {
        check_periods(n_p)?;
    }
    if a.restarts == 0 || a.max_iter == 0 {
        return Err(CliError::invalid(
            "--restarts and --max-iter must be at least 1",
        ));
    }
    check_smoothing(a.smoothing)?;
    let k_grid: Vec<usize> = (a.kmin..=a.kmax).step_by(a.kstep).collect();
    let curves = apply_smoothing(read_curves(&a.input)?, a.smoothing)?;
    let households = group_households(&curves);
    let opts = SelectOptions {
        k_grid: k_grid.clone(),
        np_grid: a.n_p.clone(),
        seed: a.seed.seed,
        restarts: a.restarts,
        max_iter: a.max_iter,
        split_day_type: !a.no_split,
    };
    let report = model_select(&households, &opts)?;

    let mut header = vec!["k".to_string()];
    header.extend(a.n_p.iter().map(|n| format!("np_{n}")));
    let rows = k_grid.iter().map(|&k| {
        let mut row = vec![k.to_string()];
        row.extend(a.n_p.iter().map(|&n| {
            report
                .cell(k, n)
                .map(|c| fmt_f64(c.error.mean))
                .unwrap_or_default()
        }));
        row
    });
    let table = csv_bytes(&header, rows)?;
    if let Some(path) = &a.detail {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let mut rows: Vec<Vec<String>> = report
            .cells
            .iter()
            .map(|c| {
                vec![
                    c.k.to_string(),
                    c.n_p.to_string(),
                    fmt_f64(c.error.mean),
                    c.error.folds.to_string(),
                    opt(c.error.weekday),
                    opt(c.error.weekend),
                ]
            })
            .collect();
        let p = &report.persistence;
        rows.push(vec![
            "persistence".into(),
            String::new(),
            fmt_f64(p.mean),
            p.folds.to_string(),
            opt(p.weekday),
            opt(p.weekend),
        ]);
        let header: Vec<String> = [
            "k",
            "n_p",
            "mean_dtwe",
            "folds",
            "weekday_dtwe",
            "weekend_dtwe",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        write_atomic(path, &csv_bytes(&header, rows)?)?;
    }
    emit(a.out.as_deref(), &table)
}

fn pld_estimate_cmd(a: PldEstimateArgs) -> CliResult<()> {
    let frob = a.frob.unwrap_or(1.0);
    if a.l1.is_some_and(|v| !(v >= 0.0 && v.is_finite())) || !(frob > 0.0 && frob.is_finite()) {
        return Err(CliError::invalid("need --l1 >= 0 and --frob > 0"));
    }
    let (pv, names) = load_power(&a.power)?;
    let curve = single_curve(&a.curve)?;
    let matrix = if a.l1.is_some() || a.frob.is_some() {
        sparse_pld(curve.values(), &pv, frob, a.l1.unwrap_or(0.0))?
    } else {
        pld_estimate(curve.values(), &pv)?
    };
    let rows = (0..matrix.rows()).map(|i| matrix.row(i).into_iter().map(fmt_f64).collect());
    emit(a.out.as_deref(), &csv_bytes(&names, rows)?)
}

fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::invalid(format!("--grid must look like t0:t1:steps, got `{text}`"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let t0: f64 = parts[0].parse().map_err(|_| bad())?;
    let t1: f64 = parts[1].parse().map_err(|_| bad())?;
    let steps: usize = parts[2].parse().map_err(|_| bad())?;
    if !(t0.is_finite() && t1.is_finite() && t0 <= t1) || steps == 0 {
        return Err(bad());
    }
    if steps == 1 {
        return Ok(vec![t0]);
    }
    Ok((0..steps)
        .map(|i| t0 + (t1 - t0) * i as f64 / (steps - 1) as f64)
        .collect())
}

fn pld_bounds(a: PldBoundsArgs) -> CliResult<()> {
    if a.rank == Some(0) {
        return Err(CliError::invalid("--rank must be at least 1"));
    }
    if a.samples < 3 {
        return Err(CliError::invalid("--samples must be at least 3"));
    }
    let grid = parse_grid(&a.grid)?;
    let (pv, _) = load_power(&a.power)?;
    let rank = a.rank.unwrap_or(HOURS.min(pv.len()));
    let pred = single_curve(&a.pred)?;
    let actual = single_curve(&a.actual)?;
    let x_norm: f64 = actual.values().iter().map(|v| v * v).sum();
    let err: f64 = actual
        .values()
        .iter()
        .zip(pred.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let ratio = err / x_norm;
    let r = rank as f64;
    if !(ratio >= 1.0 / r && ratio <= r) {
        return Err(loadshape_core::Error::AssumptionViolated { ratio, rank }.into());
    }
    let law = Sigma1Law::calibrate(
        HOURS,
        pv.len(),
        a.samples,
        derive_seed(a.seed.seed, "sigma1", 0),
    )?;
    let bd = BoundDistribution::from_curves(actual.values(), pred.values(), &pv, rank, law)?;
    let rows = grid.iter().map(|&t| {
        vec![
            fmt_f64(t),
            fmt_f64(bd.cdf_lower(t)),
            fmt_f64(bd.cdf_upper(t)),
        ]
    });
    let header: Vec<String> = ["t", "F_lower", "F_upper"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    emit(a.out.as_deref(), &csv_bytes(&header, rows)?)
}
