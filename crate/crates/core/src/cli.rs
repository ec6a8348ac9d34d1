//! Command-line front end: `fit`, `predict`, `evaluate` and `leaderboard`.
//!
//! Exit codes are 0 on success, 1 for user errors (flags, data, artifacts)
//! and 2 for internal failures. Errors are reported on stderr as a single
//! JSON line.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::forecast::{ForecastFrame, QuantileLevels};
use crate::metrics::EvalMetric;
use crate::models::ModelError;
use crate::panel::format_timestamp;
use crate::panel::{load_csv, ColumnMap, Frequency, LoadOptions, TimeSeriesFrame};
use crate::predictor::{self, LeaderboardRow, Preset, PredictorArtifact, PredictorError, TaskConfig};

#[derive(Debug, Parser)]
#[command(name = "panelcast", version, about = "Probabilistic forecasting for panels of time series")]
pub struct Cli {
    /// Emit single-line JSON records instead of tables.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a predictor and write it to a directory.
    Fit(FitArgs),
    /// Forecast with a trained predictor.
    Predict(PredictArgs),
    /// Score a predictor on the last prediction_length steps of a data set.
    Evaluate(EvaluateArgs),
    /// Show the leaderboard of a trained predictor.
    Leaderboard(LeaderboardArgs),
}

#[derive(Debug, Args)]
pub struct ColumnArgs {
    #[arg(long, default_value = "item_id")]
    pub id_column: String,
    #[arg(long, default_value = "timestamp")]
    pub timestamp_column: String,
    #[arg(long, default_value = "target")]
    pub target_column: String,
    /// Forward-fill missing target values instead of rejecting them.
    #[arg(long)]
    pub fill_missing: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub prediction_length: usize,
    #[arg(long, default_value = "WQL")]
    pub metric: String,
    /// Comma-separated quantile levels.
    #[arg(long)]
    pub quantiles: Option<String>,
    #[arg(long, default_value = "medium")]
    pub preset: String,
    #[arg(long, default_value_t = 600.0)]
    pub time_limit: f64,
    #[arg(long, default_value_t = 1)]
    pub num_windows: usize,
    /// Comma-separated known covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub known_covariates: Vec<String>,
    /// Comma-separated past covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub past_covariates: Vec<String>,
    /// Comma-separated static covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub static_covariates: Vec<String>,
    /// Frequency alias (Y, Q, M, W, D, H); inferred when omitted.
    #[arg(long)]
    pub frequency: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// CSV with future values of the known covariates.
    #[arg(long)]
    pub known_covariates_file: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub metric: Option<String>,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

#[derive(Debug, Args)]
pub struct LeaderboardArgs {
    #[arg(long)]
    pub model: PathBuf,
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    fn user(error: anyhow::Error) -> Self {
        Failure { code: 1, error }
    }
}

impl From<PredictorError> for Failure {
    fn from(e: PredictorError) -> Self {
        let code = match &e {
            PredictorError::AllModelsFailed(_) => 2,
            PredictorError::Model(ModelError::NonFiniteLoss | ModelError::Other(_)) => 2,
            _ => 1,
        };
        Failure { code, error: e.into() }
    }
}

/// Parse `args`, run the command and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let json = cli.json;
    match run(cli, &mut io::stdout().lock()) {
        Ok(()) => 0,
        Err(f) => {
            let kind = if f.code == 1 { "user" } else { "internal" };
            let line = json!({ "error": format!("{:#}", f.error), "kind": kind, "exit_code": f.code });
            eprintln!("{line}");
            if !json {
                log::debug!("{:?}", f.error);
            }
            f.code
        }
    }
}

fn configure_threads() {
    let Ok(raw) = std::env::var("CHRONO_THREADS") else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(0) => {}
        Ok(n) => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Err(_) => log::warn!("ignoring invalid CHRONO_THREADS={raw}"),
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    match cli.command {
        Command::Fit(a) => cmd_fit(a, cli.json, out),
        Command::Predict(a) => cmd_predict(a, cli.json, out),
        Command::Evaluate(a) => cmd_evaluate(a, cli.json, out),
        Command::Leaderboard(a) => {
            let artifact = load_artifact(&a.model)?;
            print_leaderboard(artifact.leaderboard(), cli.json, out).map_err(internal)
        }
    }
}

fn internal(e: io::Error) -> Failure {
    Failure { code: 2, error: e.into() }
}

fn parse_metric(s: &str) -> Result<EvalMetric, Failure> {
    s.parse::<EvalMetric>().map_err(|e| Failure::user(anyhow!(e)))
}

fn load_frame(path: &Path, columns: &ColumnArgs, map: ColumnMap, frequency: Option<Frequency>) -> Result<TimeSeriesFrame, Failure> {
    let opts = LoadOptions {
        columns: ColumnMap {
            id: columns.id_column.clone(),
            timestamp: columns.timestamp_column.clone(),
            target: Some(columns.target_column.clone()),
            ..map
        },
        frequency,
        fill_missing: columns.fill_missing,
        fill_gaps: false,
    };
    load_csv(path, &opts).with_context(|| format!("loading {}", path.display())).map_err(Failure::user)
}

fn load_artifact(dir: &Path) -> Result<PredictorArtifact, Failure> {
    PredictorArtifact::load(dir).map_err(|e| Failure::user(e.into()))
}

fn schema_map(artifact: &PredictorArtifact) -> ColumnMap {
    ColumnMap {
        past_covariates: artifact.schema.past.clone(),
        known_covariates: artifact.schema.known.clone(),
        static_covariates: artifact.schema.statics.clone(),
        ..ColumnMap::default()
    }
}

fn cmd_fit(a: FitArgs, json: bool, out: &mut dyn Write) -> Result<(), Failure> {
    let metric = parse_metric(&a.metric)?;
    let preset: Preset = a.preset.parse().map_err(|e: String| Failure::user(anyhow!(e)))?;
    let levels = match &a.quantiles {
        Some(q) => QuantileLevels::parse_list(q).map_err(|e| Failure::user(e.into()))?,
        None => QuantileLevels::default(),
    };
    let frequency = a
        .frequency
        .as_deref()
        .map(|f| f.parse::<Frequency>().map_err(|e| Failure::user(anyhow!("{e}"))))
        .transpose()?;
    let map = ColumnMap {
        past_covariates: a.past_covariates.clone(),
        known_covariates: a.known_covariates.clone(),
        static_covariates: a.static_covariates.clone(),
        ..ColumnMap::default()
    };
    let frame = load_frame(&a.data, &a.columns, map, frequency)?;
    let task = TaskConfig {
        prediction_length: a.prediction_length,
        quantile_levels: levels,
        eval_metric: metric,
        time_limit_seconds: a.time_limit,
        preset,
        known_covariate_names: a.known_covariates.clone(),
        num_windows: a.num_windows,
        seed: a.seed,
    };
    let artifact = predictor::fit(&task, &frame)?;
    artifact
        .save(&a.out)
        .map_err(|e| Failure { code: 2, error: anyhow::Error::from(e).context("saving artifact") })?;
    if json {
        let record = json!({
            "command": "fit",
            "out": a.out.display().to_string(),
            "weights": artifact.weights.weights,
            "leaderboard": artifact.leaderboard(),
        });
        writeln!(out, "{record}").map_err(internal)
    } else {
        writeln!(out, "saved predictor to {}", a.out.display()).map_err(internal)?;
        print_leaderboard(artifact.leaderboard(), false, out).map_err(internal)
    }
}

fn cmd_predict(a: PredictArgs, json: bool, out: &mut dyn Write) -> Result<(), Failure> {
    let artifact = load_artifact(&a.model)?;
    let frame = load_frame(&a.data, &a.columns, schema_map(&artifact), Some(artifact.frequency))?;
    let future = match &a.known_covariates_file {
        Some(path) => {
            let map = ColumnMap { target: None, known_covariates: artifact.schema.known.clone(), ..ColumnMap::default() };
            let opts = LoadOptions {
                columns: ColumnMap { id: a.columns.id_column.clone(), timestamp: a.columns.timestamp_column.clone(), ..map },
                frequency: Some(artifact.frequency),
                fill_missing: false,
                fill_gaps: false,
            };
            Some(load_csv(path, &opts).with_context(|| format!("loading {}", path.display())).map_err(Failure::user)?)
        }
        None => None,
    };
    let forecast = artifact.predict(&frame, future.as_ref())?;
    let file = File::create(&a.out).with_context(|| format!("creating {}", a.out.display())).map_err(Failure::user)?;
    write_forecast_csv(&forecast, BufWriter::new(file)).map_err(|e| Failure { code: 2, error: e })?;
    let rows = forecast.len() * forecast.horizon();
    if json {
        writeln!(out, "{}", json!({ "command": "predict", "out": a.out.display().to_string(), "series": forecast.len(), "rows": rows }))
            .map_err(internal)
    } else {
        writeln!(out, "wrote {rows} rows for {} series to {}", forecast.len(), a.out.display()).map_err(internal)
    }
}

fn cmd_evaluate(a: EvaluateArgs, json: bool, out: &mut dyn Write) -> Result<(), Failure> {
    let artifact = load_artifact(&a.model)?;
    let metric = match &a.metric {
        Some(m) => parse_metric(m)?,
        None => artifact.task.eval_metric,
    };
    let frame = load_frame(&a.data, &a.columns, schema_map(&artifact), Some(artifact.frequency))?;
    let value = artifact.evaluate(&frame, Some(metric))?;
    if json {
        writeln!(out, "{}", json!({ "command": "evaluate", "metric": metric.to_string(), "value": value })).map_err(internal)
    } else {
        writeln!(out, "metric={metric} value={value}").map_err(internal)
    }
}

fn print_leaderboard(rows: &[LeaderboardRow], json: bool, out: &mut dyn Write) -> io::Result<()> {
    if json {
        return writeln!(out, "{}", json!({ "command": "leaderboard", "leaderboard": rows }));
    }
    writeln!(out, "{:<24} {:>12} {:>10} {:>10} {:>8} {:>8}", "model", "score", "fit_s", "predict_s", "weight", "status")?;
    for r in rows {
        let score = r.score.map(format_g).unwrap_or_default();
        writeln!(
            out,
            "{:<24} {:>12} {:>10.3} {:>10.3} {:>8.3} {:>8}",
            r.model,
            score,
            r.fit_seconds,
            r.predict_seconds,
            r.weight,
            r.status.label()
        )?;
    }
    Ok(())
}

/// Write forecasts as `item_id,timestamp,mean,<levels...>` with values at
/// six significant digits.
pub fn write_forecast_csv<W: Write>(forecast: &ForecastFrame, writer: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["item_id".to_string(), "timestamp".to_string(), "mean".to_string()];
    header.extend(forecast.levels.iter().map(QuantileLevels::label));
    w.write_record(&header)?;
    for (id, ts, mean, quantiles) in forecast.rows() {
        let mut rec = vec![id.to_string(), format_timestamp(forecast.frequency, ts), format_g(mean)];
        rec.extend(quantiles.into_iter().map(format_g));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Format with six significant digits, dropping trailing zeros, like C's
/// `%g`.
pub fn format_g(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-5..6).contains(&exp) {
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{mantissa}e{exp}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
