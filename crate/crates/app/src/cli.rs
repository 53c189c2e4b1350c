//! `democirc` command line.
//!
//! Exit codes: 0 success, 1 user error (bad flags, unreadable or invalid
//! input), 2 internal error.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use democirc_core::data::{
    encode_record, generate_synthetic, load_csv_path, split_dataset, summarize, write_csv_path, Dataset,
    GeneratorConfig, Output,
};
use democirc_core::evaluate::{
    copeland_csv, copeland_rank, copeland_table, evaluate_model, load_metric_table, metric_table, metrics_csv,
    ComparisonMatrix, Metric, MetricReport, Scope,
};
use democirc_core::explain::{bar_chart, global_importance, BackgroundSet, Method, DEFAULT_BACKGROUND_SIZE};
use democirc_core::hpo::{
    history_csv, load_search_spaces, params_from_assignment, tune_with, Assignment, ParamValue, SearchSpace,
    TuneConfig, Validation,
};
use democirc_core::learners::{load_model_path, model_fingerprint, save_model_path, train, LearnerKind, LearnerParams, TrainedModel};

use crate::api::{self, ApiError, PredictRequest};
use crate::building::BuildingModelFile;
use crate::service::{self, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "democirc", version, about = "Demolition-waste circularity prediction")]
pub struct Cli {
    /// Seed for every random choice (data generation, splits, training, tuning).
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic labelled dataset as CSV.
    GenData {
        #[arg(long, default_value_t = 2280)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Lognormal noise scale on the targets.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Descriptive statistics of a dataset.
    Summarize {
        data: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Write a seeded train/test split of a dataset.
    Split {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        fraction: f64,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
    },
    /// Train one learner and save it.
    Train {
        #[arg(long)]
        algo: LearnerKind,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Hyperparameter override `name=value`, repeatable.
        #[arg(long = "param", value_name = "NAME=VALUE")]
        params: Vec<String>,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Bayesian hyperparameter search.
    Tune {
        #[arg(long)]
        algo: LearnerKind,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        budget: usize,
        /// Search-space TOML; defaults to the bundled spaces.
        #[arg(long)]
        space: Option<PathBuf>,
        /// Score trials by k-fold cross-validation instead of an 80/20 holdout.
        #[arg(long)]
        kfold: Option<usize>,
        #[arg(long)]
        patience: Option<usize>,
        /// Trial log as CSV.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Retrain with the best parameters and save the model here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Error metrics of saved models on a labelled dataset.
    Eval {
        #[arg(long = "model", required = true, num_args = 1..)]
        models: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Also report each material separately.
        #[arg(long)]
        per_output: bool,
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Copeland ranking from a metrics table or from saved models.
    Rank {
        /// CSV with a `model` column and one column per metric.
        #[arg(long, conflicts_with_all = ["models", "data"])]
        fixtures: Option<PathBuf>,
        #[arg(long = "model", num_args = 1..)]
        models: Vec<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Comma-separated subset of rmse, mae, mape, si, u95, r2, nse.
        #[arg(long)]
        metrics: Option<String>,
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Shapley attributions for one building, or global importance over a dataset.
    Explain {
        #[arg(long)]
        model: PathBuf,
        /// Labelled CSV the background rows are sampled from.
        #[arg(long)]
        background: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BACKGROUND_SIZE)]
        bg_size: usize,
        #[command(flatten)]
        input: InputArgs,
        /// Explain every row of this CSV and report mean |phi|.
        #[arg(long, conflicts_with_all = ["gfa", "volume", "levels", "building"])]
        data: Option<PathBuf>,
        /// Limit the number of rows explained from `--data`.
        #[arg(long)]
        rows: Option<usize>,
        /// Permutation estimate with this many permutations instead of exact enumeration.
        #[arg(long)]
        sampled: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Predict the three quantities for one building.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        background: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_BACKGROUND_SIZE)]
        bg_size: usize,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Append one line per request to this file.
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Split the data with this train fraction: fitting commands use the
    /// train part, scoring commands the test part.
    #[arg(long)]
    pub split: Option<f64>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub gfa: Option<f64>,
    #[arg(long)]
    pub volume: Option<f64>,
    #[arg(long)]
    pub levels: Option<u32>,
    /// Building file to derive gfa, volume and levels from.
    #[arg(long)]
    pub building: Option<PathBuf>,
    #[arg(long)]
    pub frame: Option<String>,
    #[arg(long)]
    pub usage: Option<String>,
}

#[derive(Debug)]
pub enum CliError {
    User(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::User(m) => write!(f, "error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<ApiError> for CliError {
    fn from(e: ApiError) -> Self {
        if e.status >= 500 && e.code != "no_background" {
            CliError::Internal(e.to_string())
        } else {
            CliError::User(e.to_string())
        }
    }
}

fn user(e: impl std::fmt::Display) -> CliError {
    CliError::User(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

/// Parses `args` (including the program name) and runs the command, writing
/// results to `out`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(internal)?;
    if !text.ends_with('\n') {
        out.write_all(b"\n").map_err(internal)?;
    }
    Ok(())
}

fn emit_json<T: serde::Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    emit(out, &serde_json::to_string_pretty(value).map_err(internal)?)
}

fn load_data(path: &Path) -> Result<Dataset, CliError> {
    load_csv_path(path).map_err(|e| user(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<TrainedModel, CliError> {
    load_model_path(path).map_err(|e| user(format!("{}: {e}", path.display())))
}

/// The part of `data` a fitting (`true`) or scoring (`false`) command uses.
fn portion(data: Dataset, split: &SplitArgs, seed: u64, fitting: bool) -> Result<Dataset, CliError> {
    match split.split {
        None => Ok(data),
        Some(f) => {
            let (train, test) = split_dataset(&data, f, seed).map_err(user)?;
            Ok(if fitting { train } else { test })
        }
    }
}

fn parse_param(raw: &str) -> Result<(String, ParamValue), CliError> {
    let (name, value) = raw
        .split_once('=')
        .ok_or_else(|| user(format!("--param expects NAME=VALUE, got `{raw}`")))?;
    let value = if let Ok(i) = value.parse::<i64>() {
        ParamValue::Int(i)
    } else if let Ok(f) = value.parse::<f64>() {
        ParamValue::Real(f)
    } else {
        ParamValue::Cat(value.to_string())
    };
    Ok((name.trim().to_string(), value))
}

fn learner_params(kind: LearnerKind, raw: &[String]) -> Result<LearnerParams, CliError> {
    let assignment = Assignment(raw.iter().map(|r| parse_param(r)).collect::<Result<_, _>>()?);
    params_from_assignment(kind, &assignment).map_err(user)
}

fn predict_request(input: &InputArgs) -> Result<PredictRequest, CliError> {
    let building = input
        .building
        .as_ref()
        .map(BuildingModelFile::from_path)
        .transpose()
        .map_err(user)?;
    Ok(PredictRequest {
        gfa: input.gfa,
        volume: input.volume,
        levels: input.levels,
        building,
        frame_type: input.frame.clone(),
        usage_type: input.usage.clone(),
    })
}

fn model_name(path: &Path, model: &TrainedModel, all: &[PathBuf]) -> String {
    let display = model.kind().display_name().to_string();
    let clashes = all.len() > 1 && all.iter().filter(|p| p.as_path() != path).any(|p| {
        load_model_path(p).map(|m| m.kind() == model.kind()).unwrap_or(false)
    });
    if clashes {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or(display)
    } else {
        display
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let seed = cli.seed;
    match cli.command {
        Command::GenData { n, out: path, noise } => {
            let mut config = GeneratorConfig { n, seed, ..GeneratorConfig::default() };
            if let Some(noise) = noise {
                config.noise_sigma = noise;
            }
            let data = generate_synthetic(&config).map_err(user)?;
            write_csv_path(&data, &path).map_err(user)?;
            emit(out, &format!("wrote {} rows to {}", data.len(), path.display()))
        }
        Command::Summarize { data, json } => {
            let stats = summarize(&load_data(&data)?).map_err(user)?;
            if json {
                emit_json(out, &stats)
            } else {
                emit(out, &stats.to_string())
            }
        }
        Command::Split { data, fraction, train_out, test_out } => {
            let (train, test) = split_dataset(&load_data(&data)?, fraction, seed).map_err(user)?;
            write_csv_path(&train, &train_out).map_err(user)?;
            write_csv_path(&test, &test_out).map_err(user)?;
            emit(out, &format!("train {} rows, test {} rows", train.len(), test.len()))
        }
        Command::Train { algo, data, out: path, params, split } => {
            let data = portion(load_data(&data)?, &split, seed, true)?;
            let params = learner_params(algo, &params)?;
            let model = train(&data, &params, seed).map_err(user)?;
            save_model_path(&model, &path).map_err(user)?;
            emit(
                out,
                &format!(
                    "trained {} on {} rows, model {} saved to {}",
                    algo.display_name(),
                    data.len(),
                    model_fingerprint(&model),
                    path.display()
                ),
            )
        }
        Command::Tune { algo, data, budget, space, kfold, patience, history, out: path, split } => {
            let full = load_data(&data)?;
            let tuning = portion(full.clone(), &split, seed, true)?;
            let space = match space {
                Some(p) => load_search_spaces(&p)
                    .map_err(user)?
                    .remove(&algo)
                    .ok_or_else(|| user(format!("{} has no [[{}]] space", p.display(), algo.short_name())))?,
                None => SearchSpace::for_learner(algo),
            };
            let mut cfg = TuneConfig::default();
            if let Some(k) = kfold {
                cfg.validation = Validation::KFold { folds: k };
            }
            if let Some(p) = patience {
                cfg.patience = p;
            }
            let result = tune_with(algo, &space, &tuning, budget, seed, &cfg).map_err(user)?;
            if let Some(h) = &history {
                std::fs::write(h, history_csv(&space, &result.history)).map_err(user)?;
            }
            let failed = result.history.iter().filter(|t| !t.is_ok()).count();
            let mut text = format!(
                "{} after {} trials ({} failed, stopped by {:?})\nbest validation rmse {}\nbest {}\n",
                algo.display_name(),
                result.history.len(),
                failed,
                result.stop,
                result.best.objective,
                result.best.params
            );
            if path.is_some() || split.split.is_some() {
                let params = params_from_assignment(algo, &result.best.params).map_err(internal)?;
                let model = train(&tuning, &params, seed).map_err(user)?;
                if split.split.is_some() {
                    let test = portion(full, &split, seed, false)?;
                    let r = evaluate_model(&model, &test, Scope::Aggregate).map_err(user)?;
                    text.push_str(&format!("test rmse {} nse {} ({} rows)\n", r.rmse, r.nse, test.len()));
                }
                if let Some(p) = &path {
                    save_model_path(&model, p).map_err(user)?;
                    text.push_str(&format!("model {} saved to {}\n", model_fingerprint(&model), p.display()));
                }
            }
            emit(out, &text)
        }
        Command::Eval { models, data, per_output, csv, split } => {
            let data = portion(load_data(&data)?, &split, seed, false)?;
            let mut names = Vec::new();
            let mut reports = Vec::new();
            for path in &models {
                let model = load_model(path)?;
                let name = model_name(path, &model, &models);
                reports.push(evaluate_model(&model, &data, Scope::Aggregate).map_err(user)?);
                names.push(name.clone());
                if per_output {
                    for o in Output::ALL {
                        reports.push(evaluate_model(&model, &data, Scope::PerOutput(o)).map_err(user)?);
                        names.push(format!("{name}/{}", o.name()));
                    }
                }
            }
            emit(out, &if csv { metrics_csv(&names, &reports) } else { metric_table(&names, &reports) })
        }
        Command::Rank { fixtures, models, data, metrics, csv, split } => {
            let mut matrix = match (fixtures, data) {
                (Some(f), _) => {
                    let file = std::fs::File::open(&f).map_err(|e| user(format!("{}: {e}", f.display())))?;
                    load_metric_table(file).map_err(user)?
                }
                (None, Some(d)) if !models.is_empty() => {
                    let data = portion(load_data(&d)?, &split, seed, false)?;
                    let mut names = Vec::new();
                    let mut reports: Vec<MetricReport> = Vec::new();
                    for path in &models {
                        let model = load_model(path)?;
                        names.push(model_name(path, &model, &models));
                        reports.push(evaluate_model(&model, &data, Scope::Aggregate).map_err(user)?);
                    }
                    ComparisonMatrix::new(names, reports)
                }
                _ => return Err(user("rank needs --fixtures, or --model (two or more) with --data")),
            };
            if let Some(list) = metrics {
                let chosen = list
                    .split(',')
                    .map(|m| Metric::parse(m.trim()).ok_or_else(|| user(format!("unknown metric `{m}`"))))
                    .collect::<Result<Vec<_>, _>>()?;
                matrix = matrix.with_metrics(chosen);
            }
            let result = copeland_rank(&matrix).map_err(user)?;
            emit(out, &if csv { copeland_csv(&result) } else { copeland_table(&result) })
        }
        Command::Explain { model, background, bg_size, input, data, rows, sampled, json } => {
            let model = load_model(&model)?;
            let bg = BackgroundSet::sample(&load_data(&background)?, bg_size, seed).map_err(user)?;
            match data {
                Some(d) => {
                    let mut eval = load_data(&d)?;
                    if let Some(r) = rows {
                        eval = eval.subset(&(0..r.min(eval.len())).collect::<Vec<_>>());
                    }
                    let method = match sampled {
                        Some(n) => Method::Sampled { n_permutations: n, seed },
                        None => Method::Exact,
                    };
                    let x: Vec<Vec<f64>> = eval.records.iter().map(|(r, _)| encode_record(r).0.to_vec()).collect();
                    let gi = global_importance(&model, &x, &bg, method).map_err(user)?;
                    if json {
                        return emit_json(out, &gi);
                    }
                    let mut text = format!("mean |phi| over {} rows\n\n", gi.n_rows);
                    for (name, v) in gi.ranked() {
                        text.push_str(&format!("{name:<24}{v:>14.4}\n"));
                    }
                    text.push_str("\ngrouped\n");
                    text.push_str(&bar_chart(&gi.group_names, &gi.grouped_overall, 40));
                    emit(out, &text)
                }
                None => {
                    if sampled.is_some() {
                        return Err(user("--sampled applies to --data explanations"));
                    }
                    let req = predict_request(&input)?;
                    let fingerprint = model_fingerprint(&model);
                    let e = api::handle_explain(&req, &model, &fingerprint, Some(&bg))?;
                    if json {
                        return emit_json(out, &e);
                    }
                    let mut text = String::new();
                    for o in &e.outputs {
                        let names: Vec<String> = o.grouped.iter().map(|a| a.feature.clone()).collect();
                        let values: Vec<f64> = o.grouped.iter().map(|a| a.phi).collect();
                        text.push_str(&format!(
                            "{}: prediction {} = baseline {} + Σphi (residual {:e})\n",
                            o.output.name(),
                            o.prediction,
                            o.baseline,
                            o.residual
                        ));
                        text.push_str(&bar_chart(&names, &values, 40));
                        text.push('\n');
                    }
                    emit(out, &text)
                }
            }
        }
        Command::Predict { model, input, json } => {
            let model = load_model(&model)?;
            let req = predict_request(&input)?;
            let r = api::handle_predict(&req, &model, &model_fingerprint(&model))?;
            if json {
                emit_json(out, &r)
            } else {
                emit(
                    out,
                    &format!(
                        "recycle_m3  {}\nreuse_m3    {}\nlandfill_m3 {}",
                        r.recycle_m3, r.reuse_m3, r.landfill_m3
                    ),
                )
            }
        }
        Command::Serve { model, background, bg_size, bind, log } => {
            let config = ServiceConfig {
                bind,
                model_path: model,
                background_path: background,
                background_size: bg_size,
                seed,
                request_log: log,
            };
            let runtime = tokio::runtime::Runtime::new().map_err(internal)?;
            runtime.block_on(service::serve(config)).map_err(|e| match e {
                service::ServiceError::Serve(_) => internal(e),
                other => user(other),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_values_take_the_narrowest_type() {
        assert_eq!(parse_param("max_depth=6").unwrap(), ("max_depth".into(), ParamValue::Int(6)));
        assert_eq!(parse_param("subsample=0.5").unwrap(), ("subsample".into(), ParamValue::Real(0.5)));
        assert_eq!(parse_param("weights=distance").unwrap(), ("weights".into(), ParamValue::Cat("distance".into())));
        assert!(parse_param("depth").is_err());
    }

    #[test]
    fn unknown_flags_exit_with_one() {
        let mut sink = Vec::new();
        assert_eq!(run(["democirc", "predict", "--frobnicate"], &mut sink), 1);
        assert_eq!(run(["democirc", "--help"], &mut sink), 0);
    }
}
