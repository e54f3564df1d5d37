//! `cvacc` command line: fit, evaluate, invert, plan, simulate.
//!
//! Conventions: stdout carries machine-readable results only,
//! diagnostics go to stderr, and exit codes are 0 (success),
//! 2 (validation/usage), 1 (internal). All floating-point output uses
//! 12 significant digits so golden files are stable across platforms.

use clap::{Parser, Subcommand, ValueEnum};
use cvacc::fit::{self, FitConfig, FitPoint};
use cvacc::ingest::{self, ConstantsEntry, KnobKind, MeasurementSeries, Task};
use cvacc::metrics::{self, ConfusionCounts, SeriesPair};
use cvacc::model::{clamp_error, DEFAULT_BITRATE_SEARCH_MAX, QP_MAX};
use cvacc::planner;
use cvacc::sim::{self, EncoderSurrogate, SurrogateBand, SurrogateEntry};
use cvacc::{BitrateUnit, BrmodaConstants, ModelConstants, ModelKind, Resolution};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cvacc", version, about = "Accuracy models for compressed camera streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Qrmoda,
    Brmoda,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> ModelKind {
        match m {
            ModelArg::Qrmoda => ModelKind::Qrmoda,
            ModelArg::Brmoda => ModelKind::Brmoda,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TaskArg {
    Detection,
    Recognition,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Detection => Task::Detection,
            TaskArg::Recognition => Task::Recognition,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum UnitArg {
    Bps,
    Kbps,
    Mbps,
}

impl From<UnitArg> for BitrateUnit {
    fn from(u: UnitArg) -> BitrateUnit {
        match u {
            UnitArg::Bps => BitrateUnit::Bps,
            UnitArg::Kbps => BitrateUnit::Kbps,
            UnitArg::Mbps => BitrateUnit::Mbps,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a model at one setting; prints raw and clamped error.
    Predict {
        /// Constants JSON file.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: Option<ModelArg>,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        task: Option<TaskArg>,
        #[arg(long)]
        width: u32,
        #[arg(long)]
        height: u32,
        /// Quantization parameter (QRMODA knob).
        #[arg(long, conflicts_with = "bitrate")]
        qp: Option<f64>,
        /// Actual bitrate (BRMODA knob), in --unit if given.
        #[arg(long)]
        bitrate: Option<f64>,
        /// Unit of --bitrate; converted to the constants' unit when both
        /// are known.
        #[arg(long)]
        unit: Option<UnitArg>,
    },
    /// Calibrate constants from a measurements CSV.
    Fit {
        /// Measurements CSV file.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: ModelArg,
        #[arg(long)]
        seed: u64,
        /// Constants JSON destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Only fit series from this dataset.
        #[arg(long)]
        dataset: Option<String>,
        /// Only fit series for this task.
        #[arg(long)]
        task: Option<TaskArg>,
    },
    /// Invert a model: largest Qp or required bitrate for a target error.
    Invert {
        /// Constants JSON file.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: Option<ModelArg>,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        task: Option<TaskArg>,
        #[arg(long)]
        width: u32,
        #[arg(long)]
        height: u32,
        #[arg(long)]
        target_error: f64,
        /// Bitrate search ceiling (BRMODA only), in the constants' unit.
        #[arg(long)]
        max_bitrate: Option<f64>,
        /// Unit for the printed bitrate, when the constants declare one.
        #[arg(long)]
        unit: Option<UnitArg>,
    },
    /// Allocate a bandwidth budget across cameras.
    Plan {
        /// Plan instance JSON (budget + camera profiles).
        #[arg(long = "in")]
        input: PathBuf,
        /// Plan JSON destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Knapsack bitrate quantum; defaults to budget / 1e4.
        #[arg(long)]
        quantum: Option<f64>,
    },
    /// Run the closed-loop calibration simulation.
    Simulate {
        /// Simulation config JSON.
        #[arg(long = "in")]
        input: PathBuf,
        /// Master seed; overrides the config's seed.
        #[arg(long)]
        seed: u64,
        /// Report JSON destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Confusion-count metrics, or R² of an observed/predicted file.
    Metrics {
        #[arg(long, requires = "fn_", requires = "fp")]
        tp: Option<u64>,
        #[arg(long = "fn")]
        fn_: Option<u64>,
        #[arg(long)]
        fp: Option<u64>,
        /// CSV of observed,predicted pairs; computes R² instead.
        #[arg(long = "in", conflicts_with_all = ["tp", "fn_", "fp"])]
        input: Option<PathBuf>,
    },
    /// Per-resolution (knob, observed, predicted) tables for plotting.
    PlotData {
        /// Measurements CSV file.
        #[arg(long = "in")]
        input: PathBuf,
        /// Constants JSON file supplying the predictions.
        #[arg(long)]
        constants: PathBuf,
        #[arg(long)]
        model: ModelArg,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        task: Option<TaskArg>,
        /// Table destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    /// Bad input or arguments: exit 2.
    Validation(String),
    /// Unexpected environment failure (e.g. cannot write output): exit 1.
    Internal(String),
}

macro_rules! validation_from {
    ($($ty:ty),* $(,)?) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Validation(e.to_string())
            }
        }
    )*};
}

validation_from!(
    cvacc::model::ModelError,
    cvacc::ingest::IngestError,
    cvacc::fit::FitError,
    cvacc::planner::PlanError,
    cvacc::sim::SimError,
    cvacc::metrics::MetricsError,
    serde_json::Error,
    std::io::Error,
);

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Write to `--out` when given, stdout otherwise.
fn emit(out: Option<&Path>, text: &str) -> Result<bool, CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, text)
                .map_err(|e| CliError::Internal(format!("writing {}: {e}", path.display())))?;
            Ok(true)
        }
        None => {
            print!("{text}");
            Ok(false)
        }
    }
}

/// Pick exactly one constants entry matching the selectors.
fn select_entry(
    path: &Path,
    model: Option<ModelKind>,
    dataset: Option<&str>,
    task: Option<Task>,
) -> Result<ConstantsEntry, CliError> {
    let entries = ingest::load_constants(path)?;
    let mut matches: Vec<ConstantsEntry> = entries
        .into_iter()
        .filter(|e| {
            model.is_none_or(|m| e.constants.kind() == m)
                && dataset.is_none_or(|d| e.dataset.as_deref() == Some(d))
                && task.is_none_or(|t| e.task == Some(t))
        })
        .collect();
    match matches.len() {
        0 => Err(CliError::Validation(format!(
            "no constants entry in {} matches the given selectors",
            path.display()
        ))),
        1 => Ok(matches.pop().expect("len checked")),
        n => Err(CliError::Validation(format!(
            "{n} constants entries in {} match; disambiguate with --model/--dataset/--task",
            path.display()
        ))),
    }
}

/// Convert a user-supplied bitrate into the constants' unit.
fn to_model_unit(value: f64, user: Option<BitrateUnit>, model: Option<BitrateUnit>) -> f64 {
    match (user, model) {
        (Some(u), Some(m)) => value * u.factor_to(m),
        _ => value,
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Predict {
            input,
            model,
            dataset,
            task,
            width,
            height,
            qp,
            bitrate,
            unit,
        } => {
            let entry = select_entry(
                &input,
                model.map(Into::into),
                dataset.as_deref(),
                task.map(Into::into),
            )?;
            let res = Resolution::new(width, height)?;
            let raw = match (entry.constants, qp, bitrate) {
                (ModelConstants::Qrmoda(k), Some(qp), None) => {
                    if !(0.0..=f64::from(QP_MAX)).contains(&qp) {
                        return Err(CliError::Validation(format!(
                            "qp {qp} out of range [0, {QP_MAX}]"
                        )));
                    }
                    k.eval(res, qp)?
                }
                (ModelConstants::Brmoda(k), None, Some(r)) => {
                    let r = to_model_unit(r, unit.map(Into::into), k.bitrate_unit);
                    k.eval(res, r)?
                }
                (ModelConstants::Qrmoda(_), _, _) => {
                    return Err(CliError::Validation(
                        "selected qrmoda constants require --qp".into(),
                    ))
                }
                (ModelConstants::Brmoda(_), _, _) => {
                    return Err(CliError::Validation(
                        "selected brmoda constants require --bitrate".into(),
                    ))
                }
            };
            println!("raw,clamped");
            println!("{raw:.11e},{:.11e}", clamp_error(raw));
            Ok(())
        }

        Command::Fit {
            input,
            model,
            seed,
            out,
            dataset,
            task,
        } => {
            let kind: ModelKind = model.into();
            let wanted_knob = match kind {
                ModelKind::Qrmoda => KnobKind::Qp,
                ModelKind::Brmoda => KnobKind::Bitrate,
            };
            let task: Option<Task> = task.map(Into::into);
            let series: Vec<MeasurementSeries> = ingest::parse_measurements_path(&input)?
                .into_iter()
                .filter(|s| {
                    s.knob_kind == wanted_knob
                        && dataset.as_deref().is_none_or(|d| s.dataset_id == d)
                        && task.is_none_or(|t| s.task == t)
                })
                .collect();
            if series.is_empty() {
                return Err(CliError::Validation(format!(
                    "{} contains no {wanted_knob} series matching the selectors",
                    input.display()
                )));
            }
            let cfg = FitConfig::new(seed);
            let mut entries = Vec::new();
            let mut summary = String::from("dataset,task,r2,ss_res,converged,n_points\n");
            for s in &series {
                let points = ingest::to_fit_points(s)?;
                let result = match kind {
                    ModelKind::Qrmoda => fit::fit_qrmoda(&points, &cfg)?,
                    ModelKind::Brmoda => fit::fit_brmoda(&points, s.unit, &cfg)?,
                };
                summary.push_str(&format!(
                    "{},{},{:.11e},{:.11e},{},{}\n",
                    s.dataset_id,
                    s.task,
                    result.r2,
                    result.ss_res,
                    result.converged,
                    points.len()
                ));
                entries.push(result.to_entry(
                    Some(s.dataset_id.clone()),
                    Some(s.task),
                    Some("fit".to_string()),
                ));
            }
            let json = ingest::constants_to_string(&entries)?;
            if emit(out.as_deref(), &json)? {
                print!("{summary}");
            }
            Ok(())
        }

        Command::Invert {
            input,
            model,
            dataset,
            task,
            width,
            height,
            target_error,
            max_bitrate,
            unit,
        } => {
            let entry = select_entry(
                &input,
                model.map(Into::into),
                dataset.as_deref(),
                task.map(Into::into),
            )?;
            let res = Resolution::new(width, height)?;
            match entry.constants {
                ModelConstants::Qrmoda(k) => {
                    println!("qp");
                    match k.max_qp_for_error(res, target_error)? {
                        Some(qp) => println!("{qp}"),
                        None => println!("none"),
                    }
                }
                ModelConstants::Brmoda(k) => {
                    let r_max = max_bitrate.unwrap_or(DEFAULT_BITRATE_SEARCH_MAX);
                    println!("bitrate");
                    match k.required_bitrate(res, target_error, r_max)? {
                        Some(r) => {
                            let r = to_model_unit(r, k.bitrate_unit, unit.map(Into::into));
                            println!("{r:.11e}");
                        }
                        None => println!("none"),
                    }
                }
            }
            Ok(())
        }

        Command::Plan {
            input,
            out,
            quantum,
        } => {
            let text = std::fs::read_to_string(&input)?;
            let instance: PlanInput = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", input.display())))?;
            let mut cameras = Vec::new();
            for cam in &instance.cameras {
                cameras.push(cam.to_options()?);
            }
            let quantum = quantum
                .or(instance.quantum)
                .unwrap_or(instance.budget / 1e4);
            let plan = planner::plan_dp(&cameras, instance.budget, quantum)?;
            let json = format!("{}\n", serde_json::to_string_pretty(&plan)?);
            if emit(out.as_deref(), &json)? {
                println!("objective,total_bitrate,budget,feasible");
                println!(
                    "{:.11e},{:.11e},{:.11e},{}",
                    plan.objective, plan.total_bitrate, plan.budget, plan.feasible
                );
            }
            Ok(())
        }

        Command::Simulate { input, seed, out } => {
            let text = std::fs::read_to_string(&input)?;
            let mut config: sim::SimConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", input.display())))?;
            config.seed = seed;
            let report = sim::run_calibration_loop(&config)?;
            let json = format!("{}\n", serde_json::to_string_pretty(&report)?);
            if emit(out.as_deref(), &json)? {
                print!("{}", sim::compare_baselines(&report));
            }
            Ok(())
        }

        Command::Metrics { tp, fn_, fp, input } => {
            if let Some(path) = input {
                let (observed, predicted) = read_pairs(&path)?;
                let r2 = metrics::r_squared(&SeriesPair::new(observed, predicted)?)?;
                println!("r2");
                println!("{r2:.11e}");
                return Ok(());
            }
            let (Some(tp), Some(fn_), Some(fp)) = (tp, fn_, fp) else {
                return Err(CliError::Validation(
                    "provide --tp/--fn/--fp counts, or --in for R²".into(),
                ));
            };
            let c = ConfusionCounts::new(tp, fn_, fp);
            println!("recall,recall_error,precision,f1");
            println!(
                "{:.11e},{:.11e},{:.11e},{:.11e}",
                metrics::recall(c)?,
                metrics::recall_error(c)?,
                metrics::precision(c)?,
                metrics::f1(c)?
            );
            Ok(())
        }

        Command::PlotData {
            input,
            constants,
            model,
            dataset,
            task,
            out,
        } => {
            let kind: ModelKind = model.into();
            let task: Option<Task> = task.map(Into::into);
            let entry = select_entry(&constants, Some(kind), dataset.as_deref(), task)?;
            let wanted_knob = match kind {
                ModelKind::Qrmoda => KnobKind::Qp,
                ModelKind::Brmoda => KnobKind::Bitrate,
            };
            let series: Vec<MeasurementSeries> = ingest::parse_measurements_path(&input)?
                .into_iter()
                .filter(|s| {
                    s.knob_kind == wanted_knob
                        && dataset.as_deref().is_none_or(|d| s.dataset_id == d)
                        && task.is_none_or(|t| s.task == t)
                })
                .collect();
            let [s] = series.as_slice() else {
                return Err(CliError::Validation(format!(
                    "expected exactly one matching {wanted_knob} series in {}, found {}",
                    input.display(),
                    series.len()
                )));
            };
            let table = plot_table(s, &entry.constants)?;
            emit(out.as_deref(), &table)?;
            Ok(())
        }
    }
}

/// Observed-vs-predicted table text for one measurement series.
fn plot_table(
    series: &MeasurementSeries,
    constants: &ModelConstants,
) -> Result<String, CliError> {
    let mut grouped: BTreeMap<Resolution, Vec<(f64, f64)>> = BTreeMap::new();
    for rec in &series.records {
        grouped
            .entry(rec.resolution)
            .or_default()
            .push((rec.knob_value, rec.error()?));
    }
    let mut out = format!("# {}\n# knob,observed,predicted\n", series.label());
    for (res, mut rows) in grouped {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.push_str(&format!("# resolution {res}\n"));
        for (knob, observed) in rows {
            let predicted = fit::predict(
                constants,
                &FitPoint {
                    resolution: res,
                    knob,
                    observed,
                },
            )?;
            out.push_str(&format!("{knob:.11e},{observed:.11e},{predicted:.11e}\n"));
        }
    }
    Ok(out)
}

/// Read an observed,predicted CSV (header optional).
fn read_pairs(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut observed = Vec::new();
    let mut predicted = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if i == 0 && line.chars().any(|c| c.is_ascii_alphabetic()) {
            continue; // header
        }
        let mut parts = line.split(',');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(CliError::Validation(format!(
                "{}: line {} must have two comma-separated values",
                path.display(),
                i + 1
            )));
        };
        observed.push(a.trim().parse::<f64>().map_err(|e| {
            CliError::Validation(format!("{}: line {}: {e}", path.display(), i + 1))
        })?);
        predicted.push(b.trim().parse::<f64>().map_err(|e| {
            CliError::Validation(format!("{}: line {}: {e}", path.display(), i + 1))
        })?);
    }
    Ok((observed, predicted))
}

/// JSON instance for the `plan` subcommand.
#[derive(Deserialize)]
struct PlanInput {
    budget: f64,
    #[serde(default)]
    quantum: Option<f64>,
    cameras: Vec<PlanCamera>,
}

#[derive(Deserialize)]
struct PlanCamera {
    camera_id: String,
    #[serde(default = "default_weight")]
    weight: f64,
    constants: BrmodaConstants,
    resolutions: Vec<[u32; 2]>,
    target_bitrates: Vec<f64>,
    /// Optional encoder bands; resolutions not listed map targets 1:1.
    #[serde(default)]
    surrogate: Vec<SurrogateEntry>,
}

fn default_weight() -> f64 {
    1.0
}

impl PlanCamera {
    fn to_options(&self) -> Result<planner::CameraOptions, CliError> {
        let resolutions = self
            .resolutions
            .iter()
            .map(|&[w, h]| Resolution::new(w, h))
            .collect::<Result<Vec<_>, _>>()?;
        let mut bands = BTreeMap::new();
        for entry in &self.surrogate {
            bands.insert(Resolution::new(entry.width, entry.height)?, entry.band);
        }
        let surrogate = EncoderSurrogate::new(bands, SurrogateBand::default(), 0.0)?;
        let profile = planner::CameraProfile {
            camera_id: self.camera_id.clone(),
            brmoda: self.constants,
            qrmoda: None,
            resolutions,
            target_bitrates: self.target_bitrates.clone(),
            weight: self.weight,
        };
        Ok(planner::enumerate_options(&profile, &surrogate)?.camera)
    }
}
