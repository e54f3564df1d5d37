//! Measurement-file parsing and constants-file I/O.
//!
//! Measurement records arrive as comma-delimited text produced by
//! external detection/recognition pipelines; constants travel as JSON.
//! Validation is exhaustive per file: every issue is reported with its
//! row (and column where known) instead of failing on the first.

use crate::fit::FitPoint;
use crate::metrics::{self, ConfusionCounts};
use crate::model::{
    BitrateUnit, BrmodaConstants, ModelConstants, QrmodaConstants, Resolution,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

pub const MEASUREMENT_HEADER: &str =
    "dataset,task,width,height,knob_kind,knob_value,unit,tp,fn,fp,observed_error";

/// Tolerance for the counts/observed_error consistency check.
const ERROR_CONSISTENCY_TOL: f64 = 1e-9;

/// Minimum series size for calibration: five free constants per model.
pub const MIN_DISTINCT_KNOBS: usize = 6;
pub const MIN_DISTINCT_RESOLUTIONS: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("measurement file invalid ({} issue(s)):\n{}", .0.len(), format_issues(.0))]
    Invalid(Vec<ParseIssue>),
    #[error("constants entry {index}: {source}")]
    InvalidConstants {
        index: usize,
        source: crate::model::ModelError,
    },
    #[error("constants entry {index}: {message}")]
    MalformedConstants { index: usize, message: String },
    #[error("series {series}: insufficient data for fitting: {reason}")]
    InsufficientData { series: String, reason: String },
    #[error("record {index} in series {series}: {source}")]
    UndefinedRecordError {
        index: usize,
        series: String,
        source: metrics::MetricsError,
    },
}

fn format_issues(issues: &[ParseIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// One validation failure, pinned to its source row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseIssue {
    /// 1-based row number, counting the header as row 1.
    pub row: usize,
    pub column: Option<&'static str>,
    pub message: String,
}

impl fmt::Display for ParseIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.column {
            Some(col) => write!(f, "row {}, column {}: {}", self.row, col, self.message),
            None => write!(f, "row {}: {}", self.row, self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Detection,
    Recognition,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Detection => write!(f, "detection"),
            Task::Recognition => write!(f, "recognition"),
        }
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "detection" => Ok(Task::Detection),
            "recognition" => Ok(Task::Recognition),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnobKind {
    Qp,
    Bitrate,
}

impl fmt::Display for KnobKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KnobKind::Qp => write!(f, "qp"),
            KnobKind::Bitrate => write!(f, "bitrate"),
        }
    }
}

/// One experiment point: a setting plus the observed outcome, as raw
/// confusion counts, a precomputed error, or both (checked consistent).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub dataset_id: String,
    pub task: Task,
    pub resolution: Resolution,
    pub knob_kind: KnobKind,
    pub knob_value: f64,
    pub unit: Option<BitrateUnit>,
    pub counts: Option<ConfusionCounts>,
    pub observed_error: Option<f64>,
}

impl MeasurementRecord {
    /// The record's recall error, from counts when present.
    pub fn error(&self) -> Result<f64, metrics::MetricsError> {
        match (self.counts, self.observed_error) {
            (Some(c), _) => metrics::recall_error(c),
            (None, Some(e)) => Ok(e),
            (None, None) => unreachable!("validated at parse time"),
        }
    }
}

/// Records sharing (dataset, task, knob kind), i.e. one calibration
/// surface.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSeries {
    pub dataset_id: String,
    pub task: Task,
    pub knob_kind: KnobKind,
    pub unit: Option<BitrateUnit>,
    pub records: Vec<MeasurementRecord>,
}

impl MeasurementSeries {
    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.dataset_id, self.task, self.knob_kind)
    }

    pub fn distinct_resolutions(&self) -> Vec<Resolution> {
        let mut v: Vec<_> = self.records.iter().map(|r| r.resolution).collect();
        v.sort_by_key(|r| (r.pixel_count(), r.width(), r.height()));
        v.dedup();
        v
    }

    pub fn distinct_knob_values(&self) -> Vec<f64> {
        let mut v: Vec<_> = self.records.iter().map(|r| r.knob_value).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup_by(|a, b| a.to_bits() == b.to_bits());
        v
    }
}

struct RowCursor<'a> {
    fields: Vec<&'a str>,
    row: usize,
}

impl<'a> RowCursor<'a> {
    fn get(&self, idx: usize) -> &'a str {
        self.fields.get(idx).map(|s| s.trim()).unwrap_or("")
    }
}

const COLUMNS: [&str; 11] = [
    "dataset",
    "task",
    "width",
    "height",
    "knob_kind",
    "knob_value",
    "unit",
    "tp",
    "fn",
    "fp",
    "observed_error",
];

/// Parse and validate a measurement file, grouping records into series.
///
/// All validation failures are collected and reported together; any
/// hard error fails the whole file.
pub fn parse_measurements_str(input: &str) -> Result<Vec<MeasurementSeries>, IngestError> {
    let mut issues = Vec::new();
    let mut lines = input.lines().enumerate();

    match lines.next() {
        Some((_, header)) if header.trim() == MEASUREMENT_HEADER => {}
        Some((_, header)) => {
            return Err(IngestError::Invalid(vec![ParseIssue {
                row: 1,
                column: None,
                message: format!(
                    "bad header {:?}, expected {:?}",
                    header.trim(),
                    MEASUREMENT_HEADER
                ),
            }]));
        }
        None => {
            return Err(IngestError::Invalid(vec![ParseIssue {
                row: 1,
                column: None,
                message: "empty file: header row required".into(),
            }]));
        }
    }

    let mut records: Vec<(usize, MeasurementRecord)> = Vec::new();
    for (line_idx, line) in lines {
        let row = line_idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cursor = RowCursor {
            fields: line.split(',').collect(),
            row,
        };
        if cursor.fields.len() != COLUMNS.len() {
            issues.push(ParseIssue {
                row,
                column: None,
                message: format!(
                    "expected {} fields, found {}",
                    COLUMNS.len(),
                    cursor.fields.len()
                ),
            });
            continue;
        }
        if let Some(record) = parse_row(&cursor, &mut issues) {
            records.push((row, record));
        }
    }

    // Group into series; the grouping is a partition of the valid rows.
    let mut groups: BTreeMap<(String, Task, KnobKind), Vec<(usize, MeasurementRecord)>> =
        BTreeMap::new();
    for (row, rec) in records {
        groups
            .entry((rec.dataset_id.clone(), rec.task, rec.knob_kind))
            .or_default()
            .push((row, rec));
    }

    let mut series_out = Vec::new();
    for ((dataset_id, task, knob_kind), mut members) in groups {
        // Homogeneous unit within a series.
        let units: Vec<_> = members.iter().map(|(_, r)| r.unit).collect();
        if let Some(first) = units.first() {
            for ((row, _), unit) in members.iter().zip(&units) {
                if unit != first {
                    issues.push(ParseIssue {
                        row: *row,
                        column: Some("unit"),
                        message: format!(
                            "unit {:?} differs from the series' first unit {:?}",
                            unit.map(|u| u.to_string()),
                            first.map(|u| u.to_string())
                        ),
                    });
                }
            }
        }
        // Duplicate (resolution, knob_value) points break grid integrity.
        let mut seen: BTreeMap<(u32, u32, u64), usize> = BTreeMap::new();
        for (row, rec) in &members {
            let key = (
                rec.resolution.width(),
                rec.resolution.height(),
                rec.knob_value.to_bits(),
            );
            if let Some(first_row) = seen.get(&key) {
                issues.push(ParseIssue {
                    row: *row,
                    column: None,
                    message: format!(
                        "duplicate point ({}, knob {}) first seen at row {first_row}",
                        rec.resolution, rec.knob_value
                    ),
                });
            } else {
                seen.insert(key, *row);
            }
        }
        // Deterministic ordering: resolution-major, knob ascending.
        members.sort_by(|(_, a), (_, b)| {
            (
                a.resolution.pixel_count(),
                a.resolution.width(),
                a.resolution.height(),
            )
                .cmp(&(
                    b.resolution.pixel_count(),
                    b.resolution.width(),
                    b.resolution.height(),
                ))
                .then(a.knob_value.total_cmp(&b.knob_value))
        });
        let unit = members.first().and_then(|(_, r)| r.unit);
        series_out.push(MeasurementSeries {
            dataset_id,
            task,
            knob_kind,
            unit,
            records: members.into_iter().map(|(_, r)| r).collect(),
        });
    }

    if issues.is_empty() {
        Ok(series_out)
    } else {
        Err(IngestError::Invalid(issues))
    }
}

fn parse_row(cursor: &RowCursor<'_>, issues: &mut Vec<ParseIssue>) -> Option<MeasurementRecord> {
    let row = cursor.row;
    let mut bad = false;
    let issue = |column: &'static str, message: String| ParseIssue {
        row,
        column: Some(column),
        message,
    };

    let dataset_id = cursor.get(0).to_string();
    if dataset_id.is_empty() {
        issues.push(issue("dataset", "dataset id must be non-empty".into()));
        bad = true;
    }

    let task = match cursor.get(1).parse::<Task>() {
        Ok(t) => Some(t),
        Err(e) => {
            issues.push(issue("task", e));
            bad = true;
            None
        }
    };

    let mut dim = |idx: usize, column: &'static str| match cursor.get(idx).parse::<u32>() {
        Ok(v) if v >= 1 => Some(v),
        Ok(v) => {
            issues.push(ParseIssue {
                row,
                column: Some(column),
                message: format!("{column} must be >= 1, got {v}"),
            });
            None
        }
        Err(e) => {
            issues.push(ParseIssue {
                row,
                column: Some(column),
                message: format!("bad {column}: {e}"),
            });
            None
        }
    };
    let width = dim(2, "width");
    let height = dim(3, "height");
    bad |= width.is_none() || height.is_none();

    let knob_kind = match cursor.get(4) {
        "qp" => Some(KnobKind::Qp),
        "bitrate" => Some(KnobKind::Bitrate),
        other => {
            issues.push(issue(
                "knob_kind",
                format!("must be \"qp\" or \"bitrate\", got {other:?}"),
            ));
            bad = true;
            None
        }
    };

    let knob_value = match cursor.get(5).parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        Ok(v) => {
            issues.push(issue("knob_value", format!("must be finite, got {v}")));
            bad = true;
            None
        }
        Err(e) => {
            issues.push(issue("knob_value", format!("bad number: {e}")));
            bad = true;
            None
        }
    };
    if let (Some(kind), Some(v)) = (knob_kind, knob_value) {
        match kind {
            KnobKind::Qp => {
                if !(0.0..=51.0).contains(&v) {
                    issues.push(issue("knob_value", format!("qp must be in [0, 51], got {v}")));
                    bad = true;
                }
            }
            KnobKind::Bitrate => {
                if v <= 0.0 {
                    issues.push(issue("knob_value", format!("bitrate must be > 0, got {v}")));
                    bad = true;
                }
            }
        }
    }

    let unit_field = cursor.get(6);
    let unit = if unit_field.is_empty() {
        None
    } else {
        match unit_field.parse::<BitrateUnit>() {
            Ok(u) => Some(u),
            Err(e) => {
                issues.push(issue("unit", e));
                bad = true;
                None
            }
        }
    };
    match knob_kind {
        Some(KnobKind::Bitrate) if unit.is_none() => {
            issues.push(issue("unit", "unit is required for bitrate rows".into()));
            bad = true;
        }
        Some(KnobKind::Qp) if unit.is_some() => {
            issues.push(issue("unit", "unit must be empty for qp rows".into()));
            bad = true;
        }
        _ => {}
    }

    let mut count = |idx: usize, column: &'static str| -> Option<Option<u64>> {
        let field = cursor.get(idx);
        if field.is_empty() {
            return Some(None);
        }
        match field.parse::<u64>() {
            Ok(v) => Some(Some(v)),
            Err(e) => {
                issues.push(ParseIssue {
                    row,
                    column: Some(column),
                    message: format!("bad count: {e}"),
                });
                None
            }
        }
    };
    let tp = count(7, "tp");
    let fn_ = count(8, "fn");
    let fp = count(9, "fp");
    bad |= tp.is_none() || fn_.is_none() || fp.is_none();

    let counts = match (tp.flatten(), fn_.flatten(), fp.flatten()) {
        (Some(tp), Some(fn_), Some(fp)) => Some(ConfusionCounts::new(tp, fn_, fp)),
        (None, None, None) => None,
        _ => {
            issues.push(ParseIssue {
                row,
                column: None,
                message: "tp, fn, fp must be all present or all empty".into(),
            });
            bad = true;
            None
        }
    };

    let observed_error = match cursor.get(10) {
        "" => None,
        field => match field.parse::<f64>() {
            Ok(v) if (0.0..=1.0).contains(&v) => Some(v),
            Ok(v) => {
                issues.push(issue(
                    "observed_error",
                    format!("must be in [0, 1], got {v}"),
                ));
                bad = true;
                None
            }
            Err(e) => {
                issues.push(issue("observed_error", format!("bad number: {e}")));
                bad = true;
                None
            }
        },
    };

    if counts.is_none() && observed_error.is_none() && !bad {
        issues.push(ParseIssue {
            row,
            column: None,
            message: "either counts (tp,fn,fp) or observed_error is required".into(),
        });
        bad = true;
    }
    if let (Some(c), Some(e)) = (counts, observed_error) {
        match metrics::recall_error(c) {
            Ok(from_counts) if (from_counts - e).abs() < ERROR_CONSISTENCY_TOL => {}
            Ok(from_counts) => {
                issues.push(ParseIssue {
                    row,
                    column: Some("observed_error"),
                    message: format!(
                        "inconsistent with counts: recall error from counts is {from_counts}, stated {e}"
                    ),
                });
                bad = true;
            }
            Err(err) => {
                issues.push(ParseIssue {
                    row,
                    column: None,
                    message: format!("counts present but {err}"),
                });
                bad = true;
            }
        }
    }

    if bad {
        return None;
    }
    let resolution = match Resolution::new(width?, height?) {
        Ok(r) => r,
        Err(e) => {
            issues.push(ParseIssue {
                row,
                column: None,
                message: e.to_string(),
            });
            return None;
        }
    };
    Some(MeasurementRecord {
        dataset_id,
        task: task?,
        resolution,
        knob_kind: knob_kind?,
        knob_value: knob_value?,
        unit,
        counts,
        observed_error,
    })
}

pub fn parse_measurements<R: Read>(mut reader: R) -> Result<Vec<MeasurementSeries>, IngestError> {
    let mut buf = String::new();
    reader.read_to_string(&mut buf)?;
    parse_measurements_str(&buf)
}

pub fn parse_measurements_path(path: &Path) -> Result<Vec<MeasurementSeries>, IngestError> {
    parse_measurements_str(&std::fs::read_to_string(path)?)
}

/// Reduce a validated series to fit-ready points: clamped observed
/// errors in deterministic resolution-major order.
pub fn to_fit_points(series: &MeasurementSeries) -> Result<Vec<FitPoint>, IngestError> {
    let resolutions = series.distinct_resolutions().len();
    if resolutions < MIN_DISTINCT_RESOLUTIONS {
        return Err(IngestError::InsufficientData {
            series: series.label(),
            reason: format!(
                "need at least {MIN_DISTINCT_RESOLUTIONS} distinct resolutions, found {resolutions}"
            ),
        });
    }
    let knobs = series.distinct_knob_values().len();
    if knobs < MIN_DISTINCT_KNOBS {
        return Err(IngestError::InsufficientData {
            series: series.label(),
            reason: format!("need at least {MIN_DISTINCT_KNOBS} distinct knob values, found {knobs}"),
        });
    }
    let mut points = Vec::with_capacity(series.records.len());
    for (index, rec) in series.records.iter().enumerate() {
        let error = rec
            .error()
            .map_err(|source| IngestError::UndefinedRecordError {
                index,
                series: series.label(),
                source,
            })?;
        points.push(FitPoint {
            resolution: rec.resolution,
            knob: rec.knob_value,
            observed: crate::model::clamp_error(error),
        });
    }
    Ok(points)
}

/// One entry of a constants file: a constant set plus its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsEntry {
    pub constants: ModelConstants,
    pub dataset: Option<String>,
    pub task: Option<Task>,
    pub source: Option<String>,
    /// Fit diagnostics, present on calibrated (as opposed to reference)
    /// entries.
    pub fit: Option<FitSummary>,
}

/// Serialized fit diagnostics attached to a calibrated constant set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub r2: f64,
    pub ss_res: f64,
    pub converged: bool,
    pub seed: u64,
    pub n_points: usize,
}

#[derive(Serialize, Deserialize)]
struct RawEntry {
    model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dataset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    task: Option<Task>,
    constants: BTreeMap<String, f64>,
    bitrate_unit: Option<BitrateUnit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fit: Option<FitSummary>,
}

fn required(
    map: &BTreeMap<String, f64>,
    key: &str,
    index: usize,
) -> Result<f64, IngestError> {
    map.get(key)
        .copied()
        .ok_or_else(|| IngestError::MalformedConstants {
            index,
            message: format!("missing constant {key:?}"),
        })
}

fn entry_from_raw(raw: RawEntry, index: usize) -> Result<ConstantsEntry, IngestError> {
    let expected: &[&str] = match raw.model.as_str() {
        "qrmoda" => &["c1", "c2", "c3", "c4", "c5"],
        "brmoda" => &["cp1", "cp2", "cp3", "cp4", "cp5"],
        other => {
            return Err(IngestError::MalformedConstants {
                index,
                message: format!("unknown model {other:?}"),
            })
        }
    };
    for key in raw.constants.keys() {
        if !expected.contains(&key.as_str()) {
            return Err(IngestError::MalformedConstants {
                index,
                message: format!("unexpected constant {key:?} for model {}", raw.model),
            });
        }
    }
    let constants = match raw.model.as_str() {
        "qrmoda" => {
            if raw.bitrate_unit.is_some() {
                return Err(IngestError::MalformedConstants {
                    index,
                    message: "bitrate_unit must be null for qrmoda".into(),
                });
            }
            ModelConstants::Qrmoda(
                QrmodaConstants::new(
                    required(&raw.constants, "c1", index)?,
                    required(&raw.constants, "c2", index)?,
                    required(&raw.constants, "c3", index)?,
                    required(&raw.constants, "c4", index)?,
                    required(&raw.constants, "c5", index)?,
                )
                .map_err(|source| IngestError::InvalidConstants { index, source })?,
            )
        }
        _ => ModelConstants::Brmoda(
            BrmodaConstants::new(
                required(&raw.constants, "cp1", index)?,
                required(&raw.constants, "cp2", index)?,
                required(&raw.constants, "cp3", index)?,
                required(&raw.constants, "cp4", index)?,
                required(&raw.constants, "cp5", index)?,
                raw.bitrate_unit,
            )
            .map_err(|source| IngestError::InvalidConstants { index, source })?,
        ),
    };
    Ok(ConstantsEntry {
        constants,
        dataset: raw.dataset,
        task: raw.task,
        source: raw.source,
        fit: raw.fit,
    })
}

fn entry_to_raw(entry: &ConstantsEntry) -> RawEntry {
    let (model, constants, bitrate_unit) = match entry.constants {
        ModelConstants::Qrmoda(k) => (
            "qrmoda".to_string(),
            BTreeMap::from([
                ("c1".to_string(), k.c1),
                ("c2".to_string(), k.c2),
                ("c3".to_string(), k.c3),
                ("c4".to_string(), k.c4),
                ("c5".to_string(), k.c5),
            ]),
            None,
        ),
        ModelConstants::Brmoda(k) => (
            "brmoda".to_string(),
            BTreeMap::from([
                ("cp1".to_string(), k.cp1),
                ("cp2".to_string(), k.cp2),
                ("cp3".to_string(), k.cp3),
                ("cp4".to_string(), k.cp4),
                ("cp5".to_string(), k.cp5),
            ]),
            k.bitrate_unit,
        ),
    };
    RawEntry {
        model,
        dataset: entry.dataset.clone(),
        task: entry.task,
        constants,
        bitrate_unit,
        source: entry.source.clone(),
        fit: entry.fit.clone(),
    }
}

pub fn load_constants_str(input: &str) -> Result<Vec<ConstantsEntry>, IngestError> {
    let raw: Vec<RawEntry> = serde_json::from_str(input)?;
    raw.into_iter()
        .enumerate()
        .map(|(index, r)| entry_from_raw(r, index))
        .collect()
}

pub fn load_constants(path: &Path) -> Result<Vec<ConstantsEntry>, IngestError> {
    load_constants_str(&std::fs::read_to_string(path)?)
}

pub fn constants_to_string(entries: &[ConstantsEntry]) -> Result<String, IngestError> {
    let raw: Vec<RawEntry> = entries.iter().map(entry_to_raw).collect();
    let mut out = serde_json::to_string_pretty(&raw)?;
    out.push('\n');
    Ok(out)
}

pub fn save_constants(entries: &[ConstantsEntry], path: &Path) -> Result<(), IngestError> {
    std::fs::write(path, constants_to_string(entries)?)?;
    Ok(())
}

/// The bundled reference constant sets (2 models x 2 datasets x 2
/// tasks, CNN-based pipeline). Their bitrate units were never declared
/// by the source and are carried as `None`.
pub fn reference_constants() -> Vec<ConstantsEntry> {
    load_constants_str(include_str!("../data/reference_constants.json"))
        .expect("bundled reference constants must be valid")
}
