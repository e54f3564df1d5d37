//! Confusion-matrix accuracy metrics and goodness of fit.
//!
//! Rates are always computed from aggregated counts, never averaged
//! across frames: summing first matches the per-video recall error
//! definition.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("{metric} is undefined: {reason}")]
    Undefined {
        metric: &'static str,
        reason: &'static str,
    },
    #[error("cannot aggregate an empty list of confusion counts")]
    EmptyAggregate,
    #[error("series pair invalid: {0}")]
    InvalidSeries(&'static str),
}

/// Per-frame (or per-video) true-positive / false-negative /
/// false-positive tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fn_: u64, fp: u64) -> Self {
        Self { tp, fn_, fp }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, rhs: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + rhs.tp,
            fn_: self.fn_ + rhs.fn_,
            fp: self.fp + rhs.fp,
        }
    }
}

/// Recall error: `1 - tp / (tp + fn)`, computed as `fn / (tp + fn)` so
/// exact ratios stay exact.
pub fn recall_error(c: ConfusionCounts) -> Result<f64, MetricsError> {
    let denom = c.tp + c.fn_;
    if denom == 0 {
        return Err(MetricsError::Undefined {
            metric: "recall error",
            reason: "no positive ground truth (tp + fn = 0)",
        });
    }
    Ok(c.fn_ as f64 / denom as f64)
}

/// Recall: `tp / (tp + fn)`.
pub fn recall(c: ConfusionCounts) -> Result<f64, MetricsError> {
    let denom = c.tp + c.fn_;
    if denom == 0 {
        return Err(MetricsError::Undefined {
            metric: "recall",
            reason: "no positive ground truth (tp + fn = 0)",
        });
    }
    Ok(c.tp as f64 / denom as f64)
}

/// Precision: `tp / (tp + fp)`.
pub fn precision(c: ConfusionCounts) -> Result<f64, MetricsError> {
    let denom = c.tp + c.fp;
    if denom == 0 {
        return Err(MetricsError::Undefined {
            metric: "precision",
            reason: "no positive predictions (tp + fp = 0)",
        });
    }
    Ok(c.tp as f64 / denom as f64)
}

/// F1 score, the harmonic mean of precision and recall. When both are
/// zero the harmonic mean is taken as 0 by convention.
pub fn f1(c: ConfusionCounts) -> Result<f64, MetricsError> {
    let p = precision(c)?;
    let r = recall(c)?;
    if p == 0.0 && r == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * p * r / (p + r))
}

/// Field-wise sum over per-frame counts. Rates computed from the sum
/// are NOT the mean of per-frame rates.
pub fn aggregate(frames: &[ConfusionCounts]) -> Result<ConfusionCounts, MetricsError> {
    if frames.is_empty() {
        return Err(MetricsError::EmptyAggregate);
    }
    Ok(frames
        .iter()
        .copied()
        .fold(ConfusionCounts::default(), |a, b| a + b))
}

/// Matched observed/predicted series for goodness-of-fit computation.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPair {
    observed: Vec<f64>,
    predicted: Vec<f64>,
}

impl SeriesPair {
    pub fn new(observed: Vec<f64>, predicted: Vec<f64>) -> Result<Self, MetricsError> {
        if observed.len() != predicted.len() {
            return Err(MetricsError::InvalidSeries("length mismatch"));
        }
        if observed.len() < 2 {
            return Err(MetricsError::InvalidSeries("need at least 2 points"));
        }
        if observed
            .iter()
            .chain(predicted.iter())
            .any(|v| !v.is_finite())
        {
            return Err(MetricsError::InvalidSeries("non-finite value"));
        }
        Ok(Self {
            observed,
            predicted,
        })
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn predicted(&self) -> &[f64] {
        &self.predicted
    }
}

/// Coefficient of determination: `1 - SS_res / SS_tot` with `SS_tot`
/// taken about the observed mean. At most 1; negative for fits worse
/// than the constant-mean baseline.
pub fn r_squared(s: &SeriesPair) -> Result<f64, MetricsError> {
    let n = s.observed.len() as f64;
    let mean = s.observed.iter().sum::<f64>() / n;
    let ss_tot: f64 = s.observed.iter().map(|o| (o - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(MetricsError::Undefined {
            metric: "r_squared",
            reason: "observed series has zero variance",
        });
    }
    let ss_res: f64 = s
        .observed
        .iter()
        .zip(&s.predicted)
        .map(|(o, p)| (o - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}
