//! Constant calibration by damped nonlinear least squares.
//!
//! Each model has five constants. Fitting minimizes the sum of squared
//! prediction errors over bounded constants, running a Levenberg-style
//! damped Gauss-Newton iteration from one heuristic start plus
//! `n_starts` seeded random starts, and keeping the best local optimum.
//!
//! The pixel count NM is rescaled by 1e-5 inside the optimizer to
//! condition the (NM)^c2 term; the exact identity
//! `a = c1 * (1e5)^{c2}` maps constants back on output.

use crate::metrics::{self, SeriesPair};
use crate::model::{
    BitrateUnit, BrmodaConstants, ModelConstants, ModelKind, QrmodaConstants, Resolution,
};
use nalgebra::{SMatrix, SVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

const NPARAMS: usize = 5;

/// Internal pixel-count scale: the optimizer sees s = NM * 1e-5.
const NM_SCALE: f64 = 1e-5;
const NM_SCALE_INV: f64 = 1e5;

#[derive(Debug, thiserror::Error)]
pub enum FitError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
    #[error("all starts diverged")]
    AllStartsDiverged,
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error("fit result does not match these points: {0}")]
    PointMismatch(String),
}

/// One calibration observation: setting plus clamped observed error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitPoint {
    pub resolution: Resolution,
    /// Qp value or actual bitrate, depending on the model being fit.
    pub knob: f64,
    pub observed: f64,
}

/// Per-constant box bounds, in output (unscaled) space, ordered as the
/// model's constants (c1..c5 or cp1..cp5).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub low: [f64; NPARAMS],
    pub high: [f64; NPARAMS],
}

impl Bounds {
    pub fn default_qrmoda() -> Self {
        Bounds {
            low: [1e-9, -2.0, 0.0, 0.0, -5.0],
            high: [1e3, 3.0, 2.0, 2.0, -1e-6],
        }
    }

    pub fn default_brmoda() -> Self {
        Bounds {
            low: [0.0, -2.0, -10.0, 0.0, -10.0],
            high: [2.0, 3.0, -1e-12, 2.0, -1e-12],
        }
    }

    fn validate(&self) -> Result<(), FitError> {
        for i in 0..NPARAMS {
            if !(self.low[i].is_finite() && self.high[i].is_finite()) {
                return Err(FitError::InvalidConfig(format!(
                    "bound {i} is not finite"
                )));
            }
            if self.low[i] >= self.high[i] {
                return Err(FitError::InvalidConfig(format!(
                    "bound {i}: low {} must be < high {}",
                    self.low[i], self.high[i]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub max_iterations: usize,
    pub damping_init: f64,
    pub damping_scale: f64,
    /// Convergence threshold on the relative SS_res decrease of an
    /// accepted step.
    pub convergence_tol: f64,
    /// Number of random starts, in addition to the heuristic start.
    pub n_starts: usize,
    pub rng_seed: u64,
    pub qrmoda_bounds: Bounds,
    pub brmoda_bounds: Bounds,
}

impl FitConfig {
    /// Defaults with the mandatory seed.
    pub fn new(rng_seed: u64) -> Self {
        FitConfig {
            max_iterations: 200,
            damping_init: 1e-3,
            damping_scale: 10.0,
            convergence_tol: 1e-10,
            n_starts: 16,
            rng_seed,
            qrmoda_bounds: Bounds::default_qrmoda(),
            brmoda_bounds: Bounds::default_brmoda(),
        }
    }

    fn validate(&self) -> Result<(), FitError> {
        if self.n_starts < 1 {
            return Err(FitError::InvalidConfig("n_starts must be >= 1".into()));
        }
        if !(self.damping_init > 0.0 && self.damping_scale > 1.0) {
            return Err(FitError::InvalidConfig(
                "damping_init must be > 0 and damping_scale > 1".into(),
            ));
        }
        self.qrmoda_bounds.validate()?;
        self.brmoda_bounds.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub constants: ModelConstants,
    pub r2: f64,
    pub ss_res: f64,
    /// Signed per-point residuals, observed minus predicted, in the
    /// points' order.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// Which start won (0 is the heuristic start).
    pub start_index: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl FitResult {
    /// Package as a constants-file entry with the fit diagnostics block.
    pub fn to_entry(
        &self,
        dataset: Option<String>,
        task: Option<crate::ingest::Task>,
        source: Option<String>,
    ) -> crate::ingest::ConstantsEntry {
        crate::ingest::ConstantsEntry {
            constants: self.constants,
            dataset,
            task,
            source,
            fit: Some(crate::ingest::FitSummary {
                r2: self.r2,
                ss_res: self.ss_res,
                converged: self.converged,
                seed: self.seed,
                n_points: self.residuals.len(),
            }),
        }
    }
}

// ---------------------------------------------------------------------
// Model evaluation in internal (rescaled) parameter space.
//
// Internal parameter vectors are [a, k2, k3, k4, k5] where the model's
// resolution term uses a * s^{k2} with s = NM * 1e-5; the remaining
// parameters coincide with the output constants.
// ---------------------------------------------------------------------

fn internal_from_output(kind: ModelKind, out: &[f64; NPARAMS]) -> [f64; NPARAMS] {
    let _ = kind;
    let mut p = *out;
    p[0] = out[0] * NM_SCALE_INV.powf(out[1]);
    p
}

fn output_from_internal(kind: ModelKind, p: &[f64; NPARAMS]) -> [f64; NPARAMS] {
    let _ = kind;
    let mut out = *p;
    out[0] = p[0] * NM_SCALE.powf(p[1]);
    out
}

/// Evaluate the model at internal parameters. `ln_s` is ln(NM * 1e-5).
fn eval_internal(kind: ModelKind, p: &[f64; NPARAMS], ln_s: f64, knob: f64) -> f64 {
    match kind {
        ModelKind::Qrmoda => {
            let x0 = p[0] * (p[1] * ln_s).exp();
            let sigma = 1.0 / (1.0 + (p[4] * (knob - x0)).exp());
            p[3] * sigma + p[2]
        }
        ModelKind::Brmoda => {
            p[0] * (p[1] * ln_s + p[2] * knob).exp() + p[3] * (p[4] * knob).exp()
        }
    }
}

/// Partial derivatives of the model value w.r.t. the internal
/// parameters.
fn jacobian_internal(
    kind: ModelKind,
    p: &[f64; NPARAMS],
    ln_s: f64,
    knob: f64,
) -> [f64; NPARAMS] {
    match kind {
        ModelKind::Qrmoda => {
            let res_pow = (p[1] * ln_s).exp();
            let x0 = p[0] * res_pow;
            // sigma computed via 1/(1+e^u) so the far tails give exact
            // zeros instead of inf/inf.
            let sigma = 1.0 / (1.0 + (p[4] * (knob - x0)).exp());
            let g = -p[3] * sigma * (1.0 - sigma); // d(model)/du
            [
                g * (-p[4]) * res_pow,
                g * (-p[4]) * p[0] * ln_s * res_pow,
                1.0,
                sigma,
                g * (knob - x0),
            ]
        }
        ModelKind::Brmoda => {
            let e1 = (p[1] * ln_s + p[2] * knob).exp();
            let t1 = p[0] * e1;
            let e2 = (p[4] * knob).exp();
            let t2 = p[3] * e2;
            [e1, t1 * ln_s, t1 * knob, e2, t2 * knob]
        }
    }
}

/// Closed-form partials of the model value with respect to the five
/// output-space constants, at one point.
pub fn analytic_jacobian(constants: &ModelConstants, point: &FitPoint) -> [f64; NPARAMS] {
    let ln_nm = (point.resolution.pixel_count() as f64).ln();
    match *constants {
        ModelConstants::Qrmoda(k) => {
            let res_pow = (k.c2 * ln_nm).exp();
            let x0 = k.c1 * res_pow;
            let sigma = 1.0 / (1.0 + (k.c5 * (point.knob - x0)).exp());
            let g = -k.c4 * sigma * (1.0 - sigma);
            [
                g * (-k.c5) * res_pow,
                g * (-k.c5) * k.c1 * ln_nm * res_pow,
                1.0,
                sigma,
                g * (point.knob - x0),
            ]
        }
        ModelConstants::Brmoda(k) => {
            let e1 = (k.cp2 * ln_nm + k.cp3 * point.knob).exp();
            let t1 = k.cp1 * e1;
            let e2 = (k.cp5 * point.knob).exp();
            let t2 = k.cp4 * e2;
            [e1, t1 * ln_nm, t1 * point.knob, e2, t2 * point.knob]
        }
    }
}

/// Project internal parameters onto the output-space box bounds.
///
/// Indices 1..5 are clamped directly. The amplitude (index 0) is
/// clamped against the output bound transformed at the (already
/// clamped) exponent, which enforces the output-space bound exactly.
fn project(p: &mut [f64; NPARAMS], bounds: &Bounds) {
    for (i, v) in p.iter_mut().enumerate().skip(1) {
        *v = v.clamp(bounds.low[i], bounds.high[i]);
    }
    let scale = NM_SCALE_INV.powf(p[1]);
    p[0] = p[0].clamp(bounds.low[0] * scale, bounds.high[0] * scale);
}

struct PreparedPoint {
    ln_s: f64,
    knob: f64,
    observed: f64,
}

fn sum_squares(kind: ModelKind, p: &[f64; NPARAMS], pts: &[PreparedPoint]) -> f64 {
    pts.iter()
        .map(|pt| {
            let e = eval_internal(kind, p, pt.ln_s, pt.knob) - pt.observed;
            e * e
        })
        .sum()
}

struct LocalFit {
    params: [f64; NPARAMS],
    ss: f64,
    iterations: usize,
    converged: bool,
}

/// Damped least squares from one start. Accepted steps never increase
/// the objective; rejected steps raise the damping and retry.
fn lm_from_start(
    kind: ModelKind,
    pts: &[PreparedPoint],
    start: [f64; NPARAMS],
    bounds: &Bounds,
    cfg: &FitConfig,
) -> Option<LocalFit> {
    let mut p = start;
    project(&mut p, bounds);
    let mut ss = sum_squares(kind, &p, pts);
    if !ss.is_finite() {
        return None;
    }
    let mut lambda = cfg.damping_init;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..cfg.max_iterations {
        iterations = iter + 1;
        let mut jtj = SMatrix::<f64, NPARAMS, NPARAMS>::zeros();
        let mut jte = SVector::<f64, NPARAMS>::zeros();
        for pt in pts {
            let j = jacobian_internal(kind, &p, pt.ln_s, pt.knob);
            let e = eval_internal(kind, &p, pt.ln_s, pt.knob) - pt.observed;
            for r in 0..NPARAMS {
                jte[r] += j[r] * e;
                for c in 0..NPARAMS {
                    jtj[(r, c)] += j[r] * j[c];
                }
            }
        }
        if !(jtj.iter().all(|v| v.is_finite()) && jte.iter().all(|v| v.is_finite())) {
            return None;
        }

        let mut accepted = false;
        for _ in 0..60 {
            let mut damped = jtj;
            for d in 0..NPARAMS {
                damped[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let step = match damped.lu().solve(&(-jte)) {
                Some(s) if s.iter().all(|v| v.is_finite()) => s,
                _ => {
                    lambda *= cfg.damping_scale;
                    continue;
                }
            };
            let mut candidate = p;
            for i in 0..NPARAMS {
                candidate[i] += step[i];
            }
            project(&mut candidate, bounds);
            let ss_new = sum_squares(kind, &candidate, pts);
            if ss_new.is_finite() && ss_new <= ss {
                let drop = ss - ss_new;
                p = candidate;
                ss = ss_new;
                lambda = (lambda / cfg.damping_scale).max(1e-15);
                accepted = true;
                if drop <= cfg.convergence_tol * ss.max(1e-300) {
                    converged = true;
                }
                break;
            }
            lambda *= cfg.damping_scale;
        }
        if !accepted {
            // Damping exhausted without a descent direction: local
            // stationary point within the bounds.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    Some(LocalFit {
        params: p,
        ss,
        iterations,
        converged,
    })
}

fn linear_regression(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

/// Group point indices by resolution, ascending pixel count.
fn by_resolution(points: &[FitPoint]) -> Vec<(Resolution, Vec<usize>)> {
    let mut groups: Vec<(Resolution, Vec<usize>)> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        match groups.iter_mut().find(|(r, _)| *r == p.resolution) {
            Some((_, v)) => v.push(i),
            None => groups.push((p.resolution, vec![i])),
        }
    }
    groups.sort_by_key(|(r, _)| (r.pixel_count(), r.width(), r.height()));
    for (_, idxs) in &mut groups {
        idxs.sort_by(|&a, &b| points[a].knob.total_cmp(&points[b].knob));
    }
    groups
}

/// Data-driven initial guess for QRMODA, in output space.
fn qrmoda_heuristic(points: &[FitPoint], bounds: &Bounds) -> [f64; NPARAMS] {
    let emin = points.iter().map(|p| p.observed).fold(f64::INFINITY, f64::min);
    let emax = points
        .iter()
        .map(|p| p.observed)
        .fold(f64::NEG_INFINITY, f64::max);
    let c3 = emin;
    let c4 = (emax - emin).max(1e-6);
    let mid = 0.5 * (emin + emax);

    // Per-resolution Qp at which the curve crosses the mid level,
    // regressed in log space against the pixel count.
    let mut ln_nm = Vec::new();
    let mut ln_x0 = Vec::new();
    for (res, idxs) in by_resolution(points) {
        let mut crossing = None;
        for w in idxs.windows(2) {
            let (a, b) = (&points[w[0]], &points[w[1]]);
            if a.observed <= mid && b.observed >= mid && b.observed > a.observed {
                let t = (mid - a.observed) / (b.observed - a.observed);
                crossing = Some(a.knob + t * (b.knob - a.knob));
                break;
            }
        }
        if let Some(x0) = crossing {
            if x0 > 0.0 {
                ln_nm.push((res.pixel_count() as f64).ln());
                ln_x0.push(x0.ln());
            }
        }
    }
    let (c1, c2) = match linear_regression(&ln_nm, &ln_x0) {
        Some((intercept, slope)) => (intercept.exp(), slope),
        None => match (ln_nm.first(), ln_x0.first()) {
            // Single crossing: assume a mild resolution exponent.
            (Some(&lnm), Some(&lx0)) => ((lx0 - 0.05 * lnm).exp(), 0.05),
            _ => (20.0, 0.1),
        },
    };

    let mut out = [c1, c2, c3, c4, -0.3];
    for (i, v) in out.iter_mut().enumerate() {
        *v = v.clamp(bounds.low[i], bounds.high[i]);
    }
    out
}

/// Data-driven initial guess for BRMODA, in output space.
fn brmoda_heuristic(points: &[FitPoint], bounds: &Bounds) -> [f64; NPARAMS] {
    let groups = by_resolution(points);
    let r_min = points.iter().map(|p| p.knob).fold(f64::INFINITY, f64::min);
    let r_max = points
        .iter()
        .map(|p| p.knob)
        .fold(f64::NEG_INFINITY, f64::max);
    let span = (r_max - r_min).max(1e-12);

    let mean_at = |target: f64| {
        let (sum, n) = points
            .iter()
            .filter(|p| p.knob == target)
            .fold((0.0, 0usize), |(s, n), p| (s + p.observed, n + 1));
        if n > 0 {
            sum / n as f64
        } else {
            0.0
        }
    };
    let head = mean_at(r_min).max(1e-9);
    let tail = mean_at(r_max).max(1e-9);

    let cp4 = (2.0 * tail).clamp(1e-6, bounds.high[3]);
    let cp5 = (-(head / tail).ln() / span).clamp(bounds.low[4], bounds.high[4]);
    let cp3 = (10.0 * cp5).clamp(bounds.low[2], bounds.high[2]);

    // Intercepts at the lowest bitrate, one per resolution, regressed
    // in log space against the pixel count.
    let mut ln_nm = Vec::new();
    let mut ln_a = Vec::new();
    for (res, idxs) in &groups {
        let first = &points[idxs[0]];
        let bias = cp4 * (cp5 * first.knob).exp();
        let excess = (first.observed - bias).max(1e-9);
        ln_nm.push((res.pixel_count() as f64).ln());
        ln_a.push(excess.ln() - cp3 * first.knob);
    }
    let (cp1, cp2) = match linear_regression(&ln_nm, &ln_a) {
        Some((intercept, slope)) => (intercept.exp(), slope),
        None => (0.1, 0.3),
    };

    let mut out = [cp1, cp2, cp3, cp4, cp5];
    for (i, v) in out.iter_mut().enumerate() {
        *v = v.clamp(bounds.low[i], bounds.high[i]);
    }
    out
}

/// Seeded random start in output space. Scale-like constants are drawn
/// log-uniform in magnitude so the starts cover several decades.
fn random_start(
    kind: ModelKind,
    bounds: &Bounds,
    rng: &mut ChaCha12Rng,
) -> [f64; NPARAMS] {
    let log_uniform = |rng: &mut ChaCha12Rng, lo: f64, hi: f64| -> f64 {
        let (ll, lh) = (lo.ln(), hi.ln());
        (rng.gen_range(0.0..1.0) * (lh - ll) + ll).exp()
    };
    let uniform =
        |rng: &mut ChaCha12Rng, lo: f64, hi: f64| -> f64 { rng.gen_range(0.0..1.0) * (hi - lo) + lo };
    let mut out = match kind {
        ModelKind::Qrmoda => [
            log_uniform(rng, bounds.low[0].max(1e-3), bounds.high[0]),
            uniform(rng, bounds.low[1], bounds.high[1]),
            uniform(rng, 0.0, 1.0_f64.min(bounds.high[2])),
            uniform(rng, 0.0, 1.0_f64.min(bounds.high[3])),
            -log_uniform(rng, 1e-3, -bounds.low[4]),
        ],
        ModelKind::Brmoda => [
            log_uniform(rng, 1e-8, bounds.high[0]),
            uniform(rng, bounds.low[1], bounds.high[1]),
            -log_uniform(rng, 1e-8, -bounds.low[2]),
            log_uniform(rng, 1e-6, bounds.high[3]),
            -log_uniform(rng, 1e-10, -bounds.low[4]),
        ],
    };
    for (i, v) in out.iter_mut().enumerate() {
        *v = v.clamp(bounds.low[i], bounds.high[i]);
    }
    out
}

fn check_preconditions(kind: ModelKind, points: &[FitPoint]) -> Result<(), FitError> {
    if points.len() < 6 {
        return Err(FitError::InsufficientData(format!(
            "need at least 6 points, got {}",
            points.len()
        )));
    }
    let groups = by_resolution(points);
    if groups.len() < 2 {
        return Err(FitError::InsufficientData(
            "need at least 2 distinct resolutions".into(),
        ));
    }
    let mut knobs: Vec<f64> = points.iter().map(|p| p.knob).collect();
    knobs.sort_by(|a, b| a.total_cmp(b));
    knobs.dedup_by(|a, b| a.to_bits() == b.to_bits());
    if knobs.len() < 4 {
        return Err(FitError::InsufficientData(format!(
            "need at least 4 distinct knob values, got {}",
            knobs.len()
        )));
    }
    for p in points {
        if !(p.knob.is_finite() && p.observed.is_finite()) {
            return Err(FitError::Degenerate("non-finite point".into()));
        }
        if kind == ModelKind::Brmoda && p.knob < 0.0 {
            return Err(FitError::Degenerate(format!(
                "negative bitrate {}",
                p.knob
            )));
        }
    }
    Ok(())
}

fn run_fit(
    kind: ModelKind,
    points: &[FitPoint],
    cfg: &FitConfig,
    heuristic: [f64; NPARAMS],
    bounds: &Bounds,
    unit: Option<BitrateUnit>,
) -> Result<FitResult, FitError> {
    let prepared: Vec<PreparedPoint> = points
        .iter()
        .map(|p| PreparedPoint {
            ln_s: (p.resolution.pixel_count() as f64 * NM_SCALE).ln(),
            knob: p.knob,
            observed: p.observed,
        })
        .collect();

    let mut starts = Vec::with_capacity(cfg.n_starts + 1);
    starts.push(internal_from_output(kind, &heuristic));
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.rng_seed);
    for stream in 0..cfg.n_starts {
        rng.set_stream(stream as u64 + 1);
        let out = random_start(kind, bounds, &mut rng);
        starts.push(internal_from_output(kind, &out));
    }

    // Best-by-SS reduction; ties go to the lowest start index.
    let mut best: Option<(usize, LocalFit)> = None;
    for (index, start) in starts.into_iter().enumerate() {
        if let Some(local) = lm_from_start(kind, &prepared, start, bounds, cfg) {
            let better = match &best {
                None => true,
                Some((_, b)) => local.ss < b.ss,
            };
            if better {
                best = Some((index, local));
            }
        }
    }
    let (start_index, local) = best.ok_or(FitError::AllStartsDiverged)?;

    let out = output_from_internal(kind, &local.params);
    let constants = match kind {
        ModelKind::Qrmoda => {
            ModelConstants::Qrmoda(QrmodaConstants::new(out[0], out[1], out[2], out[3], out[4])?)
        }
        ModelKind::Brmoda => ModelConstants::Brmoda(BrmodaConstants::new(
            out[0], out[1], out[2], out[3], out[4], unit,
        )?),
    };

    let predicted: Vec<f64> = prepared
        .iter()
        .map(|pt| eval_internal(kind, &local.params, pt.ln_s, pt.knob))
        .collect();
    let residuals: Vec<f64> = points
        .iter()
        .zip(&predicted)
        .map(|(p, pred)| p.observed - pred)
        .collect();
    let observed: Vec<f64> = points.iter().map(|p| p.observed).collect();
    let r2 = metrics::r_squared(&SeriesPair::new(observed, predicted)?)?;

    Ok(FitResult {
        constants,
        r2,
        ss_res: local.ss,
        residuals,
        converged: local.converged,
        start_index,
        iterations: local.iterations,
        seed: cfg.rng_seed,
    })
}

/// Calibrate QRMODA constants from (resolution, Qp, error) points.
pub fn fit_qrmoda(points: &[FitPoint], cfg: &FitConfig) -> Result<FitResult, FitError> {
    cfg.validate()?;
    check_preconditions(ModelKind::Qrmoda, points)?;
    let heuristic = qrmoda_heuristic(points, &cfg.qrmoda_bounds);
    run_fit(
        ModelKind::Qrmoda,
        points,
        cfg,
        heuristic,
        &cfg.qrmoda_bounds,
        None,
    )
}

/// Calibrate BRMODA constants from (resolution, actual bitrate, error)
/// points. The fitted constants carry the points' bitrate unit.
pub fn fit_brmoda(
    points: &[FitPoint],
    unit: Option<BitrateUnit>,
    cfg: &FitConfig,
) -> Result<FitResult, FitError> {
    cfg.validate()?;
    check_preconditions(ModelKind::Brmoda, points)?;
    let heuristic = brmoda_heuristic(points, &cfg.brmoda_bounds);
    run_fit(
        ModelKind::Brmoda,
        points,
        cfg,
        heuristic,
        &cfg.brmoda_bounds,
        unit,
    )
}

/// Predict the raw model value at one fit point.
pub fn predict(constants: &ModelConstants, point: &FitPoint) -> Result<f64, crate::model::ModelError> {
    match constants {
        ModelConstants::Qrmoda(k) => k.eval(point.resolution, point.knob),
        ModelConstants::Brmoda(k) => k.eval(point.resolution, point.knob),
    }
}

/// Observed-vs-predicted table for one fit, grouped per resolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub global_r2: f64,
    pub groups: Vec<ResolutionCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionCurve {
    pub resolution: Resolution,
    /// Per-resolution R^2; absent when the group has fewer than two
    /// points or zero observed variance.
    pub r2: Option<f64>,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub knob: f64,
    pub observed: f64,
    pub predicted: f64,
    pub residual: f64,
}

/// Build the per-resolution observed/predicted table for a fit.
///
/// Fails when `points` are not the points the result was produced from.
pub fn residual_report(result: &FitResult, points: &[FitPoint]) -> Result<ResidualReport, FitError> {
    if result.residuals.len() != points.len() {
        return Err(FitError::PointMismatch(format!(
            "result has {} residuals, got {} points",
            result.residuals.len(),
            points.len()
        )));
    }
    let mut curve_points = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let predicted = predict(&result.constants, p)?;
        let residual = p.observed - predicted;
        if (residual - result.residuals[i]).abs() > 1e-9 {
            return Err(FitError::PointMismatch(format!(
                "point {i}: stored residual {} disagrees with recomputed {residual}",
                result.residuals[i]
            )));
        }
        curve_points.push(CurvePoint {
            knob: p.knob,
            observed: p.observed,
            predicted,
            residual,
        });
    }

    let mut groups = Vec::new();
    for (resolution, idxs) in by_resolution(points) {
        let pts: Vec<CurvePoint> = idxs.iter().map(|&i| curve_points[i]).collect();
        let r2 = if pts.len() >= 2 {
            SeriesPair::new(
                pts.iter().map(|p| p.observed).collect(),
                pts.iter().map(|p| p.predicted).collect(),
            )
            .ok()
            .and_then(|s| metrics::r_squared(&s).ok())
        } else {
            None
        };
        groups.push(ResolutionCurve {
            resolution,
            r2,
            points: pts,
        });
    }

    let global = SeriesPair::new(
        curve_points.iter().map(|p| p.observed).collect(),
        curve_points.iter().map(|p| p.predicted).collect(),
    )?;
    Ok(ResidualReport {
        global_r2: metrics::r_squared(&global)?,
        groups,
    })
}

impl std::fmt::Display for ResidualReport {
    /// Plain delimited text, one section per resolution, suitable for
    /// external plotting tools. Comment lines start with '#'.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "# global_r2={:.11e}", self.global_r2)?;
        writeln!(f, "# columns: width,height,knob,observed,predicted,residual")?;
        for g in &self.groups {
            match g.r2 {
                Some(r2) => writeln!(f, "# resolution={} r2={:.11e}", g.resolution, r2)?,
                None => writeln!(f, "# resolution={} r2=undefined", g.resolution)?,
            }
            for p in &g.points {
                writeln!(
                    f,
                    "{},{},{:.11e},{:.11e},{:.11e},{:.11e}",
                    g.resolution.width(),
                    g.resolution.height(),
                    p.knob,
                    p.observed,
                    p.predicted,
                    p.residual
                )?;
            }
        }
        Ok(())
    }
}
