//! Closed-loop desk-scale simulation of a camera network controller.
//!
//! Ground-truth constants play the role of the real cameras: a
//! calibration sweep collects noisy accuracy observations through an
//! encoder surrogate, the fit module recovers per-camera constants, the
//! planner allocates the bandwidth budget, and the resulting plan is
//! scored against the ground truth (noiselessly) next to two baselines.
//!
//! Everything is reproducible bit-for-bit from (config, seed): RNG
//! streams are per-camera counters derived from the master seed.

use crate::fit::{self, FitConfig, FitPoint};
use crate::model::{
    clamp_error, AdaptationSetting, BrmodaConstants, ModelError, QrmodaConstants, Resolution,
};
use crate::planner::{
    self, AllocationPlan, BitratePredictor, CameraOptions, CameraProfile, PlanError,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("config: {0}")]
    Config(String),
    #[error("calibration phase, camera {camera_id}: {message}")]
    Calibration { camera_id: String, message: String },
    #[error("fit phase, camera {camera_id}: {source}")]
    Fit {
        camera_id: String,
        source: fit::FitError,
    },
    #[error("plan phase: {0}")]
    Plan(#[from] PlanError),
    #[error("evaluation phase: {0}")]
    Evaluation(#[from] ModelError),
    #[error("observation kind mismatch: camera {camera_id} has no {wanted} ground truth")]
    KindMismatch {
        camera_id: String,
        wanted: &'static str,
    },
    #[error("unknown camera {0}")]
    UnknownCamera(String),
}

/// Per-resolution encoder behavior: the actual bitrate is
/// `clamp(target * efficiency, floor, ceiling)`, optionally jittered by
/// multiplicative log-normal noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateBand {
    pub efficiency: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default = "default_ceiling")]
    pub ceiling: f64,
}

fn default_floor() -> f64 {
    1e-6
}

fn default_ceiling() -> f64 {
    f64::MAX
}

impl Default for SurrogateBand {
    fn default() -> Self {
        SurrogateBand {
            efficiency: 1.0,
            floor: default_floor(),
            ceiling: default_ceiling(),
        }
    }
}

impl SurrogateBand {
    fn validate(&self) -> Result<(), String> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.5) {
            return Err(format!(
                "efficiency {} must be in (0, 1.5]",
                self.efficiency
            ));
        }
        if !(self.floor > 0.0 && self.floor <= self.ceiling) {
            return Err(format!(
                "floor {} must be > 0 and <= ceiling {}",
                self.floor, self.ceiling
            ));
        }
        Ok(())
    }
}

/// Stand-in for a real encoder: maps (resolution, target) to an actual
/// bitrate, always positive, deterministic given the seed.
#[derive(Debug, Clone)]
pub struct EncoderSurrogate {
    bands: BTreeMap<Resolution, SurrogateBand>,
    default_band: SurrogateBand,
    noise_sigma: f64,
}

impl EncoderSurrogate {
    pub fn new(
        bands: BTreeMap<Resolution, SurrogateBand>,
        default_band: SurrogateBand,
        noise_sigma: f64,
    ) -> Result<Self, SimError> {
        for (res, band) in bands.iter().chain(std::iter::once((
            &Resolution::new(1, 1).unwrap(),
            &default_band,
        ))) {
            band.validate()
                .map_err(|e| SimError::Config(format!("surrogate band for {res}: {e}")))?;
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(SimError::Config(format!(
                "surrogate noise sigma {noise_sigma} must be >= 0"
            )));
        }
        Ok(EncoderSurrogate {
            bands,
            default_band,
            noise_sigma,
        })
    }

    fn band(&self, res: Resolution) -> &SurrogateBand {
        self.bands.get(&res).unwrap_or(&self.default_band)
    }

    /// Noise-free mapping, used for planning.
    pub fn expected_actual(&self, res: Resolution, target: f64) -> f64 {
        let band = self.band(res);
        (target * band.efficiency).clamp(band.floor, band.ceiling)
    }

    /// Noisy mapping, used when generating calibration probes.
    pub fn noisy_actual(&self, res: Resolution, target: f64, rng: &mut ChaCha12Rng) -> f64 {
        let base = self.expected_actual(res, target);
        if self.noise_sigma == 0.0 {
            return base;
        }
        let band = self.band(res);
        (base * (standard_normal(rng) * self.noise_sigma).exp())
            .clamp(band.floor, band.ceiling)
    }
}

impl BitratePredictor for EncoderSurrogate {
    fn actual_bitrate(&self, resolution: Resolution, target: f64) -> Result<f64, String> {
        Ok(self.expected_actual(resolution, target))
    }
}

/// Box-Muller standard normal draw; kept local so the stream is
/// identical across platforms.
fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen_range(0.0..1.0); // (0, 1]
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// The simulated world: true constants per camera plus observation
/// noise.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub cameras: BTreeMap<String, CameraTruth>,
    /// Additive Gaussian noise on observed errors, truncated to [0, 1].
    pub noise_sigma: f64,
}

#[derive(Debug, Clone)]
pub struct CameraTruth {
    pub brmoda: Option<BrmodaConstants>,
    pub qrmoda: Option<QrmodaConstants>,
}

/// Draw one noisy accuracy observation from the ground truth.
///
/// Noise is re-sampled up to 100 times to stay inside [0, 1], then
/// clamped. With sigma = 0 this is exactly the clamped model value.
pub fn observe(
    gt: &GroundTruth,
    camera_id: &str,
    setting: &AdaptationSetting,
    rng: &mut ChaCha12Rng,
) -> Result<f64, SimError> {
    let truth = gt
        .cameras
        .get(camera_id)
        .ok_or_else(|| SimError::UnknownCamera(camera_id.to_string()))?;
    let value = match *setting {
        AdaptationSetting::Qp { resolution, qp } => {
            let k = truth.qrmoda.ok_or(SimError::KindMismatch {
                camera_id: camera_id.to_string(),
                wanted: "qrmoda",
            })?;
            k.eval(resolution, f64::from(qp))?
        }
        AdaptationSetting::Bitrate {
            resolution,
            bitrate,
        } => {
            let k = truth.brmoda.ok_or(SimError::KindMismatch {
                camera_id: camera_id.to_string(),
                wanted: "brmoda",
            })?;
            k.eval(resolution, bitrate)?
        }
    };
    let clean = clamp_error(value);
    if gt.noise_sigma == 0.0 {
        return Ok(clean);
    }
    for _ in 0..100 {
        let noisy = clean + standard_normal(rng) * gt.noise_sigma;
        if (0.0..=1.0).contains(&noisy) {
            return Ok(noisy);
        }
    }
    Ok(clamp_error(clean + standard_normal(rng) * gt.noise_sigma))
}

// ---------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub budget: f64,
    /// Knapsack quantum; defaults to budget / 1e4.
    #[serde(default)]
    pub quantum: Option<f64>,
    #[serde(default = "default_observation_sigma")]
    pub observation_sigma: f64,
    #[serde(default = "default_surrogate_sigma")]
    pub surrogate_sigma: f64,
    pub cameras: Vec<CameraConfig>,
}

fn default_observation_sigma() -> f64 {
    0.01
}

fn default_surrogate_sigma() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub camera_id: String,
    #[serde(default = "default_weight")]
    pub weight: f64,
    /// Ground-truth BRMODA constants, inline...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<BrmodaConstants>,
    /// ...or by reference into a constants file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants_ref: Option<ConstantsRef>,
    /// Optional QRMODA ground truth for Qp observations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qrmoda_constants: Option<QrmodaConstants>,
    /// Allowed resolutions, as [width, height] pairs.
    pub resolutions: Vec<[u32; 2]>,
    /// Target bitrates probed during calibration.
    pub calibration_targets: Vec<f64>,
    /// Target bitrates available to the controller.
    pub option_targets: Vec<f64>,
    /// Per-resolution surrogate bands; resolutions not listed use the
    /// identity band.
    #[serde(default)]
    pub surrogate: Vec<SurrogateEntry>,
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsRef {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<crate::ingest::Task>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateEntry {
    pub width: u32,
    pub height: u32,
    #[serde(flatten)]
    pub band: SurrogateBand,
}

impl CameraConfig {
    fn resolutions(&self) -> Result<Vec<Resolution>, SimError> {
        if self.resolutions.is_empty() {
            return Err(SimError::Config(format!(
                "camera {}: no resolutions",
                self.camera_id
            )));
        }
        self.resolutions
            .iter()
            .map(|&[w, h]| {
                Resolution::new(w, h)
                    .map_err(|e| SimError::Config(format!("camera {}: {e}", self.camera_id)))
            })
            .collect()
    }

    fn ground_truth_brmoda(&self) -> Result<BrmodaConstants, SimError> {
        match (&self.constants, &self.constants_ref) {
            (Some(k), None) => Ok(*k),
            (None, Some(r)) => {
                let entries = crate::ingest::load_constants(std::path::Path::new(&r.path))
                    .map_err(|e| SimError::Config(format!("camera {}: {e}", self.camera_id)))?;
                entries
                    .iter()
                    .find_map(|e| match e.constants {
                        crate::model::ModelConstants::Brmoda(k)
                            if (r.dataset.is_none() || e.dataset == r.dataset)
                                && (r.task.is_none() || e.task == r.task) =>
                        {
                            Some(k)
                        }
                        _ => None,
                    })
                    .ok_or_else(|| {
                        SimError::Config(format!(
                            "camera {}: no brmoda entry matching {:?}/{:?} in {}",
                            self.camera_id, r.dataset, r.task, r.path
                        ))
                    })
            }
            (Some(_), Some(_)) => Err(SimError::Config(format!(
                "camera {}: constants and constants_ref are mutually exclusive",
                self.camera_id
            ))),
            (None, None) => Err(SimError::Config(format!(
                "camera {}: ground-truth constants required",
                self.camera_id
            ))),
        }
    }

    fn surrogate(&self, sigma: f64) -> Result<EncoderSurrogate, SimError> {
        let mut bands = BTreeMap::new();
        for entry in &self.surrogate {
            let res = Resolution::new(entry.width, entry.height)
                .map_err(|e| SimError::Config(format!("camera {}: {e}", self.camera_id)))?;
            bands.insert(res, entry.band);
        }
        EncoderSurrogate::new(bands, SurrogateBand::default(), sigma)
    }
}

// ---------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub seed: u64,
    pub budget: f64,
    /// Number of probe encodings spent on calibration, charged so that
    /// strategy comparisons account for the sweep cost.
    pub probe_count: usize,
    pub camera_fits: Vec<CameraFitOutcome>,
    pub strategies: Vec<StrategyOutcome>,
    pub plan: AllocationPlan,
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CameraFitOutcome {
    pub camera_id: String,
    pub r2: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyOutcome {
    pub name: String,
    /// Weighted sum of realized (ground-truth) errors.
    pub objective: f64,
    pub mean_error: f64,
    pub total_bitrate: f64,
    pub utilization: f64,
    pub feasible: bool,
}

/// Run the full calibrate -> fit -> plan -> evaluate loop.
pub fn run_calibration_loop(config: &SimConfig) -> Result<SimReport, SimError> {
    if config.cameras.is_empty() {
        return Err(SimError::Config("at least one camera required".into()));
    }
    if !(config.budget.is_finite() && config.budget > 0.0) {
        return Err(SimError::Config(format!(
            "budget {} must be > 0",
            config.budget
        )));
    }
    let quantum = config.quantum.unwrap_or(config.budget / 1e4);
    if !(quantum.is_finite() && quantum > 0.0) {
        return Err(SimError::Config(format!("quantum {quantum} must be > 0")));
    }

    // Assemble the world.
    let mut truth_map = BTreeMap::new();
    let mut surrogates = Vec::new();
    let mut resolutions_per_camera = Vec::new();
    for cam in &config.cameras {
        if cam.calibration_targets.is_empty() || cam.option_targets.is_empty() {
            return Err(SimError::Config(format!(
                "camera {}: calibration and option target grids must be non-empty",
                cam.camera_id
            )));
        }
        truth_map.insert(
            cam.camera_id.clone(),
            CameraTruth {
                brmoda: Some(cam.ground_truth_brmoda()?),
                qrmoda: cam.qrmoda_constants,
            },
        );
        surrogates.push(cam.surrogate(config.surrogate_sigma)?);
        resolutions_per_camera.push(cam.resolutions()?);
    }
    let gt = GroundTruth {
        cameras: truth_map,
        noise_sigma: config.observation_sigma,
    };

    // Phase 1 + 2: calibration sweep and per-camera fits.
    let mut probe_count = 0usize;
    let mut camera_fits = Vec::new();
    let mut fitted_options: Vec<CameraOptions> = Vec::new();
    for (i, cam) in config.cameras.iter().enumerate() {
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64);
        let surrogate = &surrogates[i];
        let truth_brmoda = gt.cameras[&cam.camera_id].brmoda.expect("set above");

        let mut points = Vec::new();
        for &res in &resolutions_per_camera[i] {
            for &target in &cam.calibration_targets {
                let actual = surrogate.noisy_actual(res, target, &mut rng);
                let setting = AdaptationSetting::bitrate(res, actual).map_err(|e| {
                    SimError::Calibration {
                        camera_id: cam.camera_id.clone(),
                        message: e.to_string(),
                    }
                })?;
                let observed = observe(&gt, &cam.camera_id, &setting, &mut rng)?;
                points.push(FitPoint {
                    resolution: res,
                    knob: actual,
                    observed,
                });
                probe_count += 1;
            }
        }

        let fit_cfg = FitConfig::new(config.seed);
        let result = fit::fit_brmoda(&points, truth_brmoda.bitrate_unit, &fit_cfg).map_err(
            |source| SimError::Fit {
                camera_id: cam.camera_id.clone(),
                source,
            },
        )?;
        camera_fits.push(CameraFitOutcome {
            camera_id: cam.camera_id.clone(),
            r2: result.r2,
            converged: result.converged,
        });

        let fitted = match result.constants {
            crate::model::ModelConstants::Brmoda(k) => k,
            _ => unreachable!(),
        };
        let profile = CameraProfile {
            camera_id: cam.camera_id.clone(),
            brmoda: fitted,
            qrmoda: None,
            resolutions: resolutions_per_camera[i].clone(),
            target_bitrates: cam.option_targets.clone(),
            weight: cam.weight,
        };
        fitted_options.push(planner::enumerate_options(&profile, surrogate)?.camera);
    }

    // Phase 3: plan on the fitted models.
    let plan = planner::plan_dp(&fitted_options, config.budget, quantum)?;

    // Phase 4: realized (noiseless ground truth) outcomes per strategy.
    let planned_outcome = score_plan(&gt, config, "planned", &plan)?;
    let uniform = uniform_split_plan(&gt, config, &surrogates, &resolutions_per_camera)?;
    let uniform_outcome = score_plan(&gt, config, "uniform_split", &uniform)?;
    let max_res = max_resolution_plan(&gt, config, &surrogates, &resolutions_per_camera)?;
    let max_res_outcome = score_plan(&gt, config, "max_resolution", &max_res)?;

    Ok(SimReport {
        seed: config.seed,
        budget: config.budget,
        probe_count,
        camera_fits,
        strategies: vec![planned_outcome, uniform_outcome, max_res_outcome],
        plan,
        config: config.clone(),
    })
}

fn weight_of(config: &SimConfig, camera_id: &str) -> f64 {
    config
        .cameras
        .iter()
        .find(|c| c.camera_id == camera_id)
        .map(|c| c.weight)
        .unwrap_or(1.0)
}

/// Score a plan's assignments against the ground truth, noiselessly.
fn score_plan(
    gt: &GroundTruth,
    config: &SimConfig,
    name: &str,
    plan: &AllocationPlan,
) -> Result<StrategyOutcome, SimError> {
    let mut objective = 0.0;
    let mut error_sum = 0.0;
    for a in &plan.assignments {
        let truth = gt
            .cameras
            .get(&a.camera_id)
            .ok_or_else(|| SimError::UnknownCamera(a.camera_id.clone()))?;
        let k = truth.brmoda.ok_or(SimError::KindMismatch {
            camera_id: a.camera_id.clone(),
            wanted: "brmoda",
        })?;
        let res = Resolution::new(a.width, a.height).map_err(SimError::Evaluation)?;
        let realized = clamp_error(k.eval(res, a.predicted_actual_bitrate)?);
        objective += weight_of(config, &a.camera_id) * realized;
        error_sum += realized;
    }
    Ok(StrategyOutcome {
        name: name.to_string(),
        objective,
        mean_error: error_sum / plan.assignments.len() as f64,
        total_bitrate: plan.total_bitrate,
        utilization: plan.total_bitrate / plan.budget,
        feasible: plan.feasible,
    })
}

/// Baseline: split the budget evenly and let each camera spend its
/// share on the biggest option that fits (falling back to its cheapest).
fn uniform_split_plan(
    gt: &GroundTruth,
    config: &SimConfig,
    surrogates: &[EncoderSurrogate],
    resolutions: &[Vec<Resolution>],
) -> Result<AllocationPlan, SimError> {
    baseline_plan(gt, config, surrogates, resolutions, |options, share| {
        options
            .iter()
            .filter(|o| o.predicted_actual_bitrate <= share)
            .max_by(|a, b| {
                a.predicted_actual_bitrate
                    .total_cmp(&b.predicted_actual_bitrate)
                    .then(a.resolution.pixel_count().cmp(&b.resolution.pixel_count()))
            })
            .copied()
    })
}

/// Baseline: always stream the largest resolution, at the biggest
/// target that fits the even share.
fn max_resolution_plan(
    gt: &GroundTruth,
    config: &SimConfig,
    surrogates: &[EncoderSurrogate],
    resolutions: &[Vec<Resolution>],
) -> Result<AllocationPlan, SimError> {
    baseline_plan(gt, config, surrogates, resolutions, |options, share| {
        let max_pixels = options
            .iter()
            .map(|o| o.resolution.pixel_count())
            .max()
            .unwrap_or(0);
        options
            .iter()
            .filter(|o| o.resolution.pixel_count() == max_pixels)
            .filter(|o| o.predicted_actual_bitrate <= share)
            .max_by(|a, b| {
                a.predicted_actual_bitrate
                    .total_cmp(&b.predicted_actual_bitrate)
            })
            .copied()
    })
}

fn baseline_plan(
    gt: &GroundTruth,
    config: &SimConfig,
    surrogates: &[EncoderSurrogate],
    resolutions: &[Vec<Resolution>],
    pick: impl Fn(&[planner::SettingOption], f64) -> Option<planner::SettingOption>,
) -> Result<AllocationPlan, SimError> {
    let share = config.budget / config.cameras.len() as f64;
    let mut assignments = Vec::new();
    let mut objective = 0.0;
    let mut total = 0.0;
    // Deterministic camera order, as the planner uses.
    let mut order: Vec<usize> = (0..config.cameras.len()).collect();
    order.sort_by(|&a, &b| config.cameras[a].camera_id.cmp(&config.cameras[b].camera_id));
    for &i in &order {
        let cam = &config.cameras[i];
        let truth = gt.cameras[&cam.camera_id]
            .brmoda
            .expect("ground truth present");
        let profile = CameraProfile {
            camera_id: cam.camera_id.clone(),
            brmoda: truth,
            qrmoda: None,
            resolutions: resolutions[i].clone(),
            target_bitrates: cam.option_targets.clone(),
            weight: cam.weight,
        };
        // Baselines pick settings without the fitted model; the scored
        // options only provide the bitrate side of the choice.
        let enumerated = planner::enumerate_options(&profile, &surrogates[i])?;
        let mut all = enumerated.camera.options;
        all.extend(enumerated.pruned);
        all.sort_by(|a, b| {
            a.predicted_actual_bitrate
                .total_cmp(&b.predicted_actual_bitrate)
                .then(a.resolution.pixel_count().cmp(&b.resolution.pixel_count()))
        });
        let chosen = pick(&all, share).unwrap_or_else(|| {
            *all.first().expect("non-empty option grid")
        });
        objective += cam.weight * chosen.predicted_error;
        total += chosen.predicted_actual_bitrate;
        assignments.push(planner::Assignment {
            camera_id: cam.camera_id.clone(),
            width: chosen.resolution.width(),
            height: chosen.resolution.height(),
            target_bitrate: chosen.target_bitrate,
            predicted_actual_bitrate: chosen.predicted_actual_bitrate,
            predicted_error: chosen.predicted_error,
        });
    }
    Ok(AllocationPlan {
        assignments,
        objective,
        total_bitrate: total,
        budget: config.budget,
        feasible: total <= config.budget,
    })
}

/// The ground-truth-optimal plan over the same option grid the
/// controller sees; used to check noiseless closed-loop consistency.
pub fn ground_truth_optimal_plan(config: &SimConfig) -> Result<AllocationPlan, SimError> {
    let mut cams = Vec::new();
    for cam in &config.cameras {
        let truth = cam.ground_truth_brmoda()?;
        let surrogate = cam.surrogate(0.0)?;
        let profile = CameraProfile {
            camera_id: cam.camera_id.clone(),
            brmoda: truth,
            qrmoda: None,
            resolutions: cam.resolutions()?,
            target_bitrates: cam.option_targets.clone(),
            weight: cam.weight,
        };
        cams.push(planner::enumerate_options(&profile, &surrogate)?.camera);
    }
    Ok(planner::brute_force_oracle(&cams, config.budget)?)
}

/// Fixed-width delimited summary of the strategies in a report.
pub fn compare_baselines(report: &SimReport) -> String {
    let mut out = String::from("strategy,objective,mean_error,total_bitrate,utilization,feasible\n");
    for s in &report.strategies {
        out.push_str(&format!(
            "{},{:.11e},{:.11e},{:.11e},{:.11e},{}\n",
            s.name, s.objective, s.mean_error, s.total_bitrate, s.utilization, s.feasible
        ));
    }
    out
}
