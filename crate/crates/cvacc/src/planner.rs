//! Per-camera encoding-setting selection under a shared bandwidth
//! budget.
//!
//! Cameras carry fitted BRMODA constants; the planner scores each
//! candidate (resolution, target bitrate) option by its predicted
//! *actual* bitrate and clamped predicted error, then minimizes the
//! weighted sum of errors subject to the budget. `plan_dp` is exact on
//! the quantized knapsack; `plan_greedy` is the ratio baseline;
//! `brute_force_oracle` is the test ground truth.

use crate::model::{clamp_error, BrmodaConstants, ModelError, QrmodaConstants, Resolution};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("camera {camera_id}: {reason}")]
    InvalidProfile { camera_id: String, reason: String },
    #[error("invalid planner input: {0}")]
    InvalidInput(String),
    #[error("encoder surrogate failed for {resolution} at target {target}: {reason}")]
    Surrogate {
        resolution: Resolution,
        target: f64,
        reason: String,
    },
    #[error("instance too large for exhaustive enumeration: {combinations} combinations")]
    InstanceTooLarge { combinations: u128 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Maps a requested target bitrate to the bitrate the encoder would
/// actually produce. Planner-side prediction is deterministic.
pub trait BitratePredictor {
    fn actual_bitrate(&self, resolution: Resolution, target: f64) -> Result<f64, String>;
}

/// Predictor for an ideal encoder that hits its targets exactly.
pub struct IdentityPredictor;

impl BitratePredictor for IdentityPredictor {
    fn actual_bitrate(&self, _resolution: Resolution, target: f64) -> Result<f64, String> {
        Ok(target)
    }
}

/// Planning inputs for one camera.
#[derive(Debug, Clone)]
pub struct CameraProfile {
    pub camera_id: String,
    pub brmoda: BrmodaConstants,
    pub qrmoda: Option<QrmodaConstants>,
    pub resolutions: Vec<Resolution>,
    /// Candidate target bitrates, in the planner's bitrate unit.
    pub target_bitrates: Vec<f64>,
    /// Importance weight in the aggregate objective.
    pub weight: f64,
}

impl CameraProfile {
    fn validate(&self) -> Result<(), PlanError> {
        if self.resolutions.is_empty() || self.target_bitrates.is_empty() {
            return Err(PlanError::InvalidProfile {
                camera_id: self.camera_id.clone(),
                reason: "option lists must be non-empty".into(),
            });
        }
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return Err(PlanError::InvalidProfile {
                camera_id: self.camera_id.clone(),
                reason: format!("weight {} must be >= 0", self.weight),
            });
        }
        Ok(())
    }
}

/// One scored candidate setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingOption {
    pub resolution: Resolution,
    pub target_bitrate: f64,
    pub predicted_actual_bitrate: f64,
    pub predicted_error: f64,
}

/// A camera's scored option list, ready for allocation.
#[derive(Debug, Clone)]
pub struct CameraOptions {
    pub camera_id: String,
    pub weight: f64,
    pub options: Vec<SettingOption>,
}

/// Result of option enumeration: the surviving Pareto frontier plus the
/// dominated options that were pruned.
#[derive(Debug, Clone)]
pub struct EnumeratedOptions {
    pub camera: CameraOptions,
    pub pruned: Vec<SettingOption>,
}

/// Score the cross product of a camera's resolutions and targets, then
/// prune options dominated in both bitrate and error.
pub fn enumerate_options(
    profile: &CameraProfile,
    surrogate: &dyn BitratePredictor,
) -> Result<EnumeratedOptions, PlanError> {
    profile.validate()?;
    let mut all = Vec::with_capacity(profile.resolutions.len() * profile.target_bitrates.len());
    for &resolution in &profile.resolutions {
        for &target in &profile.target_bitrates {
            let actual = surrogate
                .actual_bitrate(resolution, target)
                .map_err(|reason| PlanError::Surrogate {
                    resolution,
                    target,
                    reason,
                })?;
            if !(actual.is_finite() && actual > 0.0) {
                return Err(PlanError::Surrogate {
                    resolution,
                    target,
                    reason: format!("predicted actual bitrate {actual} not positive"),
                });
            }
            let predicted_error = clamp_error(profile.brmoda.eval(resolution, actual)?);
            all.push(SettingOption {
                resolution,
                target_bitrate: target,
                predicted_actual_bitrate: actual,
                predicted_error,
            });
        }
    }

    let dominated = |a: &SettingOption, b: &SettingOption| -> bool {
        // b dominates a.
        b.predicted_actual_bitrate <= a.predicted_actual_bitrate
            && b.predicted_error <= a.predicted_error
            && (b.predicted_actual_bitrate < a.predicted_actual_bitrate
                || b.predicted_error < a.predicted_error)
    };
    let mut kept = Vec::new();
    let mut pruned = Vec::new();
    'outer: for (i, a) in all.iter().enumerate() {
        for (j, b) in all.iter().enumerate() {
            if i != j && dominated(a, b) {
                pruned.push(*a);
                continue 'outer;
            }
            // Exact ties: keep only the first occurrence.
            if j < i
                && b.predicted_actual_bitrate == a.predicted_actual_bitrate
                && b.predicted_error == a.predicted_error
            {
                pruned.push(*a);
                continue 'outer;
            }
        }
        kept.push(*a);
    }
    Ok(EnumeratedOptions {
        camera: CameraOptions {
            camera_id: profile.camera_id.clone(),
            weight: profile.weight,
            options: kept,
        },
        pruned,
    })
}

/// One camera's selected setting within a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub camera_id: String,
    pub width: u32,
    pub height: u32,
    pub target_bitrate: f64,
    pub predicted_actual_bitrate: f64,
    pub predicted_error: f64,
}

impl Assignment {
    fn new(camera_id: &str, option: &SettingOption) -> Self {
        Assignment {
            camera_id: camera_id.to_string(),
            width: option.resolution.width(),
            height: option.resolution.height(),
            target_bitrate: option.target_bitrate,
            predicted_actual_bitrate: option.predicted_actual_bitrate,
            predicted_error: option.predicted_error,
        }
    }
}

/// A complete allocation: one option per camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub assignments: Vec<Assignment>,
    /// Weighted sum of predicted errors.
    pub objective: f64,
    /// Sum of predicted actual bitrates.
    pub total_bitrate: f64,
    pub budget: f64,
    pub feasible: bool,
}

fn check_instance(cameras: &[CameraOptions], budget: f64) -> Result<(), PlanError> {
    if cameras.is_empty() {
        return Err(PlanError::InvalidInput("no cameras".into()));
    }
    if !(budget.is_finite() && budget > 0.0) {
        return Err(PlanError::InvalidInput(format!(
            "budget {budget} must be > 0"
        )));
    }
    for cam in cameras {
        if cam.options.is_empty() {
            return Err(PlanError::InvalidProfile {
                camera_id: cam.camera_id.clone(),
                reason: "no options".into(),
            });
        }
        if !(cam.weight.is_finite() && cam.weight >= 0.0) {
            return Err(PlanError::InvalidProfile {
                camera_id: cam.camera_id.clone(),
                reason: format!("weight {} must be >= 0", cam.weight),
            });
        }
    }
    Ok(())
}

/// Deterministic camera processing order: lexicographic by camera_id.
fn sorted_indices(cameras: &[CameraOptions]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..cameras.len()).collect();
    idx.sort_by(|&a, &b| cameras[a].camera_id.cmp(&cameras[b].camera_id));
    idx
}

/// Index of each camera's cheapest option (min bitrate, ties to lower
/// error then lower index).
fn cheapest_option(cam: &CameraOptions) -> usize {
    let mut best = 0;
    for (i, o) in cam.options.iter().enumerate().skip(1) {
        let b = &cam.options[best];
        if o.predicted_actual_bitrate < b.predicted_actual_bitrate
            || (o.predicted_actual_bitrate == b.predicted_actual_bitrate
                && o.predicted_error < b.predicted_error)
        {
            best = i;
        }
    }
    best
}

fn build_plan(
    cameras: &[CameraOptions],
    order: &[usize],
    choice: &[usize],
    budget: f64,
    feasible: bool,
) -> AllocationPlan {
    let mut assignments = Vec::with_capacity(order.len());
    let mut objective = 0.0;
    let mut total_bitrate = 0.0;
    for (pos, &ci) in order.iter().enumerate() {
        let cam = &cameras[ci];
        let opt = &cam.options[choice[pos]];
        objective += cam.weight * opt.predicted_error;
        total_bitrate += opt.predicted_actual_bitrate;
        assignments.push(Assignment::new(&cam.camera_id, opt));
    }
    AllocationPlan {
        assignments,
        objective,
        total_bitrate,
        budget,
        feasible,
    }
}

/// Infeasible verdict: every camera shown at its cheapest option as the
/// per-camera minimum diagnostic.
fn infeasible_plan(cameras: &[CameraOptions], order: &[usize], budget: f64) -> AllocationPlan {
    let choice: Vec<usize> = order.iter().map(|&ci| cheapest_option(&cameras[ci])).collect();
    build_plan(cameras, order, &choice, budget, false)
}

/// Exact optimum of the quantized multiple-choice knapsack.
///
/// Bitrates are ceiling-rounded to multiples of `quantum`, which keeps
/// every quantized-feasible plan feasible at true bitrates. Ties break
/// lexicographically by (camera_id, option index).
pub fn plan_dp(
    cameras: &[CameraOptions],
    budget: f64,
    quantum: f64,
) -> Result<AllocationPlan, PlanError> {
    check_instance(cameras, budget)?;
    if !(quantum.is_finite() && quantum > 0.0) {
        return Err(PlanError::InvalidInput(format!(
            "quantum {quantum} must be > 0"
        )));
    }
    let order = sorted_indices(cameras);
    let capacity = (budget / quantum).floor() as usize;
    if capacity == 0 {
        return Ok(infeasible_plan(cameras, &order, budget));
    }

    // Ceiling-rounded integer weights per option; options heavier than
    // the whole budget can never be chosen.
    let weights: Vec<Vec<Option<usize>>> = order
        .iter()
        .map(|&ci| {
            cameras[ci]
                .options
                .iter()
                .map(|o| {
                    let w = (o.predicted_actual_bitrate / quantum).ceil() as u128;
                    (w <= capacity as u128).then_some(w as usize)
                })
                .collect()
        })
        .collect();

    const UNSET: u32 = u32::MAX;
    let cols = capacity + 1;
    let mut value = vec![0.0_f64; cols]; // zero cameras placed
    let mut choice: Vec<Vec<u32>> = Vec::with_capacity(order.len());

    for (layer, &ci) in order.iter().enumerate() {
        let cam = &cameras[ci];
        let mut next = vec![f64::INFINITY; cols];
        let mut pick = vec![UNSET; cols];
        for (oi, opt) in cam.options.iter().enumerate() {
            let Some(w) = weights[layer][oi] else { continue };
            let cost = cam.weight * opt.predicted_error;
            for j in w..cols {
                let base = value[j - w];
                if base.is_finite() {
                    let candidate = base + cost;
                    // Strict improvement keeps the lowest option index
                    // on ties.
                    if candidate < next[j] {
                        next[j] = candidate;
                        pick[j] = oi as u32;
                    }
                }
            }
        }
        value = next;
        choice.push(pick);
    }

    if !value[capacity].is_finite() {
        return Ok(infeasible_plan(cameras, &order, budget));
    }

    // Walk back through the layers to recover the chosen options.
    let mut chosen = vec![0usize; order.len()];
    let mut j = capacity;
    for layer in (0..order.len()).rev() {
        let oi = choice[layer][j] as usize;
        chosen[layer] = oi;
        let w = weights[layer][oi].expect("chosen option fits");
        j -= w;
    }
    Ok(build_plan(cameras, &order, &chosen, budget, true))
}

/// Ratio-greedy baseline: start every camera at its cheapest option and
/// repeatedly apply the upgrade with the best error-drop per bitrate
/// that still fits.
pub fn plan_greedy(cameras: &[CameraOptions], budget: f64) -> Result<AllocationPlan, PlanError> {
    check_instance(cameras, budget)?;
    let order = sorted_indices(cameras);
    let mut choice: Vec<usize> = order.iter().map(|&ci| cheapest_option(&cameras[ci])).collect();
    let mut total: f64 = order
        .iter()
        .zip(&choice)
        .map(|(&ci, &oi)| cameras[ci].options[oi].predicted_actual_bitrate)
        .sum();
    if total > budget {
        return Ok(infeasible_plan(cameras, &order, budget));
    }

    loop {
        // Best upgrade: (camera position, option index, ratio).
        let mut best: Option<(usize, usize, f64)> = None;
        for (pos, &ci) in order.iter().enumerate() {
            let cam = &cameras[ci];
            let cur = &cam.options[choice[pos]];
            for (oi, opt) in cam.options.iter().enumerate() {
                if opt.predicted_error >= cur.predicted_error {
                    continue;
                }
                let extra = opt.predicted_actual_bitrate - cur.predicted_actual_bitrate;
                if total + extra > budget {
                    continue;
                }
                let gain = cam.weight * (cur.predicted_error - opt.predicted_error);
                let ratio = if extra <= 0.0 {
                    f64::INFINITY
                } else {
                    gain / extra
                };
                let better = match best {
                    None => true,
                    Some((_, _, r)) => ratio > r,
                };
                if better {
                    best = Some((pos, oi, ratio));
                }
            }
        }
        match best {
            Some((pos, oi, _)) => {
                let ci = order[pos];
                total += cameras[ci].options[oi].predicted_actual_bitrate
                    - cameras[ci].options[choice[pos]].predicted_actual_bitrate;
                choice[pos] = oi;
            }
            None => break,
        }
    }
    Ok(build_plan(cameras, &order, &choice, budget, true))
}

/// Exhaustive enumeration ground truth. Refuses instances with more
/// than 10^6 option combinations.
pub fn brute_force_oracle(
    cameras: &[CameraOptions],
    budget: f64,
) -> Result<AllocationPlan, PlanError> {
    check_instance(cameras, budget)?;
    let order = sorted_indices(cameras);
    let combinations: u128 = order
        .iter()
        .map(|&ci| cameras[ci].options.len() as u128)
        .product();
    if combinations > 1_000_000 {
        return Err(PlanError::InstanceTooLarge { combinations });
    }

    let mut current = vec![0usize; order.len()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let mut total = 0.0;
        let mut objective = 0.0;
        for (pos, &ci) in order.iter().enumerate() {
            let opt = &cameras[ci].options[current[pos]];
            total += opt.predicted_actual_bitrate;
            objective += cameras[ci].weight * opt.predicted_error;
        }
        if total <= budget {
            // Strict improvement: the first combination in lexicographic
            // (camera_id, option index) order wins ties.
            let better = match &best {
                None => true,
                Some((obj, _)) => objective < *obj,
            };
            if better {
                best = Some((objective, current.clone()));
            }
        }
        // Advance the mixed-radix counter.
        let mut pos = order.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            current[pos] += 1;
            if current[pos] < cameras[order[pos]].options.len() {
                break;
            }
            current[pos] = 0;
            if pos == 0 {
                pos = usize::MAX;
                break;
            }
        }
        if pos == usize::MAX {
            break;
        }
    }

    match best {
        Some((_, choice)) => Ok(build_plan(cameras, &order, &choice, budget, true)),
        None => Ok(infeasible_plan(cameras, &order, budget)),
    }
}

/// Pick the cheapest plausible (resolution, Qp) pair meeting an error
/// budget under QRMODA: maximal Qp, ties to the smallest pixel count.
/// QRMODA has no bitrate term, so Qp and pixel count serve as the cost
/// proxies.
pub fn qp_ladder_select(
    constants: &QrmodaConstants,
    resolutions: &[Resolution],
    error_budget: f64,
) -> Result<Option<(Resolution, u8)>, ModelError> {
    if !(0.0..=1.0).contains(&error_budget) {
        return Err(ModelError::InvalidInput {
            name: "error_budget",
            value: error_budget,
            requirement: "must lie in [0, 1]",
        });
    }
    let mut best: Option<(Resolution, u8)> = None;
    for &res in resolutions {
        if let Some(qp) = constants.max_qp_for_error(res, error_budget)? {
            let better = match best {
                None => true,
                Some((bres, bqp)) => {
                    qp > bqp
                        || (qp == bqp
                            && (res.pixel_count(), res.width())
                                < (bres.pixel_count(), bres.width()))
                }
            };
            if better {
                best = Some((res, qp));
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BrmodaConstants;

    fn test_brmoda() -> BrmodaConstants {
        BrmodaConstants::new(0.3, 0.15, -0.01, 0.4, -0.002, None).unwrap()
    }

    fn profile(id: &str) -> CameraProfile {
        CameraProfile {
            camera_id: id.to_string(),
            brmoda: test_brmoda(),
            qrmoda: None,
            resolutions: vec![
                Resolution::new(600, 450).unwrap(),
                Resolution::new(160, 120).unwrap(),
            ],
            target_bitrates: vec![100.0, 400.0, 1200.0],
            weight: 1.0,
        }
    }

    #[test]
    fn enumerate_cross_product_identity_surrogate() {
        let e = enumerate_options(&profile("cam0"), &IdentityPredictor).unwrap();
        assert!(e.camera.options.len() + e.pruned.len() == 6);
        for o in e.camera.options.iter().chain(e.pruned.iter()) {
            assert_eq!(o.predicted_actual_bitrate, o.target_bitrate);
            assert!((0.0..=1.0).contains(&o.predicted_error));
        }
    }

    #[test]
    fn enumerate_prunes_dominated() {
        // At equal bitrate the larger resolution has strictly lower
        // error here, so every small-resolution option is dominated.
        let e = enumerate_options(&profile("cam0"), &IdentityPredictor).unwrap();
        assert!(!e.pruned.is_empty());
        for p in &e.pruned {
            assert!(e.camera.options.iter().any(|k| {
                k.predicted_actual_bitrate <= p.predicted_actual_bitrate
                    && k.predicted_error <= p.predicted_error
            }));
        }
    }

    fn options_from(values: &[(f64, f64)]) -> Vec<SettingOption> {
        values
            .iter()
            .map(|&(bitrate, error)| SettingOption {
                resolution: Resolution::new(100, 100).unwrap(),
                target_bitrate: bitrate,
                predicted_actual_bitrate: bitrate,
                predicted_error: error,
            })
            .collect()
    }

    fn cam(id: &str, weight: f64, values: &[(f64, f64)]) -> CameraOptions {
        CameraOptions {
            camera_id: id.to_string(),
            weight,
            options: options_from(values),
        }
    }

    #[test]
    fn single_camera_unconstrained_takes_min_error() {
        let cams = vec![cam("a", 1.0, &[(10.0, 0.5), (20.0, 0.2), (30.0, 0.1)])];
        let plan = plan_dp(&cams, 100.0, 1.0).unwrap();
        assert!(plan.feasible);
        assert_eq!(plan.assignments[0].predicted_error, 0.1);
    }

    #[test]
    fn infeasible_when_cheapest_exceeds_budget() {
        let cams = vec![
            cam("a", 1.0, &[(60.0, 0.5)]),
            cam("b", 1.0, &[(50.0, 0.4)]),
        ];
        let plan = plan_dp(&cams, 100.0, 1.0).unwrap();
        assert!(!plan.feasible);
        // Diagnostic shows per-camera minima.
        assert_eq!(plan.total_bitrate, 110.0);
        let oracle = brute_force_oracle(&cams, 100.0).unwrap();
        assert!(!oracle.feasible);
        let greedy = plan_greedy(&cams, 100.0).unwrap();
        assert!(!greedy.feasible);
    }

    #[test]
    fn dp_matches_oracle_small_instance() {
        let cams = vec![
            cam("a", 1.0, &[(10.0, 0.9), (20.0, 0.5), (40.0, 0.1)]),
            cam("b", 2.0, &[(10.0, 0.8), (30.0, 0.3)]),
            cam("c", 1.0, &[(5.0, 0.7), (25.0, 0.2), (45.0, 0.05)]),
        ];
        let budget = 80.0;
        let dp = plan_dp(&cams, budget, 1.0).unwrap();
        let oracle = brute_force_oracle(&cams, budget).unwrap();
        assert!((dp.objective - oracle.objective).abs() < 1e-9);
        assert!(dp.total_bitrate <= budget);
        let greedy = plan_greedy(&cams, budget).unwrap();
        assert!(greedy.objective >= dp.objective - 1e-9);
    }

    #[test]
    fn greedy_single_camera_matches_dp() {
        let cams = vec![cam("a", 1.0, &[(10.0, 0.5), (20.0, 0.2), (30.0, 0.1)])];
        let dp = plan_dp(&cams, 25.0, 1.0).unwrap();
        let greedy = plan_greedy(&cams, 25.0).unwrap();
        assert_eq!(dp.objective, greedy.objective);
    }

    #[test]
    fn greedy_loses_on_concave_frontier() {
        // The intermediate upgrade has the better ratio, but taking it
        // on both cameras burns the budget needed for the jackpot
        // option on either.
        let cams = vec![
            cam("a", 1.0, &[(10.0, 1.0), (30.0, 0.55), (110.0, 0.0)]),
            cam("b", 1.0, &[(10.0, 1.0), (30.0, 0.55), (110.0, 0.0)]),
        ];
        let budget = 120.0;
        let dp = plan_dp(&cams, budget, 1.0).unwrap();
        let greedy = plan_greedy(&cams, budget).unwrap();
        let oracle = brute_force_oracle(&cams, budget).unwrap();
        assert!((dp.objective - oracle.objective).abs() < 1e-9);
        assert!(greedy.objective > dp.objective + 1e-9);
    }

    #[test]
    fn oracle_one_option_per_camera() {
        let cams = vec![cam("a", 1.0, &[(10.0, 0.4)]), cam("b", 1.0, &[(20.0, 0.3)])];
        let plan = brute_force_oracle(&cams, 100.0).unwrap();
        assert!(plan.feasible);
        assert_eq!(plan.assignments.len(), 2);
        assert!((plan.objective - 0.7).abs() < 1e-12);
    }

    #[test]
    fn oracle_rejects_huge_instances() {
        let values: Vec<(f64, f64)> = (0..101).map(|i| (f64::from(i) + 1.0, 0.5)).collect();
        let cams = vec![
            cam("a", 1.0, &values),
            cam("b", 1.0, &values),
            cam("c", 1.0, &values),
        ];
        assert!(matches!(
            brute_force_oracle(&cams, 100.0),
            Err(PlanError::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn budget_monotonicity() {
        let cams = vec![
            cam("a", 1.0, &[(10.0, 0.9), (20.0, 0.5), (40.0, 0.1)]),
            cam("b", 1.0, &[(10.0, 0.8), (30.0, 0.3)]),
        ];
        let mut prev = f64::INFINITY;
        for budget in [20.0, 30.0, 40.0, 50.0, 70.0, 100.0] {
            let plan = plan_dp(&cams, budget, 1.0).unwrap();
            if plan.feasible {
                assert!(plan.objective <= prev + 1e-12);
                prev = plan.objective;
            }
        }
    }

    #[test]
    fn weight_scaling_leaves_argmin_unchanged() {
        let base = vec![
            cam("a", 1.0, &[(10.0, 0.9), (20.0, 0.5), (40.0, 0.1)]),
            cam("b", 3.0, &[(10.0, 0.8), (30.0, 0.3)]),
        ];
        let scaled: Vec<CameraOptions> = base
            .iter()
            .map(|c| CameraOptions {
                camera_id: c.camera_id.clone(),
                weight: c.weight * 7.5,
                options: c.options.clone(),
            })
            .collect();
        let a = plan_dp(&base, 60.0, 1.0).unwrap();
        let b = plan_dp(&scaled, 60.0, 1.0).unwrap();
        assert_eq!(a.assignments, b.assignments);
    }

    #[test]
    fn qp_ladder_basic() {
        let k = QrmodaConstants::new(24.03, 0.05211, 0.61, 0.3838, -0.2864).unwrap();
        let res = Resolution::new(600, 450).unwrap();
        let budget = k.c3 + k.c4 / 2.0;
        let got = qp_ladder_select(&k, &[res], budget).unwrap();
        assert_eq!(got, Some((res, 46)));

        // Everything feasible: smallest resolution at Qp 51.
        let small = Resolution::new(160, 120).unwrap();
        let all = qp_ladder_select(&k, &[res, small], clamp_error(k.c3 + k.c4)).unwrap();
        assert_eq!(all, Some((small, 51)));

        // Unreachable floor.
        assert_eq!(qp_ladder_select(&k, &[res, small], k.c3 / 2.0).unwrap(), None);
    }
}
