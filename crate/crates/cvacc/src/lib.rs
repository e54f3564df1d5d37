//! Parametric models of face detection/recognition accuracy under
//! video-compression adaptations, plus the tooling to use them:
//! constant calibration from measurements, bandwidth-budget planning
//! across camera networks, and a seeded closed-loop simulator.
//!
//! - [`model`] — the QRMODA (quantization + resolution) and BRMODA
//!   (bitrate + resolution) accuracy models and their inversions.
//! - [`metrics`] — confusion-matrix metrics and goodness of fit.
//! - [`ingest`] — measurement CSV and constants JSON file formats.
//! - [`fit`] — damped least-squares calibration of model constants.
//! - [`planner`] — per-camera option ladders and budget allocation.
//! - [`sim`] — reproducible calibrate/fit/plan/evaluate simulations.

pub mod fit;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod planner;
pub mod sim;

pub use model::{
    AdaptationSetting, BitrateUnit, BrmodaConstants, ModelConstants, ModelError, ModelKind,
    QrmodaConstants, Resolution,
};
