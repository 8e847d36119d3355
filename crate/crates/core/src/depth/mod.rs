//! Learned correction from raw monocular depth to metric ground distance.

mod cv;
mod model;
pub mod tree;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::CameraIntrinsics;
use crate::ingest::Observation;
use crate::triangulate::CameraPose;

pub use cv::{evaluate_model, grid_search_cv, frame_folds, CellScore, CvReport, HyperGrid, ScaleMetrics};
pub use model::{train, train_with_history, CorrectionModel, Hyperparams, DEFAULT_MIN_DISTANCE_M, MODEL_FORMAT, MODEL_VERSION};

pub const DEFAULT_VARIANCE_EPSILON: f64 = 0.01;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;
pub const FEATURE_NAMES: [&str; 6] = ["raw_depth", "u_norm", "v_norm", "lat", "lon", "azimuth"];
pub const N_FEATURES: usize = FEATURE_NAMES.len();

#[derive(Debug, Error)]
pub enum DepthError {
    #[error("incomplete observation for {object_id} in frame {frame_id}: {reason}")]
    IncompleteObservation { object_id: String, frame_id: u64, reason: String },
    #[error("invalid training data: {0}")]
    InvalidData(String),
    #[error("cannot split: need at least 2 distinct frames, found {0}")]
    CannotSplit(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model format: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthFeatures {
    pub raw_depth: f64,
    pub u_norm: f64,
    pub v_norm: f64,
    pub lat: f64,
    pub lon: f64,
    pub azimuth: f64,
}

impl DepthFeatures {
    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [self.raw_depth, self.u_norm, self.v_norm, self.lat, self.lon, self.azimuth]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub features: DepthFeatures,
    pub ground_distance: f64,
    pub weight: f64,
    pub frame_id: u64,
}

pub fn extract_features(
    obs: &Observation,
    pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
) -> Result<DepthFeatures, DepthError> {
    let incomplete = |reason: String| DepthError::IncompleteObservation {
        object_id: obs.object_id.clone(),
        frame_id: obs.frame_id,
        reason,
    };
    if let Some(bad) = obs.depth_samples.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(incomplete(format!("depth sample {bad} is not a positive number")));
    }
    let u_norm = obs.pixel.u / intrinsics.image_width;
    let v_norm = obs.pixel.v / intrinsics.image_height;
    if !(0.0..=1.0).contains(&u_norm) || !(0.0..=1.0).contains(&v_norm) {
        return Err(incomplete(format!("pixel ({}, {}) outside the image", obs.pixel.u, obs.pixel.v)));
    }
    Ok(DepthFeatures {
        raw_depth: obs.raw_depth(),
        u_norm,
        v_norm,
        lat: pose.position.lat,
        lon: pose.position.lon,
        azimuth: pose.azimuth,
    })
}

/// Inverse sample variance (n − 1 denominator) of the depth samples,
/// floored by `epsilon`.
pub fn variance_weight(samples: &[f64; 3], epsilon: f64) -> f64 {
    let m = samples.iter().sum::<f64>() / 3.0;
    let var = samples.iter().map(|s| (s - m).powi(2)).sum::<f64>() / 2.0;
    1.0 / (epsilon + var)
}

/// Rescales weights in place to mean 1. All-zero input is left alone.
pub fn normalize_weights(weights: &mut [f64]) {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || total <= 0.0 {
        return;
    }
    let scale = weights.len() as f64 / total;
    for w in weights {
        *w *= scale;
    }
}

/// Distinct frame ids in ascending order, shuffled with `seed`.
pub(crate) fn shuffled_frames(samples: &[TrainingSample], seed: u64) -> Vec<u64> {
    let mut frames: Vec<u64> = samples.iter().map(|s| s.frame_id).collect::<BTreeSet<_>>().into_iter().collect();
    frames.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    frames
}

/// Partitions samples by frame so no frame contributes to both sides.
pub fn split_by_frame(
    samples: &[TrainingSample],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<TrainingSample>, Vec<TrainingSample>), DepthError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DepthError::InvalidConfig(format!("train fraction {train_fraction} not in (0, 1)")));
    }
    let frames = shuffled_frames(samples, seed);
    if frames.len() < 2 {
        return Err(DepthError::CannotSplit(frames.len()));
    }
    let n_train = ((train_fraction * frames.len() as f64).round() as usize).clamp(1, frames.len() - 1);
    let train_frames: BTreeSet<u64> = frames[..n_train].iter().copied().collect();
    Ok(samples.iter().partition(|s| train_frames.contains(&s.frame_id)))
}
