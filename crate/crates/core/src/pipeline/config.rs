use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_json, PipelineError};
use crate::camera::CameraIntrinsics;
use crate::depth::{HyperGrid, DEFAULT_TRAIN_FRACTION, DEFAULT_VARIANCE_EPSILON};
use crate::simulate::{DriveConfig, NoiseConfig, Scenario, SceneConfig};
use crate::triangulate::{DEFAULT_MEDIAN_MAX_ITER, DEFAULT_MEDIAN_TOL, DEFAULT_MIN_CANDIDATES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntrinsicsConfig {
    pub focal_length_mm: f64,
    pub sensor_width_mm: f64,
    pub sensor_height_mm: f64,
    pub image_width_px: f64,
    pub image_height_px: f64,
    /// Derived from the sensor when absent.
    pub hfov_deg: Option<f64>,
    pub mount_height_m: f64,
}

impl Default for IntrinsicsConfig {
    fn default() -> Self {
        Self {
            focal_length_mm: 3.6,
            sensor_width_mm: 5.184,
            sensor_height_mm: 3.888,
            image_width_px: 3840.0,
            image_height_px: 2160.0,
            hfov_deg: None,
            mount_height_m: 1.2,
        }
    }
}

impl IntrinsicsConfig {
    pub fn build(&self) -> Result<CameraIntrinsics, PipelineError> {
        Ok(CameraIntrinsics::new(
            self.focal_length_mm,
            self.sensor_width_mm,
            self.sensor_height_mm,
            self.image_width_px,
            self.image_height_px,
            self.hfov_deg,
            self.mount_height_m,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepthConfig {
    pub grid: HyperGrid,
    pub folds: usize,
    pub train_fraction: f64,
    pub variance_epsilon: f64,
    /// Drives whose ground distances feed training.
    pub train_scenarios: Vec<Scenario>,
}

impl Default for DepthConfig {
    fn default() -> Self {
        Self {
            grid: HyperGrid::default(),
            folds: 10,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            variance_epsilon: DEFAULT_VARIANCE_EPSILON,
            train_scenarios: vec![Scenario::InSlow],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeolocateConfig {
    /// Use the trained depth model; `false` triangulates with raw depth.
    pub correction: bool,
    pub min_candidates: usize,
    pub max_depth_m: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GeolocateConfig {
    fn default() -> Self {
        Self {
            correction: true,
            min_candidates: DEFAULT_MIN_CANDIDATES,
            max_depth_m: None,
            tol: DEFAULT_MEDIAN_TOL,
            max_iter: DEFAULT_MEDIAN_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    /// Average over every frame instead of using the nearest one.
    pub mean_over_frames: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub distance_bin_edges: Vec<f64>,
    pub plots: bool,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self { distance_bin_edges: vec![0.0, 10.0, 20.0, 30.0], plots: true }
    }
}

/// Input locations; relative paths resolve against the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Directory holding the scene files and one subdirectory per scenario.
    pub data_dir: PathBuf,
    pub model: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { data_dir: PathBuf::from("."), model: PathBuf::from(super::MODEL_FILE) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub intrinsics: IntrinsicsConfig,
    pub scene: SceneConfig,
    pub drive: DriveConfig,
    pub noise: NoiseConfig,
    pub scenarios: Vec<Scenario>,
    /// Keep one GPS-tagged frame per this many video frames.
    pub frame_stride: u64,
    /// Apply the control-point GPS offset correction when control points exist.
    pub correct_gps_offset: bool,
    pub depth: DepthConfig,
    pub geolocate: GeolocateConfig,
    pub measure: MeasureConfig,
    pub evaluate: EvaluateConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            intrinsics: IntrinsicsConfig::default(),
            scene: SceneConfig::default(),
            drive: DriveConfig::default(),
            noise: NoiseConfig::default(),
            scenarios: Scenario::ALL.to_vec(),
            frame_stride: crate::ingest::VIDEO_FPS,
            correct_gps_offset: true,
            depth: DepthConfig::default(),
            geolocate: GeolocateConfig::default(),
            measure: MeasureConfig::default(),
            evaluate: EvaluateConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let cfg: Self = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        self.intrinsics.build()?;
        if self.scenarios.is_empty() {
            return bad("at least one scenario is required".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = self.scenarios.iter().find(|s| !seen.insert(**s)) {
            return bad(format!("scenario {} listed twice", dup.label()));
        }
        if self.frame_stride == 0 {
            return bad("frame_stride must be at least 1".into());
        }
        if self.depth.folds < 2 {
            return bad(format!("depth.folds = {}, need at least 2", self.depth.folds));
        }
        if !(self.depth.train_fraction > 0.0 && self.depth.train_fraction < 1.0) {
            return bad(format!("depth.train_fraction {} not in (0, 1)", self.depth.train_fraction));
        }
        if !(self.depth.variance_epsilon > 0.0) {
            return bad("depth.variance_epsilon must be positive".into());
        }
        if self.depth.grid.cells().is_empty() {
            return bad("depth.grid has no cells".into());
        }
        for hp in self.depth.grid.cells() {
            hp.validate()?;
        }
        if self.depth.train_scenarios.is_empty() {
            return bad("depth.train_scenarios is empty".into());
        }
        if self.geolocate.min_candidates == 0 || !(self.geolocate.tol > 0.0) || self.geolocate.max_iter == 0 {
            return bad("geolocate needs min_candidates >= 1, tol > 0 and max_iter >= 1".into());
        }
        if self.geolocate.max_depth_m.is_some_and(|d| !(d > 0.0)) {
            return bad("geolocate.max_depth_m must be positive".into());
        }
        let edges = &self.evaluate.distance_bin_edges;
        if edges.is_empty() || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("evaluate.distance_bin_edges must be non-empty and strictly increasing".into());
        }
        Ok(())
    }

    pub fn resolve(&self, out: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            p.components().filter(|c| *c != std::path::Component::CurDir).fold(out.to_path_buf(), |acc, c| acc.join(c))
        }
    }

    pub fn data_dir(&self, out: &Path) -> PathBuf {
        self.resolve(out, &self.paths.data_dir)
    }

    pub fn model_path(&self, out: &Path) -> PathBuf {
        self.resolve(out, &self.paths.model)
    }
}
