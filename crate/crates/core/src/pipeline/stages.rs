use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_json, scenario_dir, write_json, PipelineError, RunConfig};
use crate::camera::{estimate_height, estimate_width, terrain_correction, CameraIntrinsics, PixelMeasurement, TerrainContext};
use crate::depth::{
    extract_features, grid_search_cv, split_by_frame, variance_weight, CorrectionModel, CvReport, TrainingSample,
};
use crate::geodesy::GeoPoint;
use crate::ingest::{
    correct_gps_offset, read_control_points, read_dem, read_ground_distances, read_observations, read_track,
    resolve_poses, sample_dem, sample_frames, DemError, DemGrid, FeatureCollection, Feature, Observation,
    OffsetOptions,
};
use crate::simulate::{
    generate_scene, render_observations, write_run, write_scene, Scenario, CONTROL_POINTS_FILE, DEM_FILE,
    GROUND_DISTANCES_FILE, OBSERVATIONS_FILE, TRACK_FILE,
};
use crate::triangulate::{geolocate_object, CameraPose, GeolocateOptions, Sighting};

pub const MODEL_FILE: &str = "model.json";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const ESTIMATES_FILE: &str = "estimates.geojson";
pub const MEASUREMENTS_FILE: &str = "measurements.json";

/// Generates one scene and renders every configured scenario over it.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<(), PipelineError> {
    let intrinsics = cfg.intrinsics.build()?;
    let data = cfg.data_dir(out);
    let scene = generate_scene(&cfg.scene, cfg.seed)?;
    write_scene(&data, &scene)?;
    for &s in &cfg.scenarios {
        let run = render_observations(&scene, s, &intrinsics, &cfg.drive, &cfg.noise, cfg.seed)?;
        log::info!("{}: {} poses, {} observations", s.label(), run.true_poses.len(), run.observations.len());
        write_run(&scenario_dir(&data, s), &run)?;
    }
    Ok(())
}

/// Sampled, offset-corrected camera poses of one drive, keyed by frame id.
pub fn load_poses(cfg: &RunConfig, dir: &Path) -> Result<BTreeMap<u64, CameraPose>, PipelineError> {
    let track = sample_frames(&read_track(&dir.join(TRACK_FILE))?, cfg.frame_stride)?;
    let control = dir.join(CONTROL_POINTS_FILE);
    let track = if cfg.correct_gps_offset && control.exists() {
        let pairs = read_control_points(&control)?;
        let (corrected, info) = correct_gps_offset(&track, &pairs, &OffsetOptions::default())?;
        log::info!(
            "{}: gps shift ({:.3}, {:.3}) m from {} control pair(s)",
            dir.display(),
            info.shift.x,
            info.shift.y,
            pairs.len()
        );
        corrected
    } else {
        track
    };
    Ok(resolve_poses(&track)?.into_iter().map(|r| (r.pose.frame_id, r.pose)).collect())
}

fn load_model(cfg: &RunConfig, out: &Path) -> Result<Option<CorrectionModel>, PipelineError> {
    if !cfg.geolocate.correction {
        return Ok(None);
    }
    let path = cfg.model_path(out);
    let text = std::fs::read_to_string(&path)
        .map_err(|source| PipelineError::Read { path: path.display().to_string(), source })?;
    Ok(Some(CorrectionModel::from_json(&text)?))
}

/// Observations of one drive joined to their poses and range estimates,
/// grouped by object.
struct DriveSightings {
    by_object: BTreeMap<String, Vec<(Sighting, Observation)>>,
}

fn drive_sightings(
    cfg: &RunConfig,
    dir: &Path,
    intrinsics: &CameraIntrinsics,
    model: Option<&CorrectionModel>,
) -> Result<DriveSightings, PipelineError> {
    let observations = read_observations(&dir.join(OBSERVATIONS_FILE))?;
    let poses = load_poses(cfg, dir)?;
    let mut by_object: BTreeMap<String, Vec<(Sighting, Observation)>> = BTreeMap::new();
    let mut orphans = 0usize;
    for obs in observations {
        let entry = by_object.entry(obs.object_id.clone()).or_default();
        let Some(pose) = poses.get(&obs.frame_id) else {
            orphans += 1;
            continue;
        };
        let depth = match model {
            Some(m) => m.predict(&extract_features(&obs, pose, intrinsics)?),
            None => obs.raw_depth(),
        };
        entry.push((Sighting { pose: *pose, pixel: obs.pixel, depth }, obs));
    }
    if orphans > 0 {
        log::warn!("{}: {orphans} observation(s) reference frames without a usable pose", dir.display());
    }
    Ok(DriveSightings { by_object })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub n_samples: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_train_frames: usize,
    pub n_test_frames: usize,
    pub cv: CvReport,
}

/// Training samples from the drives listed in `depth.train_scenarios`. Frame
/// ids are offset per drive so frames from different drives never share a
/// grouping key.
pub fn training_samples(
    cfg: &RunConfig,
    out: &Path,
    intrinsics: &CameraIntrinsics,
) -> Result<Vec<TrainingSample>, PipelineError> {
    let data = cfg.data_dir(out);
    let mut samples = Vec::new();
    for (i, &s) in cfg.depth.train_scenarios.iter().enumerate() {
        let dir = scenario_dir(&data, s);
        let observations = read_observations(&dir.join(OBSERVATIONS_FILE))?;
        let poses = load_poses(cfg, &dir)?;
        let distances: BTreeMap<(String, u64), f64> = read_ground_distances(&dir.join(GROUND_DISTANCES_FILE))?
            .into_iter()
            .map(|g| ((g.object_id, g.frame_id), g.distance_m))
            .collect();
        let mut skipped = 0usize;
        for obs in &observations {
            let (Some(pose), Some(&distance)) =
                (poses.get(&obs.frame_id), distances.get(&(obs.object_id.clone(), obs.frame_id)))
            else {
                skipped += 1;
                continue;
            };
            samples.push(TrainingSample {
                features: extract_features(obs, pose, intrinsics)?,
                ground_distance: distance,
                weight: variance_weight(&obs.depth_samples, cfg.depth.variance_epsilon),
                frame_id: ((i as u64) << 40) | obs.frame_id,
            });
        }
        if skipped > 0 {
            log::warn!("{}: {skipped} observation(s) without pose or ground distance", s.label());
        }
    }
    if samples.is_empty() {
        return Err(PipelineError::Input("no training samples".into()));
    }
    Ok(samples)
}

/// Frame-level 70/30 split, grid search with k-fold CV, final retrain.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<TrainReport, PipelineError> {
    let intrinsics = cfg.intrinsics.build()?;
    let samples = training_samples(cfg, out, &intrinsics)?;
    let (train, test) = split_by_frame(&samples, cfg.depth.train_fraction, cfg.seed)?;
    let frames = |s: &[TrainingSample]| s.iter().map(|x| x.frame_id).collect::<BTreeSet<_>>().len();
    let (cv, model) = grid_search_cv(&train, &test, &cfg.depth.grid, cfg.depth.folds, cfg.seed)?;
    log::info!("best {:?}, cv mae {:.4}", cv.best_hyperparams, cv.mean_cv_mae);
    let report = TrainReport {
        n_samples: samples.len(),
        n_train: train.len(),
        n_test: test.len(),
        n_train_frames: frames(&train),
        n_test_frames: frames(&test),
        cv,
    };
    let mut text = model.to_json();
    text.push('\n');
    super::write_text(&cfg.model_path(out), &text)?;
    write_json(&out.join(TRAIN_REPORT_FILE), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateProps {
    pub object_id: String,
    pub n_candidates: usize,
    pub dispersion_m: f64,
    pub converged: bool,
    /// `"corrected"` or `"raw"`.
    pub depth_source: String,
    pub first_frame: u64,
    pub last_frame: u64,
    /// Camera positions of the first and last sighting, `[lon, lat]`.
    pub first_camera: [f64; 2],
    pub last_camera: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unlocatable {
    pub object_id: String,
    pub reason: String,
}

/// GeoJSON feature collection of located objects; objects that could not be
/// located are listed under the extra `unlocatable` member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatesFile {
    #[serde(flatten)]
    pub located: FeatureCollection<EstimateProps>,
    pub unlocatable: Vec<Unlocatable>,
}

fn lon_lat(p: GeoPoint) -> [f64; 2] {
    [p.lon, p.lat]
}

pub fn cmd_geolocate(cfg: &RunConfig, out: &Path) -> Result<BTreeMap<Scenario, EstimatesFile>, PipelineError> {
    let intrinsics = cfg.intrinsics.build()?;
    let model = load_model(cfg, out)?;
    let options = GeolocateOptions {
        min_candidates: cfg.geolocate.min_candidates,
        tol: cfg.geolocate.tol,
        max_iter: cfg.geolocate.max_iter,
        max_depth: cfg.geolocate.max_depth_m,
    };
    let source = if model.is_some() { "corrected" } else { "raw" };
    let data = cfg.data_dir(out);
    let mut all = BTreeMap::new();
    for &s in &cfg.scenarios {
        let drive = drive_sightings(cfg, &scenario_dir(&data, s), &intrinsics, model.as_ref())?;
        let mut features = Vec::new();
        let mut unlocatable = Vec::new();
        for (object_id, sightings) in &drive.by_object {
            let plain: Vec<Sighting> = sightings.iter().map(|(s, _)| *s).collect();
            match geolocate_object(&plain, &intrinsics, &options) {
                Ok(est) => features.push(Feature::new(
                    est.location,
                    EstimateProps {
                        object_id: object_id.clone(),
                        n_candidates: est.n_candidates,
                        dispersion_m: est.dispersion,
                        converged: est.converged,
                        depth_source: source.into(),
                        first_frame: est.first_pose.frame_id,
                        last_frame: est.last_pose.frame_id,
                        first_camera: lon_lat(est.first_pose.position),
                        last_camera: lon_lat(est.last_pose.position),
                    },
                )),
                Err(e) => unlocatable.push(Unlocatable { object_id: object_id.clone(), reason: e.to_string() }),
            }
        }
        log::info!("{}: {} located, {} unlocatable", s.label(), features.len(), unlocatable.len());
        let file = EstimatesFile { located: FeatureCollection::new(features), unlocatable };
        write_json(&scenario_dir(out, s).join(ESTIMATES_FILE), &file)?;
        all.insert(s, file);
    }
    Ok(all)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerrainStatus {
    Corrected,
    NoDem,
    OutOfCoverage,
    Nodata,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub object_id: String,
    pub frame_ids: Vec<u64>,
    pub distance_m: f64,
    /// Pinhole height before terrain correction.
    pub height_m: f64,
    pub height_total_m: Option<f64>,
    pub terrain: TerrainStatus,
    pub slope_deg: Option<f64>,
    /// Trunk diameter for trees, body width otherwise.
    pub width_m: f64,
    pub crown_width_m: Option<f64>,
}

impl Measurement {
    /// Terrain-corrected height where available.
    pub fn best_height(&self) -> f64 {
        self.height_total_m.unwrap_or(self.height_m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementsFile {
    pub scenario: Scenario,
    /// `"nearest"` or `"mean"`.
    pub frame_rule: String,
    pub objects: Vec<Measurement>,
}

struct FrameMeasure {
    height: f64,
    total: Result<(f64, f64), TerrainStatus>,
    width: f64,
    crown: Option<f64>,
}

fn elevation(dem: Option<&DemGrid>, p: GeoPoint) -> Result<f64, TerrainStatus> {
    let dem = dem.ok_or(TerrainStatus::NoDem)?;
    match sample_dem(dem, p) {
        Ok(Some(v)) => Ok(v),
        Ok(None) => Err(TerrainStatus::Nodata),
        Err(DemError::OutOfCoverage { .. }) => Err(TerrainStatus::OutOfCoverage),
    }
}

fn measure_frame(
    sighting: &Sighting,
    crown_px: Option<f64>,
    object_location: GeoPoint,
    dem: Option<&DemGrid>,
    intrinsics: &CameraIntrinsics,
) -> Result<FrameMeasure, PipelineError> {
    let d = sighting.depth;
    let height = estimate_height(&sighting.pixel, d, intrinsics)?;
    let width = estimate_width(&sighting.pixel, d, intrinsics)?;
    let crown = match crown_px {
        Some(px) => Some(estimate_width(&PixelMeasurement { pixel_width: px, ..sighting.pixel }, d, intrinsics)?),
        None => None,
    };
    let total = elevation(dem, sighting.pose.position).and_then(|cam| {
        let obj = elevation(dem, object_location)?;
        terrain_correction(height, d, &TerrainContext { camera_elevation: cam, object_base_elevation: obj })
            .map(|c| (c.total_height, c.slope_deg))
            .map_err(|_| TerrainStatus::Infeasible)
    });
    Ok(FrameMeasure { height, total, width, crown })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

pub fn cmd_measure(cfg: &RunConfig, out: &Path) -> Result<BTreeMap<Scenario, MeasurementsFile>, PipelineError> {
    let intrinsics = cfg.intrinsics.build()?;
    let model = load_model(cfg, out)?;
    let data = cfg.data_dir(out);
    let dem_path = data.join(DEM_FILE);
    let dem = if dem_path.exists() {
        Some(read_dem(&dem_path)?)
    } else {
        log::warn!("{} not found; heights are not terrain corrected", dem_path.display());
        None
    };
    let mut all = BTreeMap::new();
    for &s in &cfg.scenarios {
        let estimates: EstimatesFile = read_json(&scenario_dir(out, s).join(ESTIMATES_FILE))?;
        let drive = drive_sightings(cfg, &scenario_dir(&data, s), &intrinsics, model.as_ref())?;
        let mut objects = Vec::new();
        for f in &estimates.located.features {
            let id = &f.properties.object_id;
            let Some(sightings) = drive.by_object.get(id).filter(|v| !v.is_empty()) else {
                return Err(PipelineError::Input(format!("{}: estimate for {id} has no observations", s.label())));
            };
            let location = f.geometry.point();
            let chosen: Vec<&(Sighting, Observation)> = if cfg.measure.mean_over_frames {
                sightings.iter().collect()
            } else {
                let nearest = sightings
                    .iter()
                    .min_by(|a, b| a.0.depth.total_cmp(&b.0.depth).then(a.1.frame_id.cmp(&b.1.frame_id)))
                    .expect("non-empty");
                vec![nearest]
            };
            let frames: Vec<FrameMeasure> = chosen
                .iter()
                .map(|(sg, obs)| measure_frame(sg, obs.crown_pixel_width, location, dem.as_ref(), &intrinsics))
                .collect::<Result<_, _>>()?;
            let totals: Result<Vec<(f64, f64)>, TerrainStatus> = frames.iter().map(|m| m.total).collect();
            let crowns: Option<Vec<f64>> = frames.iter().map(|m| m.crown).collect();
            let (height_total_m, slope_deg, terrain) = match totals {
                Ok(t) => (Some(mean(t.iter().map(|x| x.0))), Some(mean(t.iter().map(|x| x.1))), TerrainStatus::Corrected),
                Err(status) => (None, None, status),
            };
            objects.push(Measurement {
                object_id: id.clone(),
                frame_ids: chosen.iter().map(|(_, o)| o.frame_id).collect(),
                distance_m: mean(chosen.iter().map(|(sg, _)| sg.depth)),
                height_m: mean(frames.iter().map(|m| m.height)),
                height_total_m,
                terrain,
                slope_deg,
                width_m: mean(frames.iter().map(|m| m.width)),
                crown_width_m: crowns.map(|c| mean(c.into_iter())),
            });
        }
        let file = MeasurementsFile {
            scenario: s,
            frame_rule: if cfg.measure.mean_over_frames { "mean" } else { "nearest" }.into(),
            objects,
        };
        write_json(&scenario_dir(out, s).join(MEASUREMENTS_FILE), &file)?;
        all.insert(s, file);
    }
    Ok(all)
}

/// Simulate, train (when correction is on), geolocate, measure and evaluate.
pub fn run_all(cfg: &RunConfig, out: &Path) -> Result<super::EvaluationReport, PipelineError> {
    cmd_simulate(cfg, out)?;
    if cfg.geolocate.correction {
        cmd_train(cfg, out)?;
    }
    cmd_geolocate(cfg, out)?;
    cmd_measure(cfg, out)?;
    super::cmd_evaluate(cfg, out)
}
