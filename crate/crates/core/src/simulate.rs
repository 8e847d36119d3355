//! Synthetic roadside scenes, drives and noisy observations with known
//! ground truth.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{angle_to_pixel, project_height, project_width, CameraIntrinsics, PixelMeasurement};
use crate::geodesy::{from_local_xy, to_local_xy, GeoError, GeoPoint, LocalXY};
use crate::ingest::{
    derive_azimuth, sample_dem, write_control_points, write_dem, write_ground_distances, write_ground_truth,
    write_observations, write_track, ControlPair, DemError, DemGrid, GroundDistance, GroundTruthObject, IngestError,
    Mount, ObjectKind, Observation, SpeedClass, Track, TrackFrame, TrackMeta, VIDEO_FPS,
};
use crate::scalar::wrap_degrees;
use crate::triangulate::CameraPose;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Dem(#[from] DemError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The four capture conditions: camera mount crossed with speed band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "In_Slow")]
    InSlow,
    #[serde(rename = "In_Speed")]
    InSpeed,
    #[serde(rename = "Out_Slow")]
    OutSlow,
    #[serde(rename = "Out_Speed")]
    OutSpeed,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::InSlow, Scenario::InSpeed, Scenario::OutSlow, Scenario::OutSpeed];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::InSlow => "In_Slow",
            Scenario::InSpeed => "In_Speed",
            Scenario::OutSlow => "Out_Slow",
            Scenario::OutSpeed => "Out_Speed",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.label() == label)
    }

    pub fn mount(self) -> Mount {
        match self {
            Scenario::InSlow | Scenario::InSpeed => Mount::Inside,
            Scenario::OutSlow | Scenario::OutSpeed => Mount::Outside,
        }
    }

    pub fn speed(self) -> SpeedClass {
        match self {
            Scenario::InSlow | Scenario::OutSlow => SpeedClass::Slow,
            Scenario::InSpeed | Scenario::OutSpeed => SpeedClass::High,
        }
    }

    fn stream(self) -> u64 {
        self as u64 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Terrain {
    Flat { elevation_m: f64 },
    /// Elevation changes linearly with distance east and north of the origin.
    Plane { elevation_m: f64, grade_east: f64, grade_north: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    /// Start of the road.
    pub origin: GeoPoint,
    /// Compass heading of the road at the origin, degrees.
    pub heading_deg: f64,
    /// Signed curvature, 1/m; positive bends left. Zero for a straight road.
    pub curvature_per_m: f64,
    pub n_trees: usize,
    pub n_poles: usize,
    pub n_other: usize,
    /// Mean along-road gap between consecutive objects.
    pub object_spacing_m: f64,
    pub lateral_min_m: f64,
    pub lateral_max_m: f64,
    /// Road driven before the first object and after the last.
    pub lead_in_m: f64,
    pub lead_out_m: f64,
    pub terrain: Terrain,
    pub dem_cell_deg: f64,
    pub dem_margin_m: f64,
}

impl Default for SceneConfig {
    /// Mirrors the field study: 38 trees, 17 poles and 8 other objects.
    fn default() -> Self {
        Self {
            origin: GeoPoint { lat: 41.8, lon: -72.25 },
            heading_deg: 60.0,
            curvature_per_m: 0.0,
            n_trees: 38,
            n_poles: 17,
            n_other: 8,
            object_spacing_m: 12.0,
            lateral_min_m: 2.0,
            lateral_max_m: 15.0,
            lead_in_m: 60.0,
            lead_out_m: 30.0,
            terrain: Terrain::Flat { elevation_m: 150.0 },
            dem_cell_deg: 0.0001,
            dem_margin_m: 100.0,
        }
    }
}

impl SceneConfig {
    pub fn n_objects(&self) -> usize {
        self.n_trees + self.n_poles + self.n_other
    }

    fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        self.origin.validate()?;
        if self.n_objects() == 0 {
            return bad("scene needs at least one object");
        }
        if !(self.lateral_min_m > 0.0 && self.lateral_max_m >= self.lateral_min_m) {
            return bad("lateral offsets must satisfy 0 < min <= max");
        }
        if !(self.object_spacing_m > 0.0 && self.lead_in_m >= 0.0 && self.lead_out_m >= 0.0) {
            return bad("spacing must be positive and lead distances nonnegative");
        }
        if !(self.dem_cell_deg > 0.0 && self.dem_margin_m >= 0.0) {
            return bad("dem cell size must be positive");
        }
        if self.curvature_per_m.abs() * self.road_length_m() > std::f64::consts::PI {
            return bad("road bends more than 180 degrees");
        }
        Ok(())
    }

    fn road_length_m(&self) -> f64 {
        self.lead_in_m + self.object_spacing_m * self.n_objects() as f64 + self.lead_out_m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    /// Distance between 1 Hz poses for each speed band.
    pub slow_spacing_m: f64,
    pub high_spacing_m: f64,
    /// Objects further than this are not annotated.
    pub max_range_m: f64,
    pub min_range_m: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self { slow_spacing_m: 8.0, high_spacing_m: 14.0, max_range_m: 55.0, min_range_m: 1.0 }
    }
}

impl DriveConfig {
    pub fn spacing(&self, speed: SpeedClass) -> f64 {
        match speed {
            SpeedClass::Slow => self.slow_spacing_m,
            SpeedClass::High => self.high_spacing_m,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(self.slow_spacing_m > 0.0 && self.high_spacing_m > 0.0 && self.max_range_m > self.min_range_m && self.min_range_m >= 0.0) {
            return Err(SimError::InvalidConfig(format!("bad drive config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Constant GPS error (east, north), meters.
    pub gps_systematic_offset: [f64; 2],
    pub gps_jitter_sigma: f64,
    pub azimuth_sigma_deg: f64,
    /// Pixel noise at the slow spacing; scaled by pose spacing.
    pub pixel_jitter_sigma: f64,
    /// Log-normal relative noise on pixel extents at the slow spacing;
    /// scaled like `pixel_jitter_sigma`.
    pub extent_jitter_rel: f64,
    pub depth_knee: f64,
    /// Slope of raw depth against true distance beyond the knee.
    pub depth_compression: f64,
    pub depth_sample_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::calibrated()
    }
}

impl NoiseConfig {
    pub fn zero() -> Self {
        Self {
            gps_systematic_offset: [0.0, 0.0],
            gps_jitter_sigma: 0.0,
            azimuth_sigma_deg: 0.0,
            pixel_jitter_sigma: 0.0,
            extent_jitter_rel: 0.0,
            depth_knee: 15.0,
            depth_compression: 1.0,
            depth_sample_sigma: 0.0,
        }
    }

    /// Field-like noise: a 4 m systematic GPS offset with 1.5 m jitter, and
    /// depth compressed by half beyond 15 m.
    pub fn calibrated() -> Self {
        Self {
            gps_systematic_offset: [2.4, 3.2],
            gps_jitter_sigma: 1.5,
            azimuth_sigma_deg: 10.0,
            pixel_jitter_sigma: 30.0,
            extent_jitter_rel: 0.05,
            depth_knee: 15.0,
            depth_compression: 0.5,
            depth_sample_sigma: 0.5,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        let sigmas = [
            self.gps_jitter_sigma,
            self.azimuth_sigma_deg,
            self.pixel_jitter_sigma,
            self.extent_jitter_rel,
            self.depth_sample_sigma,
        ];
        if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(SimError::InvalidConfig("noise sigmas must be finite and nonnegative".into()));
        }
        if !(self.depth_compression > 0.0 && self.depth_compression <= 1.0) {
            return Err(SimError::InvalidConfig(format!("depth compression {} not in (0, 1]", self.depth_compression)));
        }
        if !(self.depth_knee >= 0.0) || self.gps_systematic_offset.iter().any(|v| !v.is_finite()) {
            return Err(SimError::InvalidConfig("depth knee and gps offset must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub config: SceneConfig,
    pub objects: Vec<GroundTruthObject>,
    pub dem: DemGrid,
}

/// Point on the road centerline `s` meters from the origin, in the origin's
/// tangent frame, with the math-convention direction of travel in radians.
fn road_point(cfg: &SceneConfig, s: f64) -> (LocalXY, f64) {
    let phi0 = (90.0 - cfg.heading_deg).to_radians();
    let k = cfg.curvature_per_m;
    let phi = phi0 + k * s;
    if k == 0.0 {
        (LocalXY::new(s * phi0.cos(), s * phi0.sin()), phi)
    } else {
        (LocalXY::new((phi.sin() - phi0.sin()) / k, -(phi.cos() - phi0.cos()) / k), phi)
    }
}

fn terrain_elevation(terrain: &Terrain, xy: LocalXY) -> f64 {
    match *terrain {
        Terrain::Flat { elevation_m } => elevation_m,
        Terrain::Plane { elevation_m, grade_east, grade_north } => elevation_m + grade_east * xy.x + grade_north * xy.y,
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn generate_scene(cfg: &SceneConfig, seed: u64) -> Result<Scene, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kinds: Vec<ObjectKind> = std::iter::repeat_n(ObjectKind::Tree, cfg.n_trees)
        .chain(std::iter::repeat_n(ObjectKind::Pole, cfg.n_poles))
        .chain(std::iter::repeat_n(ObjectKind::Other, cfg.n_other))
        .collect();
    kinds.shuffle(&mut rng);

    let mut placed = Vec::with_capacity(kinds.len());
    for (i, kind) in kinds.into_iter().enumerate() {
        let s = cfg.lead_in_m + cfg.object_spacing_m * (i as f64 + 0.5 + uniform(&mut rng, -0.3, 0.3));
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let lateral = side * uniform(&mut rng, cfg.lateral_min_m, cfg.lateral_max_m);
        let (center, phi) = road_point(cfg, s);
        let xy = LocalXY::new(center.x - lateral * phi.sin(), center.y + lateral * phi.cos());
        let (height, width, crown) = match kind {
            ObjectKind::Tree => {
                (uniform(&mut rng, 5.0, 20.0), uniform(&mut rng, 0.2, 0.8), Some(uniform(&mut rng, 3.0, 10.0)))
            }
            ObjectKind::Pole => (uniform(&mut rng, 8.0, 12.0), uniform(&mut rng, 0.25, 0.35), None),
            ObjectKind::Other => (uniform(&mut rng, 1.0, 4.0), uniform(&mut rng, 0.3, 1.5), None),
        };
        placed.push((kind, xy, height, width, crown));
    }

    let dem = build_dem(cfg, placed.iter().map(|p| p.1))?;
    let mut objects = Vec::with_capacity(placed.len());
    for (i, (kind, xy, height, width, crown)) in placed.into_iter().enumerate() {
        let location = from_local_xy(xy, cfg.origin)?;
        objects.push(GroundTruthObject {
            object_id: format!("obj_{:03}", i + 1),
            kind,
            location,
            height_m: height,
            width_m: width,
            crown_width_m: crown,
            base_elevation_m: sample_dem(&dem, location)?,
        });
    }
    Ok(Scene { config: cfg.clone(), objects, dem })
}

fn build_dem(cfg: &SceneConfig, objects: impl Iterator<Item = LocalXY>) -> Result<DemGrid, SimError> {
    let length = cfg.road_length_m();
    let steps = (length / 5.0).ceil() as usize;
    let road = (0..=steps).map(|i| road_point(cfg, length * i as f64 / steps as f64).0);
    let (mut lo, mut hi) = (LocalXY::new(f64::MAX, f64::MAX), LocalXY::new(f64::MIN, f64::MIN));
    for p in road.chain(objects) {
        lo = LocalXY::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = LocalXY::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let m = cfg.dem_margin_m;
    let sw = from_local_xy(LocalXY::new(lo.x - m, lo.y - m), cfg.origin)?;
    let ne = from_local_xy(LocalXY::new(hi.x + m, hi.y + m), cfg.origin)?;
    let cs = cfg.dem_cell_deg;
    let ncols = ((ne.lon - sw.lon) / cs).ceil().max(1.0) as usize;
    let nrows = ((ne.lat - sw.lat) / cs).ceil().max(1.0) as usize;
    let terrain = cfg.terrain;
    let origin = cfg.origin;
    Ok(DemGrid::from_fn(ncols, nrows, sw, cs, |p| {
        terrain_elevation(&terrain, to_local_xy(p, origin).expect("dem cell near origin"))
    }))
}

/// True camera poses at 1 Hz along the road. Azimuth is the heading of the
/// chord to the next pose (from the previous one for the last pose).
pub fn trajectory(scene: &Scene, speed: SpeedClass, drive: &DriveConfig) -> Result<Vec<CameraPose>, SimError> {
    drive.validate()?;
    let spacing = drive.spacing(speed);
    let n = (scene.config.road_length_m() / spacing).floor() as usize + 1;
    let mut positions = Vec::with_capacity(n);
    for k in 0..n {
        positions.push(from_local_xy(road_point(&scene.config, k as f64 * spacing).0, scene.config.origin)?);
    }
    let mut poses = Vec::with_capacity(n);
    for k in 0..n {
        let azimuth = if k + 1 < n {
            derive_azimuth(positions[k], positions[k + 1])?
        } else if k > 0 {
            derive_azimuth(positions[k - 1], positions[k])?
        } else {
            scene.config.heading_deg
        };
        poses.push(CameraPose { position: positions[k], azimuth, timestamp: k as f64, frame_id: VIDEO_FPS * k as u64 });
    }
    Ok(poses)
}

/// Noise-free image of one object from one pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub pixel: PixelMeasurement,
    pub crown_pixel_width: Option<f64>,
    /// Horizontal range in the anchor's tangent frame, meters.
    pub distance: f64,
    /// View angle off the optical axis, degrees, positive to the left.
    pub theta: f64,
}

/// Geometry needed to image an object from a pose: the tangent frame the
/// pipeline will triangulate in, and the ground elevation under the camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewContext {
    pub anchor: GeoPoint,
    pub camera_elevation: f64,
    pub max_range: f64,
    pub min_range: f64,
}

/// Projects an object into the camera, or `None` when it falls outside the
/// horizontal field of view, the image, or the range limits.
///
/// The pixel height is the apparent height that the terrain correction maps
/// back to the true height: `H / (1 + tan(slope))`.
pub fn project_observation(
    object: &GroundTruthObject,
    pose: &CameraPose,
    view: &ViewContext,
    intrinsics: &CameraIntrinsics,
) -> Result<Option<Projection>, SimError> {
    let cam = to_local_xy(pose.position, view.anchor)?;
    let obj = to_local_xy(object.location, view.anchor)?;
    let delta = obj - cam;
    let distance = delta.norm();
    if !(distance >= view.min_range && distance <= view.max_range) || distance == 0.0 {
        return Ok(None);
    }
    let bearing = delta.y.atan2(delta.x).to_degrees();
    let theta = wrap_degrees(bearing - (90.0 - pose.azimuth));
    if theta.abs() > intrinsics.hfov / 2.0 {
        return Ok(None);
    }
    let u = angle_to_pixel(theta, intrinsics);
    if !(0.0..intrinsics.image_width).contains(&u) {
        return Ok(None);
    }
    let base = object.base_elevation_m.unwrap_or(view.camera_elevation);
    let rise = base - view.camera_elevation;
    if distance <= rise.abs() {
        return Ok(None);
    }
    let slope_tan = rise / (distance * distance - rise * rise).sqrt();
    let apparent = object.height_m / (1.0 + slope_tan);
    let drop = project_height(intrinsics.mount_height - rise, distance, intrinsics);
    let v = intrinsics.image_height / 2.0 + drop;
    if !(0.0..intrinsics.image_height).contains(&v) {
        return Ok(None);
    }
    Ok(Some(Projection {
        pixel: PixelMeasurement {
            u,
            v,
            pixel_height: project_height(apparent, distance, intrinsics),
            pixel_width: project_width(object.width_m, distance, intrinsics),
        },
        crown_pixel_width: object.crown_width_m.map(|c| project_width(c, distance, intrinsics)),
        distance,
        theta,
    }))
}

/// Mean raw depth for a true distance: exact up to the knee, compressed beyond.
pub fn biased_depth(true_distance: f64, noise: &NoiseConfig) -> f64 {
    if true_distance <= noise.depth_knee {
        true_distance
    } else {
        noise.depth_knee + noise.depth_compression * (true_distance - noise.depth_knee)
    }
}

/// Smallest raw depth sample the simulator emits.
const MIN_DEPTH_SAMPLE_M: f64 = 0.05;

/// Three raw depth readings around the biased mean.
pub fn inject_depth_bias(true_distance: f64, noise: &NoiseConfig, rng: &mut ChaCha8Rng) -> [f64; 3] {
    let mean = biased_depth(true_distance, noise);
    let mut out = [0.0; 3];
    for s in &mut out {
        *s = (mean + noise.depth_sample_sigma * normal(rng)).max(MIN_DEPTH_SAMPLE_M);
    }
    out
}

/// One simulated drive through a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedRun {
    pub scenario: Scenario,
    pub true_poses: Vec<CameraPose>,
    /// GPS log as recorded, with offset and jitter.
    pub track: Track,
    pub observations: Vec<Observation>,
    pub ground_distances: Vec<GroundDistance>,
    pub control_pairs: Vec<ControlPair>,
}

/// Drives `scenario` through the scene and records every visible object in
/// every pose. Noise draws depend only on `seed` and the scenario, never on
/// the noise magnitudes, so runs that differ only in sigmas are paired.
pub fn render_observations(
    scene: &Scene,
    scenario: Scenario,
    intrinsics: &CameraIntrinsics,
    drive: &DriveConfig,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<SimulatedRun, SimError> {
    noise.validate()?;
    intrinsics.validate().map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let speed = scenario.speed();
    let mount = scenario.mount();
    let cam = CameraIntrinsics { mount_height: mount.height_m(), ..*intrinsics };
    let poses = trajectory(scene, speed, drive)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(scenario.stream());

    let origin = scene.config.origin;
    let [off_e, off_n] = noise.gps_systematic_offset;
    let mut frames = Vec::with_capacity(poses.len());
    for p in &poses {
        let (je, jn) = (normal(&mut rng), normal(&mut rng));
        let jaz = normal(&mut rng);
        let xy = to_local_xy(p.position, origin)?;
        let noisy = LocalXY::new(
            xy.x + off_e + noise.gps_jitter_sigma * je,
            xy.y + off_n + noise.gps_jitter_sigma * jn,
        );
        frames.push(TrackFrame {
            frame_id: p.frame_id,
            timestamp: p.timestamp,
            position: Some(from_local_xy(noisy, origin)?),
            azimuth: Some(crate::scalar::normalize_degrees(p.azimuth + noise.azimuth_sigma_deg * jaz)),
        });
    }
    let truth0 = poses[0].position;
    let shifted = to_local_xy(truth0, origin)? + LocalXY::new(off_e, off_n);
    let control_pairs = vec![ControlPair { observed: from_local_xy(shifted, origin)?, truth: truth0 }];

    let speed_factor = drive.spacing(speed) / drive.slow_spacing_m;
    let pixel_sigma = noise.pixel_jitter_sigma * speed_factor;
    let extent_sigma = noise.extent_jitter_rel * speed_factor;
    let camera_elevations: Vec<f64> = poses
        .iter()
        .map(|p| sample_dem(&scene.dem, p.position).map(|e| e.unwrap_or(0.0)))
        .collect::<Result<_, _>>()?;

    let mut observations = Vec::new();
    let mut ground_distances = Vec::new();
    for object in &scene.objects {
        let mut anchor: Option<GeoPoint> = None;
        for (k, pose) in poses.iter().enumerate() {
            let view = ViewContext {
                anchor: anchor.unwrap_or(pose.position),
                camera_elevation: camera_elevations[k],
                max_range: drive.max_range_m,
                min_range: drive.min_range_m,
            };
            let Some(proj) = project_observation(object, pose, &view, &cam)? else {
                continue;
            };
            anchor.get_or_insert(pose.position);
            let z: [f64; 5] = std::array::from_fn(|_| normal(&mut rng));
            let jitter = |base: f64, z: f64| base + pixel_sigma * z;
            let scale = |base: f64, z: f64| if extent_sigma == 0.0 { base } else { base * (extent_sigma * z).exp() };
            let pixel = PixelMeasurement {
                u: jitter(proj.pixel.u, z[0]).clamp(0.0, cam.image_width - 1.0),
                v: jitter(proj.pixel.v, z[1]).clamp(0.0, cam.image_height - 1.0),
                pixel_height: scale(proj.pixel.pixel_height, z[2]),
                pixel_width: scale(proj.pixel.pixel_width, z[3]),
            };
            let crown = proj.crown_pixel_width.map(|c| scale(c, z[4]));
            observations.push(Observation {
                object_id: object.object_id.clone(),
                frame_id: pose.frame_id,
                pixel,
                depth_samples: inject_depth_bias(proj.distance, noise, &mut rng),
                crown_pixel_width: crown,
            });
            ground_distances.push(GroundDistance {
                object_id: object.object_id.clone(),
                frame_id: pose.frame_id,
                distance_m: proj.distance,
            });
        }
    }
    Ok(SimulatedRun {
        scenario,
        true_poses: poses,
        track: Track { frames, meta: TrackMeta { speed_class: Some(speed), mount: Some(mount) } },
        observations,
        ground_distances,
        control_pairs,
    })
}

pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const TRACK_FILE: &str = "track.csv";
pub const DEM_FILE: &str = "dem.asc";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.geojson";
pub const GROUND_DISTANCES_FILE: &str = "ground_distances.csv";
pub const CONTROL_POINTS_FILE: &str = "control_points.csv";

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<(), SimError> {
    let io = |source| SimError::Io { path: path.display().to_string(), source };
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    f(&mut w).map_err(io)?;
    std::io::Write::flush(&mut w).map_err(io)
}

/// Writes the scene-level files (DEM and ground truth) into `dir`.
pub fn write_scene(dir: &Path, scene: &Scene) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(|source| SimError::Io { path: dir.display().to_string(), source })?;
    write_file(&dir.join(DEM_FILE), |w| write_dem(w, &scene.dem))?;
    write_file(&dir.join(GROUND_TRUTH_FILE), |w| write_ground_truth(w, &scene.objects))
}

/// Writes one drive's observation, track, distance and control files into `dir`.
pub fn write_run(dir: &Path, run: &SimulatedRun) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(|source| SimError::Io { path: dir.display().to_string(), source })?;
    write_file(&dir.join(OBSERVATIONS_FILE), |w| write_observations(w, &run.observations))?;
    write_file(&dir.join(TRACK_FILE), |w| write_track(w, &run.track))?;
    write_file(&dir.join(GROUND_DISTANCES_FILE), |w| write_ground_distances(w, &run.ground_distances))?;
    write_file(&dir.join(CONTROL_POINTS_FILE), |w| write_control_points(w, &run.control_pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{estimate_height, pixel_to_angle};

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(3.6, 5.184, 3.888, 3840.0, 2160.0, None, 1.2).unwrap()
    }

    fn object_at(xy: LocalXY, height: f64) -> GroundTruthObject {
        let origin = GeoPoint { lat: 41.8, lon: -72.25 };
        GroundTruthObject {
            object_id: "o".into(),
            kind: ObjectKind::Pole,
            location: from_local_xy(xy, origin).unwrap(),
            height_m: height,
            width_m: 0.3,
            crown_width_m: None,
            base_elevation_m: None,
        }
    }

    fn north_pose() -> (CameraPose, ViewContext) {
        let origin = GeoPoint { lat: 41.8, lon: -72.25 };
        let pose = CameraPose { position: origin, azimuth: 0.0, timestamp: 0.0, frame_id: 0 };
        (pose, ViewContext { anchor: origin, camera_elevation: 0.0, max_range: 100.0, min_range: 1.0 })
    }

    #[test]
    fn projection_inverts_pinhole() {
        let (pose, view) = north_pose();
        let p = project_observation(&object_at(LocalXY::new(0.0, 10.0), 5.4), &pose, &view, &intr()).unwrap().unwrap();
        // tangent-plane round trip of the object position costs ~1e-10 m
        assert!((p.pixel.pixel_height - 1080.0).abs() < 1e-6);
        assert!((p.pixel.u - 1920.0).abs() < 1e-9);
        assert!((p.distance - 10.0).abs() < 1e-9);
        let back = estimate_height(&p.pixel, p.distance, &intr()).unwrap();
        assert!((back - 5.4).abs() < 1e-12);
    }

    #[test]
    fn outside_fov_is_not_visible() {
        let (pose, view) = north_pose();
        let half = intr().hfov / 2.0;
        // bearing measured from east; straight ahead is 90 degrees
        let ang = (90.0 + half + 1.0_f64).to_radians();
        let o = object_at(LocalXY::new(10.0 * ang.cos(), 10.0 * ang.sin()), 3.0);
        assert!(project_observation(&o, &pose, &view, &intr()).unwrap().is_none());
        let ang = (90.0 + half - 1.0_f64).to_radians();
        let o = object_at(LocalXY::new(10.0 * ang.cos(), 10.0 * ang.sin()), 3.0);
        let p = project_observation(&o, &pose, &view, &intr()).unwrap().unwrap();
        let got = pixel_to_angle(p.pixel.u, &intr()).unwrap();
        assert!((got - (half - 1.0)).abs() < 1e-6, "{got} vs {}", half - 1.0);
    }

    #[test]
    fn depth_bias_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let zero = NoiseConfig::zero();
        assert_eq!(inject_depth_bias(10.0, &zero, &mut rng), [10.0; 3]);
        let n = NoiseConfig { depth_compression: 0.5, ..NoiseConfig::zero() };
        assert_eq!(biased_depth(30.0, &n), 22.5);
        let s = inject_depth_bias(30.0, &NoiseConfig { depth_sample_sigma: 0.5, ..n }, &mut rng);
        assert!(crate::depth::variance_weight(&s, 0.0).is_finite());
        assert!(s[0] != s[1]);
    }

    #[test]
    fn scene_is_seeded_and_mixed() {
        let cfg = SceneConfig::default();
        let a = generate_scene(&cfg, 7).unwrap();
        let b = generate_scene(&cfg, 7).unwrap();
        assert_eq!(a, b);
        let count = |k| a.objects.iter().filter(|o| o.kind == k).count();
        assert_eq!((count(ObjectKind::Tree), count(ObjectKind::Pole), count(ObjectKind::Other)), (38, 17, 8));
        assert!(a.objects.iter().all(|o| o.base_elevation_m == Some(150.0)));
        assert!(a.objects.iter().all(|o| o.crown_width_m.is_some() == (o.kind == ObjectKind::Tree)));
    }

    #[test]
    fn systematic_offset_shifts_every_pose() {
        let scene = generate_scene(&SceneConfig { n_trees: 3, n_poles: 0, n_other: 0, ..SceneConfig::default() }, 1).unwrap();
        let noise = NoiseConfig { gps_systematic_offset: [3.0, 2.0], ..NoiseConfig::zero() };
        let run = render_observations(&scene, Scenario::InSlow, &intr(), &DriveConfig::default(), &noise, 3).unwrap();
        for (f, p) in run.track.frames.iter().zip(&run.true_poses) {
            let d = to_local_xy(f.position.unwrap(), scene.config.origin).unwrap()
                - to_local_xy(p.position, scene.config.origin).unwrap();
            assert!((d.x - 3.0).abs() < 1e-6 && (d.y - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn high_speed_sees_objects_from_fewer_near_poses() {
        let scene = generate_scene(&SceneConfig::default(), 2).unwrap();
        let drive = DriveConfig::default();
        let near = |s| {
            let run = render_observations(&scene, s, &intr(), &drive, &NoiseConfig::zero(), 2).unwrap();
            run.ground_distances.iter().filter(|g| g.distance_m <= 15.0).count()
        };
        assert!(near(Scenario::InSpeed) < near(Scenario::InSlow));
    }
}
