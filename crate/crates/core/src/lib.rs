//! Geolocation and structural measurement of roadside objects from
//! monocular dashcam observations.
//!
//! Geometry (geodesy, camera model, triangulation) is generic over
//! [`scalar::Real`]; the aliases below fix the scalar type. Depth
//! correction, statistics, ingest and the simulator work in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod depth;
pub mod geodesy;
pub mod ingest;
pub mod pipeline;
pub mod scalar;
pub mod simulate;
pub mod stats;
pub mod triangulate;

pub use camera::CameraError;
pub use depth::{CorrectionModel, DepthError, Hyperparams};
pub use geodesy::{haversine_distance, GeoError};
pub use pipeline::{PipelineError, RunConfig};
pub use scalar::Real;
pub use simulate::{NoiseConfig, Scenario, SimError};
pub use stats::StatsError;
pub use triangulate::{geolocate_object, TriangulateError};

pub type GeoPoint = geodesy::GeoPoint<f64>;
pub type GeoPoint32 = geodesy::GeoPoint<f32>;
pub type LocalXY = geodesy::LocalXY<f64>;
pub type LocalXY32 = geodesy::LocalXY<f32>;
pub type CameraIntrinsics = camera::CameraIntrinsics<f64>;
pub type CameraIntrinsics32 = camera::CameraIntrinsics<f32>;
pub type PixelMeasurement = camera::PixelMeasurement<f64>;
pub type PixelMeasurement32 = camera::PixelMeasurement<f32>;
pub type CameraPose = triangulate::CameraPose<f64>;
pub type CameraPose32 = triangulate::CameraPose<f32>;
pub type Sighting = triangulate::Sighting<f64>;
pub type Sighting32 = triangulate::Sighting<f32>;
pub type GeolocationEstimate = triangulate::GeolocationEstimate<f64>;
pub type GeolocationEstimate32 = triangulate::GeolocationEstimate<f32>;
