//! Ideal pinhole camera geometry: pixel column to view angle, metric object
//! size from pixel size and range, and terrain-slope height correction.
//!
//! No lens distortion model is applied.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Largest tolerated disagreement between a configured HFOV and the one
/// implied by sensor width and focal length.
pub const HFOV_CONSISTENCY_TOLERANCE_DEG: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("pixel coordinate {u} outside image of width {width}")]
    OutOfBounds { u: f64, width: f64 },
    #[error("distance must be positive, got {0}")]
    InvalidDistance(f64),
    #[error("range {distance} m does not exceed elevation difference {delta} m")]
    GeometryInfeasible { distance: f64, delta: f64 },
}

/// Sensor and mounting geometry. Focal length and sensor dimensions share a
/// length unit (millimeters); image dimensions are pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics<T = f64> {
    pub focal_length: T,
    pub sensor_width: T,
    pub sensor_height: T,
    pub image_width: T,
    pub image_height: T,
    /// Horizontal field of view, degrees.
    pub hfov: T,
    /// Lens height above the road surface, meters.
    pub mount_height: T,
}

impl<T: Real> CameraIntrinsics<T> {
    /// Builds intrinsics, deriving the HFOV from the sensor when `hfov` is
    /// `None` and checking consistency when it is given.
    pub fn new(
        focal_length: T,
        sensor_width: T,
        sensor_height: T,
        image_width: T,
        image_height: T,
        hfov: Option<T>,
        mount_height: T,
    ) -> Result<Self, CameraError> {
        let derived = hfov_from_sensor(sensor_width, focal_length);
        let mut cam = Self {
            focal_length,
            sensor_width,
            sensor_height,
            image_width,
            image_height,
            hfov: hfov.unwrap_or(derived),
            mount_height,
        };
        cam.validate()?;
        if let Some(given) = hfov {
            if (given - derived).abs() > T::lit(HFOV_CONSISTENCY_TOLERANCE_DEG) {
                return Err(CameraError::InvalidIntrinsics(format!(
                    "hfov {given} deg disagrees with sensor-derived {derived} deg"
                )));
            }
            cam.hfov = given;
        }
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        let fields = [
            ("focal_length", self.focal_length),
            ("sensor_width", self.sensor_width),
            ("sensor_height", self.sensor_height),
            ("image_width", self.image_width),
            ("image_height", self.image_height),
            ("hfov", self.hfov),
            ("mount_height", self.mount_height),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v <= T::zero() {
                return Err(CameraError::InvalidIntrinsics(format!("{name} must be positive, got {v}")));
            }
        }
        if self.hfov >= T::lit(180.0) {
            return Err(CameraError::InvalidIntrinsics(format!("hfov {} not below 180 deg", self.hfov)));
        }
        Ok(())
    }

    /// Meters per pixel along the image height at unit range.
    fn vertical_pixel_scale(&self) -> T {
        self.sensor_height / (self.focal_length * self.image_height)
    }

    fn horizontal_pixel_scale(&self) -> T {
        self.sensor_width / (self.focal_length * self.image_width)
    }
}

/// Pixel-space measurement of one object in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelMeasurement<T = f64> {
    /// Column of the object's representative (base) point.
    pub u: T,
    /// Row of the representative point.
    pub v: T,
    pub pixel_height: T,
    pub pixel_width: T,
}

/// Ground elevations for the terrain-slope correction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TerrainContext<T = f64> {
    pub camera_elevation: T,
    pub object_base_elevation: T,
}

/// Intermediate quantities of the terrain correction, kept for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerrainCorrection<T = f64> {
    pub horizontal_distance: T,
    /// Terrain slope angle, degrees.
    pub slope_deg: T,
    pub delta_height: T,
    pub total_height: T,
}

/// Angle of pixel column `u` off the optical axis, degrees. Positive angles
/// lie left of the image center.
pub fn pixel_to_angle<T: Real>(u: T, intrinsics: &CameraIntrinsics<T>) -> Result<T, CameraError> {
    let w = intrinsics.image_width;
    if !u.is_finite() || u < T::zero() || u > w {
        return Err(CameraError::OutOfBounds { u: u.to_f64_lossy(), width: w.to_f64_lossy() });
    }
    let half = w / T::lit(2.0);
    Ok(-((u - half) / w) * intrinsics.hfov)
}

/// Inverse of [`pixel_to_angle`]: pixel column for a view angle in degrees.
pub fn angle_to_pixel<T: Real>(theta: T, intrinsics: &CameraIntrinsics<T>) -> T {
    let w = intrinsics.image_width;
    w / T::lit(2.0) - theta / intrinsics.hfov * w
}

/// Horizontal field of view implied by sensor width and focal length, degrees.
pub fn hfov_from_sensor<T: Real>(sensor_width: T, focal_length: T) -> T {
    (T::lit(2.0) * (sensor_width / (T::lit(2.0) * focal_length)).atan()).to_degrees()
}

fn check_distance<T: Real>(distance: T) -> Result<(), CameraError> {
    if !distance.is_finite() || distance <= T::zero() {
        return Err(CameraError::InvalidDistance(distance.to_f64_lossy()));
    }
    Ok(())
}

/// Real-world height from pixel height and range: `h * D * S / (f * I_h)`.
pub fn estimate_height<T: Real>(
    m: &PixelMeasurement<T>,
    distance: T,
    intrinsics: &CameraIntrinsics<T>,
) -> Result<T, CameraError> {
    check_distance(distance)?;
    Ok(m.pixel_height * distance * intrinsics.vertical_pixel_scale())
}

/// Real-world width from pixel width and range: `w * D * S_w / (f * I_w)`.
pub fn estimate_width<T: Real>(
    m: &PixelMeasurement<T>,
    distance: T,
    intrinsics: &CameraIntrinsics<T>,
) -> Result<T, CameraError> {
    check_distance(distance)?;
    Ok(m.pixel_width * distance * intrinsics.horizontal_pixel_scale())
}

/// Pixel extent of a vertical metric size at the given range.
pub fn project_height<T: Real>(height: T, distance: T, intrinsics: &CameraIntrinsics<T>) -> T {
    height / (distance * intrinsics.vertical_pixel_scale())
}

/// Pixel extent of a horizontal metric size at the given range.
pub fn project_width<T: Real>(width: T, distance: T, intrinsics: &CameraIntrinsics<T>) -> T {
    width / (distance * intrinsics.horizontal_pixel_scale())
}

/// Adds the slope term `H * tan(beta)` to a pinhole height, where `beta` is
/// the terrain slope between camera and object base over the horizontal
/// distance `sqrt(D^2 - dh^2)`.
pub fn terrain_correction<T: Real>(
    height: T,
    distance: T,
    ctx: &TerrainContext<T>,
) -> Result<TerrainCorrection<T>, CameraError> {
    check_distance(distance)?;
    let delta = ctx.object_base_elevation - ctx.camera_elevation;
    if !delta.is_finite() || distance <= delta.abs() {
        return Err(CameraError::GeometryInfeasible {
            distance: distance.to_f64_lossy(),
            delta: delta.to_f64_lossy(),
        });
    }
    let horizontal = (distance * distance - delta * delta).sqrt();
    let slope = (delta / horizontal).atan();
    let delta_height = height * slope.tan();
    Ok(TerrainCorrection {
        horizontal_distance: horizontal,
        slope_deg: slope.to_degrees(),
        delta_height,
        total_height: height + delta_height,
    })
}

/// Terrain-corrected total height; see [`terrain_correction`].
pub fn terrain_corrected_height<T: Real>(height: T, distance: T, ctx: &TerrainContext<T>) -> Result<T, CameraError> {
    terrain_correction(height, distance, ctx).map(|c| c.total_height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn uhd(hfov: f64) -> CameraIntrinsics {
        CameraIntrinsics {
            focal_length: 3.6,
            sensor_width: 5.184,
            sensor_height: 3.888,
            image_width: 3840.0,
            image_height: 2160.0,
            hfov,
            mount_height: 1.2,
        }
    }

    #[test]
    fn pixel_angle_examples() {
        let cam = uhd(120.0);
        assert_eq!(pixel_to_angle(1920.0, &cam).unwrap(), 0.0);
        assert_eq!(pixel_to_angle(0.0, &cam).unwrap(), 60.0);
        assert_abs_diff_eq!(pixel_to_angle(2880.0, &cam).unwrap(), -30.0, epsilon = 1e-12);
        assert!(matches!(pixel_to_angle(-1.0, &cam), Err(CameraError::OutOfBounds { .. })));
        assert!(pixel_to_angle(3841.0, &cam).is_err());
    }

    #[test]
    fn pixel_angle_inverse() {
        let cam = uhd(71.5);
        for u in [0.0, 17.25, 1920.0, 3000.5] {
            let theta = pixel_to_angle(u, &cam).unwrap();
            assert_abs_diff_eq!(angle_to_pixel(theta, &cam), u, epsilon = 1e-9);
        }
    }

    #[test]
    fn hfov_examples() {
        assert_abs_diff_eq!(hfov_from_sensor(7.2, 3.6), 90.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hfov_from_sensor(5.184, 3.6), 71.507_774_508_873_5, epsilon = 1e-9);
        assert_eq!(hfov_from_sensor(0.0, 3.6), 0.0);
    }

    #[test]
    fn intrinsics_consistency_check() {
        let ok = CameraIntrinsics::new(3.6, 5.184, 3.888, 2592.0, 1944.0, Some(72.5), 1.2).unwrap();
        assert_eq!(ok.hfov, 72.5);
        let derived = CameraIntrinsics::new(3.6, 5.184, 3.888, 2592.0, 1944.0, None, 1.2).unwrap();
        assert_abs_diff_eq!(derived.hfov, 71.5078, epsilon = 1e-4);
        assert!(CameraIntrinsics::new(3.6, 5.184, 3.888, 2592.0, 1944.0, Some(120.0), 1.2).is_err());
        assert!(CameraIntrinsics::new(-3.6, 5.184, 3.888, 2592.0, 1944.0, None, 1.2).is_err());
    }

    #[test]
    fn height_and_width_examples() {
        let cam = uhd(71.5);
        let m = PixelMeasurement { u: 0.0, v: 0.0, pixel_height: 1080.0, pixel_width: 384.0 };
        assert_relative_eq!(estimate_height(&m, 10.0, &cam).unwrap(), 5.4, max_relative = 1e-12);
        assert_relative_eq!(estimate_height(&m, 20.0, &cam).unwrap(), 10.8, max_relative = 1e-12);
        assert_relative_eq!(estimate_width(&m, 10.0, &cam).unwrap(), 1.44, max_relative = 1e-12);
        let zero = PixelMeasurement::default();
        assert_eq!(estimate_height(&zero, 10.0, &cam).unwrap(), 0.0);
        assert_eq!(estimate_width(&zero, 10.0, &cam).unwrap(), 0.0);
        assert!(matches!(estimate_height(&m, 0.0, &cam), Err(CameraError::InvalidDistance(_))));
        assert!(estimate_width(&m, -1.0, &cam).is_err());
    }

    #[test]
    fn projection_round_trip() {
        let cam = uhd(71.5);
        let h = project_height(5.4, 10.0, &cam);
        assert_relative_eq!(h, 1080.0, max_relative = 1e-12);
        let m = PixelMeasurement { pixel_height: h, ..Default::default() };
        assert_relative_eq!(estimate_height(&m, 10.0, &cam).unwrap(), 5.4, max_relative = 1e-12);
    }

    #[test]
    fn terrain_examples() {
        let flat = TerrainContext { camera_elevation: 50.0, object_base_elevation: 50.0 };
        assert_eq!(terrain_corrected_height(5.0, 10.0, &flat).unwrap(), 5.0);

        let up = TerrainContext { camera_elevation: 0.0, object_base_elevation: 3.0 };
        let c = terrain_correction(5.0, 10.0, &up).unwrap();
        assert_abs_diff_eq!(c.horizontal_distance, 9.539_392_014, epsilon = 1e-9);
        assert_abs_diff_eq!(c.slope_deg, 17.457_603_124, epsilon = 1e-9);
        assert_abs_diff_eq!(c.delta_height, 1.572_427_255, epsilon = 1e-9);
        assert_abs_diff_eq!(c.total_height, 6.572_427_255, epsilon = 1e-9);

        let down = TerrainContext { camera_elevation: 3.0, object_base_elevation: 0.0 };
        let c = terrain_correction(5.0, 10.0, &down).unwrap();
        assert_abs_diff_eq!(c.delta_height, -1.572_427_255, epsilon = 1e-9);
        assert_abs_diff_eq!(c.total_height, 3.427_572_745, epsilon = 1e-9);

        assert!(matches!(
            terrain_corrected_height(5.0, 3.0, &up),
            Err(CameraError::GeometryInfeasible { .. })
        ));
    }
}
