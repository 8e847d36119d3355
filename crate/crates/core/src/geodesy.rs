//! Geographic <-> local tangent-plane conversions and great-circle distance.
//!
//! The local frame is an equirectangular projection anchored at an explicit
//! reference point: `x` grows east, `y` grows north, both in meters. It is
//! accurate for offsets well under one degree.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Earth radius in meters used by both the tangent-plane projection and the
/// haversine distance (WGS84 semi-major axis).
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("invalid geographic input: {0}")]
    InvalidInput(String),
    #[error("degenerate projection: reference latitude {lat} is polar")]
    DegenerateProjection { lat: f64 },
}

/// WGS84 latitude/longitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeoPoint<T = f64> {
    pub lat: T,
    pub lon: T,
}

impl<T: Real> GeoPoint<T> {
    /// Builds a point, rejecting non-finite or out-of-range coordinates.
    pub fn new(lat: T, lon: T) -> Result<Self, GeoError> {
        let p = Self { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !self.lat.is_finite() || !self.lon.is_finite() {
            return Err(GeoError::InvalidInput(format!(
                "non-finite coordinate ({}, {})",
                self.lat, self.lon
            )));
        }
        if self.lat.abs() > T::lit(90.0) || self.lon.abs() > T::lit(180.0) {
            return Err(GeoError::InvalidInput(format!(
                "coordinate out of range ({}, {})",
                self.lat, self.lon
            )));
        }
        Ok(())
    }
}

/// Meters east (`x`) and north (`y`) of some reference point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalXY<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Real> LocalXY<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl<T: Real> std::ops::Add for LocalXY<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Real> std::ops::Sub for LocalXY<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Meters per degree of arc along a meridian.
#[inline]
fn meters_per_degree<T: Real>() -> T {
    T::PI() * T::lit(EARTH_RADIUS_M) / T::lit(180.0)
}

/// Projects `point` into the tangent plane anchored at `reference`.
pub fn to_local_xy<T: Real>(point: GeoPoint<T>, reference: GeoPoint<T>) -> Result<LocalXY<T>, GeoError> {
    point.validate()?;
    reference.validate()?;
    let k = meters_per_degree::<T>();
    let x = (point.lon - reference.lon) * k * reference.lat.to_radians().cos();
    let y = (point.lat - reference.lat) * k;
    Ok(LocalXY::new(x, y))
}

/// Inverse of [`to_local_xy`].
pub fn from_local_xy<T: Real>(xy: LocalXY<T>, reference: GeoPoint<T>) -> Result<GeoPoint<T>, GeoError> {
    reference.validate()?;
    if !xy.x.is_finite() || !xy.y.is_finite() {
        return Err(GeoError::InvalidInput(format!("non-finite offset ({}, {})", xy.x, xy.y)));
    }
    let cos_lat = reference.lat.to_radians().cos();
    if reference.lat.abs() >= T::lit(90.0) || cos_lat.abs() <= T::epsilon() {
        return Err(GeoError::DegenerateProjection { lat: reference.lat.to_f64_lossy() });
    }
    let k = meters_per_degree::<T>();
    Ok(GeoPoint {
        lat: reference.lat + xy.y / k,
        lon: reference.lon + xy.x / (k * cos_lat),
    })
}

/// Great-circle distance in meters between two points (haversine formula).
pub fn haversine_distance<T: Real>(a: GeoPoint<T>, b: GeoPoint<T>) -> Result<T, GeoError> {
    a.validate()?;
    b.validate()?;
    let two = T::lit(2.0);
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / two).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / two).sin().powi(2);
    // rounding can push h a hair above 1 for antipodal inputs
    let h = h.min(T::one()).max(T::zero());
    Ok(two * T::lit(EARTH_RADIUS_M) * h.sqrt().asin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gp(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn identity_maps_to_origin() {
        let r = gp(41.8, -72.25);
        let xy = to_local_xy(r, r).unwrap();
        assert_eq!(xy, LocalXY::new(0.0, 0.0));
        assert_eq!(from_local_xy(LocalXY::new(0.0, 0.0), r).unwrap(), r);
    }

    #[test]
    fn east_and_north_offsets() {
        let r = gp(41.8, -72.25);
        let east = to_local_xy(gp(41.8, -72.249), r).unwrap();
        // 0.001 deg * 111319.4908 m/deg * cos(41.8 deg)
        assert_abs_diff_eq!(east.x, 82.986_008_683, epsilon = 1e-6);
        assert_abs_diff_eq!(east.y, 0.0, epsilon = 1e-12);
        let north = to_local_xy(gp(41.801, -72.25), r).unwrap();
        assert_abs_diff_eq!(north.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(north.y, 111.319_490_793, epsilon = 1e-6);
    }

    #[test]
    fn inverse_of_east_offset() {
        let r = gp(41.8, -72.25);
        let x = 0.001 * 111_319.490_793_273_57 * 41.8_f64.to_radians().cos();
        let p = from_local_xy(LocalXY::new(x, 0.0), r).unwrap();
        assert_abs_diff_eq!(p.lat, 41.8, epsilon = 1e-7);
        assert_abs_diff_eq!(p.lon, -72.249, epsilon = 1e-7);
        let p = from_local_xy(LocalXY::new(82.99, 0.0), r).unwrap();
        assert_abs_diff_eq!(p.lon, -72.249, epsilon = 1e-6);
    }

    #[test]
    fn polar_reference_is_degenerate() {
        let r = GeoPoint { lat: 90.0, lon: 0.0 };
        assert!(matches!(
            from_local_xy(LocalXY::new(1.0, 1.0), r),
            Err(GeoError::DegenerateProjection { .. })
        ));
    }

    #[test]
    fn non_finite_rejected() {
        let r = gp(0.0, 0.0);
        let bad = GeoPoint { lat: f64::NAN, lon: 0.0 };
        assert!(matches!(to_local_xy(bad, r), Err(GeoError::InvalidInput(_))));
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(from_local_xy(LocalXY::new(f64::INFINITY, 0.0), r).is_err());
    }

    #[test]
    fn haversine_examples() {
        let o = gp(0.0, 0.0);
        assert_eq!(haversine_distance(o, o).unwrap(), 0.0);
        let arc = EARTH_RADIUS_M * 0.001_f64.to_radians();
        assert_abs_diff_eq!(haversine_distance(o, gp(0.001, 0.0)).unwrap(), arc, epsilon = 1e-6);
        assert_abs_diff_eq!(haversine_distance(o, gp(0.0, 0.001)).unwrap(), arc, epsilon = 1e-6);
        assert_abs_diff_eq!(arc, 111.3195, epsilon = 1e-3);
    }

    #[test]
    fn works_in_single_precision() {
        let r = GeoPoint { lat: 41.8_f32, lon: -72.25 };
        let p = GeoPoint { lat: 41.801_f32, lon: -72.25 };
        let xy = to_local_xy(p, r).unwrap();
        // f32 resolves ~4e-6 deg at this latitude
        assert!((xy.y - 111.32).abs() < 0.5);
    }
}
