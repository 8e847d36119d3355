//! Candidate points from (pose, bearing, range) sightings and their
//! geometric median.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{pixel_to_angle, CameraError, CameraIntrinsics, PixelMeasurement};
use crate::geodesy::{from_local_xy, to_local_xy, GeoError, GeoPoint, LocalXY};
use crate::scalar::{normalize_degrees, Real};

pub const DEFAULT_MEDIAN_TOL: f64 = 1e-6;
pub const DEFAULT_MEDIAN_MAX_ITER: usize = 1000;
pub const DEFAULT_MIN_CANDIDATES: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TriangulateError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("depth must be positive, got {0}")]
    InvalidDepth(f64),
    #[error("insufficient observations: {found} usable, {required} required")]
    InsufficientObservations { found: usize, required: usize },
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Camera(#[from] CameraError),
}

/// GPS position and heading of the camera for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose<T = f64> {
    pub position: GeoPoint<T>,
    /// Degrees clockwise from true north, in `[0, 360)`.
    pub azimuth: T,
    pub timestamp: T,
    pub frame_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidatePoint<T = f64> {
    pub xy: LocalXY<T>,
    pub source_frame: u64,
    pub depth_used: T,
    pub bearing_used: T,
}

/// One sighting of an object: where the camera was, what it saw, and the
/// (corrected) range to the object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sighting<T = f64> {
    pub pose: CameraPose<T>,
    pub pixel: PixelMeasurement<T>,
    pub depth: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeolocationEstimate<T = f64> {
    pub location: GeoPoint<T>,
    pub n_candidates: usize,
    /// Mean distance of the candidates to the estimate, meters.
    pub dispersion: T,
    pub converged: bool,
    pub first_pose: CameraPose<T>,
    pub last_pose: CameraPose<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeolocateOptions<T = f64> {
    pub min_candidates: usize,
    pub tol: T,
    pub max_iter: usize,
    /// Sightings with a larger range are discarded before triangulation.
    pub max_depth: Option<T>,
}

impl<T: Real> Default for GeolocateOptions<T> {
    fn default() -> Self {
        Self {
            min_candidates: DEFAULT_MIN_CANDIDATES,
            tol: T::lit(DEFAULT_MEDIAN_TOL),
            max_iter: DEFAULT_MEDIAN_MAX_ITER,
            max_depth: None,
        }
    }
}

/// Ray direction in the local frame, degrees counterclockwise from east,
/// for a view angle `theta` (positive = left of center).
pub fn bearing<T: Real>(pose: &CameraPose<T>, theta: T) -> T {
    normalize_degrees(T::lit(90.0) - pose.azimuth + theta)
}

/// End point of the sighting ray at `depth` meters, in the frame anchored at
/// `reference`.
pub fn candidate_point<T: Real>(
    pose: &CameraPose<T>,
    theta: T,
    depth: T,
    reference: GeoPoint<T>,
) -> Result<CandidatePoint<T>, TriangulateError> {
    if !depth.is_finite() || depth <= T::zero() {
        return Err(TriangulateError::InvalidDepth(depth.to_f64_lossy()));
    }
    let origin = to_local_xy(pose.position, reference)?;
    let beta = bearing(pose, theta);
    let rad = beta.to_radians();
    Ok(CandidatePoint {
        xy: LocalXY::new(origin.x + depth * rad.cos(), origin.y + depth * rad.sin()),
        source_frame: pose.frame_id,
        depth_used: depth,
        bearing_used: beta,
    })
}

/// Result of the geometric median solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianFit<T = f64> {
    pub point: LocalXY<T>,
    pub converged: bool,
    pub iterations: usize,
}

/// Sum of Euclidean distances from `p` to every point.
pub fn sum_of_distances<T: Real>(points: &[LocalXY<T>], p: &LocalXY<T>) -> T {
    points.iter().fold(T::zero(), |acc, q| acc + p.distance(q))
}

/// Point minimizing the sum of Euclidean distances to `points`.
///
/// Weiszfeld iterations from the centroid. When an iterate coincides with
/// input points the Vardi-Zhang step is used: the iterate is kept if the
/// pull of the remaining points is no stronger than the coincident weight,
/// otherwise it is moved off. Two points resolve to their midpoint.
pub fn geometric_median<T: Real>(
    points: &[LocalXY<T>],
    tol: T,
    max_iter: usize,
) -> Result<MedianFit<T>, TriangulateError> {
    if points.is_empty() {
        return Err(TriangulateError::InvalidInput("geometric median of empty set".into()));
    }
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(TriangulateError::InvalidInput("non-finite point".into()));
    }
    if points.len() == 1 {
        return Ok(MedianFit { point: points[0], converged: true, iterations: 0 });
    }
    if points.len() == 2 {
        let two = T::lit(2.0);
        let mid = LocalXY::new((points[0].x + points[1].x) / two, (points[0].y + points[1].y) / two);
        return Ok(MedianFit { point: mid, converged: true, iterations: 0 });
    }

    let n = T::from_usize(points.len()).unwrap();
    let centroid = LocalXY::new(
        points.iter().fold(T::zero(), |a, p| a + p.x) / n,
        points.iter().fold(T::zero(), |a, p| a + p.y) / n,
    );

    // distances at or below this count as coincident
    let scale = points.iter().fold(T::one(), |a, p| a.max(p.x.abs()).max(p.y.abs()));
    let coincide = scale * T::epsilon() * T::lit(16.0);
    let f_tol = tol * T::lit(1e-3);

    let mut y = centroid;
    let mut f_y = sum_of_distances(points, &y);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let mut wsum = T::zero();
        let mut tx = T::zero();
        let mut ty = T::zero();
        let mut rx = T::zero();
        let mut ry = T::zero();
        let mut eta = T::zero();
        for p in points {
            let d = y.distance(p);
            if d <= coincide {
                eta = eta + T::one();
                continue;
            }
            let w = T::one() / d;
            wsum = wsum + w;
            tx = tx + p.x * w;
            ty = ty + p.y * w;
            rx = rx + (p.x - y.x) * w;
            ry = ry + (p.y - y.y) * w;
        }
        if wsum == T::zero() {
            // every point coincides with the iterate
            converged = true;
            break;
        }
        let t = LocalXY::new(tx / wsum, ty / wsum);
        let next = if eta == T::zero() {
            t
        } else {
            let r = rx.hypot(ry);
            if r <= eta {
                converged = true;
                break;
            }
            let a = eta / r;
            LocalXY::new((T::one() - a) * t.x + a * y.x, (T::one() - a) * t.y + a * y.y)
        };
        let f_next = sum_of_distances(points, &next);
        let step = next.distance(&y);
        if f_next > f_y + f_y * T::epsilon() * T::lit(64.0) {
            // no further descent at working precision
            converged = step <= tol;
            break;
        }
        y = next;
        f_y = f_next;
        if step <= f_tol {
            converged = true;
            break;
        }
    }

    // Weiszfeld approaches an optimal input point only sublinearly; snap to
    // it when it is at least as good.
    for p in points {
        let f_p = sum_of_distances(points, p);
        if f_p <= f_y {
            y = *p;
            f_y = f_p;
        }
    }

    Ok(MedianFit { point: y, converged, iterations })
}

/// Geolocates one object from its sightings. The local frame is anchored at
/// the earliest sighting's camera position.
pub fn geolocate_object<T: Real>(
    sightings: &[Sighting<T>],
    intrinsics: &CameraIntrinsics<T>,
    options: &GeolocateOptions<T>,
) -> Result<GeolocationEstimate<T>, TriangulateError> {
    let mut usable: Vec<&Sighting<T>> = sightings
        .iter()
        .filter(|s| options.max_depth.is_none_or(|m| s.depth <= m))
        .collect();
    let required = options.min_candidates.max(1);
    if usable.len() < required {
        return Err(TriangulateError::InsufficientObservations { found: usable.len(), required });
    }
    usable.sort_by(|a, b| {
        a.pose
            .frame_id
            .cmp(&b.pose.frame_id)
            .then(a.pose.timestamp.partial_cmp(&b.pose.timestamp).unwrap_or(std::cmp::Ordering::Equal))
    });
    let reference = usable[0].pose.position;

    let mut candidates = Vec::with_capacity(usable.len());
    for s in &usable {
        let theta = pixel_to_angle(s.pixel.u, intrinsics)?;
        candidates.push(candidate_point(&s.pose, theta, s.depth, reference)?.xy);
    }
    let fit = geometric_median(&candidates, options.tol, options.max_iter)?;
    let n = T::from_usize(candidates.len()).unwrap();
    let dispersion = sum_of_distances(&candidates, &fit.point) / n;
    Ok(GeolocationEstimate {
        location: from_local_xy(fit.point, reference)?,
        n_candidates: candidates.len(),
        dispersion,
        converged: fit.converged,
        first_pose: usable[0].pose,
        last_pose: usable[usable.len() - 1].pose,
    })
}
