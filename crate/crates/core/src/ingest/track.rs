use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{csv_error, csv_reader, open, Columns, ControlPair, IngestError};
use crate::geodesy::{from_local_xy, to_local_xy, GeoPoint, LocalXY};
use crate::scalar::normalize_degrees;
use crate::triangulate::CameraPose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedClass {
    /// Below 40 km/h.
    Slow,
    /// 40 km/h and above.
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mount {
    /// Behind the windshield, 1.2 m above the road.
    Inside,
    /// On the hood, 0.9 m above the road.
    Outside,
}

impl Mount {
    pub fn height_m(self) -> f64 {
        match self {
            Mount::Inside => 1.2,
            Mount::Outside => 0.9,
        }
    }
}

/// One video frame; frames without a GPS fix carry no position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackFrame {
    pub frame_id: u64,
    pub timestamp: f64,
    pub position: Option<GeoPoint>,
    pub azimuth: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackMeta {
    pub speed_class: Option<SpeedClass>,
    pub mount: Option<Mount>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Track {
    pub frames: Vec<TrackFrame>,
    pub meta: TrackMeta,
}

/// A pose ready for triangulation, labeled with how its azimuth was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPose {
    pub pose: CameraPose,
    pub azimuth_derived: bool,
}

pub fn read_track(path: &Path) -> Result<Track, IngestError> {
    parse_track(open(path)?, &path.display().to_string())
}

pub fn parse_track<R: Read>(reader: R, file: &str) -> Result<Track, IngestError> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
    let cols = Columns::new(file, &header, &["frame_id", "timestamp_s", "lat", "lon"])?;
    let mut frames: Vec<TrackFrame> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(file, e))?;
        let frame_id = cols.u64(&rec, "frame_id")?;
        let timestamp = cols.f64(&rec, "timestamp_s")?;
        if let Some(prev) = frames.last() {
            if timestamp < prev.timestamp {
                return Err(cols.err(&rec, "timestamp_s", "timestamps must be non-decreasing"));
            }
            if frame_id <= prev.frame_id {
                return Err(cols.err(&rec, "frame_id", "frame ids must be increasing"));
            }
        }
        let position = match (cols.opt_f64(&rec, "lat")?, cols.opt_f64(&rec, "lon")?) {
            (Some(lat), Some(lon)) => {
                Some(GeoPoint::new(lat, lon).map_err(|e| cols.err(&rec, "lat", e.to_string()))?)
            }
            (None, None) => None,
            _ => return Err(cols.err(&rec, "lon", "lat and lon must both be present or both empty")),
        };
        let azimuth = cols.opt_f64(&rec, "azimuth_deg")?.map(normalize_degrees);
        frames.push(TrackFrame { frame_id, timestamp, position, azimuth });
    }
    Ok(Track { frames, meta: TrackMeta::default() })
}

pub fn write_track<W: Write>(mut w: W, track: &Track) -> std::io::Result<()> {
    writeln!(w, "frame_id,timestamp_s,lat,lon,azimuth_deg")?;
    for f in &track.frames {
        let (lat, lon) = f.position.map(|p| (p.lat.to_string(), p.lon.to_string())).unwrap_or_default();
        let az = f.azimuth.map(|a| a.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{},{}", f.frame_id, f.timestamp, lat, lon, az)?;
    }
    Ok(())
}

/// Keeps one GPS-tagged frame per `stride` window of frame ids: the first
/// tagged frame at or after each multiple of `stride`.
pub fn sample_frames(track: &Track, stride: u64) -> Result<Track, IngestError> {
    if stride == 0 {
        return Err(IngestError::Offset("stride must be at least 1".into()));
    }
    let mut frames = Vec::new();
    let mut last_slot = None;
    for f in &track.frames {
        if f.position.is_none() {
            continue;
        }
        let slot = f.frame_id / stride;
        if last_slot != Some(slot) {
            frames.push(*f);
            last_slot = Some(slot);
        }
    }
    if frames.is_empty() {
        return Err(IngestError::NoUsableFrames);
    }
    Ok(Track { frames, meta: track.meta })
}

/// Compass heading from `a` to `b`, degrees clockwise from north.
pub fn derive_azimuth(a: GeoPoint, b: GeoPoint) -> Result<f64, IngestError> {
    let d = to_local_xy(b, a)?;
    Ok(normalize_degrees(d.x.atan2(d.y).to_degrees()))
}

/// Camera poses for every GPS-tagged frame. Missing azimuths are derived
/// from the displacement to the next fix (the previous one for the last).
pub fn resolve_poses(track: &Track) -> Result<Vec<ResolvedPose>, IngestError> {
    let tagged: Vec<(&TrackFrame, GeoPoint)> =
        track.frames.iter().filter_map(|f| f.position.map(|p| (f, p))).collect();
    let mut out = Vec::with_capacity(tagged.len());
    for (i, (frame, pos)) in tagged.iter().enumerate() {
        let (azimuth, derived) = match frame.azimuth {
            Some(a) => (a, false),
            None => {
                let (a, b) = if i + 1 < tagged.len() {
                    (*pos, tagged[i + 1].1)
                } else if i > 0 {
                    (tagged[i - 1].1, *pos)
                } else {
                    return Err(IngestError::Offset(format!(
                        "frame {} has no azimuth and no neighbour to derive one",
                        frame.frame_id
                    )));
                };
                (derive_azimuth(a, b)?, true)
            }
        };
        out.push(ResolvedPose {
            pose: CameraPose { position: *pos, azimuth, timestamp: frame.timestamp, frame_id: frame.frame_id },
            azimuth_derived: derived,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetOptions {
    /// Control pairs further apart than this are suspicious.
    pub max_pair_distance_m: f64,
    /// Fail instead of warning on suspicious pairs.
    pub strict: bool,
}

impl Default for OffsetOptions {
    fn default() -> Self {
        Self { max_pair_distance_m: 50.0, strict: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetCorrection {
    /// Tangent frame the shift is expressed in.
    pub reference: GeoPoint,
    pub shift: LocalXY,
    /// Per pair: (truth - observed) - shift, meters.
    pub residuals: Vec<LocalXY>,
    pub warnings: Vec<String>,
}

/// Removes a systematic GPS offset: every pose is translated by the mean of
/// (truth - observed) over the control pairs, in the tangent frame anchored
/// at the first pair's observed point.
pub fn correct_gps_offset(
    track: &Track,
    pairs: &[ControlPair],
    options: &OffsetOptions,
) -> Result<(Track, OffsetCorrection), IngestError> {
    let first = pairs.first().ok_or_else(|| IngestError::Offset("no control pairs".into()))?;
    let reference = first.observed;
    let mut deltas = Vec::with_capacity(pairs.len());
    let mut warnings = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        let d = to_local_xy(p.truth, reference)? - to_local_xy(p.observed, reference)?;
        if d.norm() > options.max_pair_distance_m {
            let msg = format!(
                "control pair {i} is {:.1} m apart (limit {} m)",
                d.norm(),
                options.max_pair_distance_m
            );
            if options.strict {
                return Err(IngestError::Offset(msg));
            }
            log::warn!("{msg}");
            warnings.push(msg);
        }
        deltas.push(d);
    }
    let n = deltas.len() as f64;
    let shift = LocalXY::new(deltas.iter().map(|d| d.x).sum::<f64>() / n, deltas.iter().map(|d| d.y).sum::<f64>() / n);
    let residuals = deltas.iter().map(|d| *d - shift).collect();

    let mut frames = track.frames.clone();
    for f in &mut frames {
        if let Some(p) = f.position {
            f.position = Some(from_local_xy(to_local_xy(p, reference)? + shift, reference)?);
        }
    }
    Ok((Track { frames, meta: track.meta }, OffsetCorrection { reference, shift, residuals, warnings }))
}
