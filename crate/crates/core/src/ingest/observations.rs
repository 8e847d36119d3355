use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{csv_error, csv_reader, open, Columns, IngestError};
use crate::camera::PixelMeasurement;
use crate::geodesy::GeoPoint;

/// One object sighting in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub object_id: String,
    pub frame_id: u64,
    pub pixel: PixelMeasurement,
    /// Raw monocular depth read at three pixels on the object, meters.
    pub depth_samples: [f64; 3],
    /// Canopy extent in pixels; present for trees only.
    pub crown_pixel_width: Option<f64>,
}

impl Observation {
    pub fn raw_depth(&self) -> f64 {
        self.depth_samples.iter().sum::<f64>() / 3.0
    }
}

const OBS_COLUMNS: [&str; 9] =
    ["object_id", "frame_id", "u", "v", "pixel_height", "pixel_width", "depth1", "depth2", "depth3"];
const CROWN_COLUMN: &str = "crown_pixel_width";

pub fn read_observations(path: &Path) -> Result<Vec<Observation>, IngestError> {
    parse_observations(open(path)?, &path.display().to_string())
}

pub fn parse_observations<R: Read>(reader: R, file: &str) -> Result<Vec<Observation>, IngestError> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
    let cols = Columns::new(file, &header, &OBS_COLUMNS)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(file, e))?;
        let object_id = cols.raw(&rec, "object_id")?.to_string();
        if object_id.is_empty() {
            return Err(cols.err(&rec, "object_id", "empty object id"));
        }
        let frame_id = cols.u64(&rec, "frame_id")?;
        let u = cols.f64(&rec, "u")?;
        let v = cols.f64(&rec, "v")?;
        if u < 0.0 {
            return Err(cols.err(&rec, "u", "negative pixel coordinate"));
        }
        if v < 0.0 {
            return Err(cols.err(&rec, "v", "negative pixel coordinate"));
        }
        let pixel_height = cols.f64(&rec, "pixel_height")?;
        let pixel_width = cols.f64(&rec, "pixel_width")?;
        for (name, val) in [("pixel_height", pixel_height), ("pixel_width", pixel_width)] {
            if val < 0.0 {
                return Err(cols.err(&rec, name, "negative pixel size"));
            }
        }
        let mut depth_samples = [0.0; 3];
        for (i, name) in ["depth1", "depth2", "depth3"].iter().enumerate() {
            let d = cols.f64(&rec, name)?;
            if d <= 0.0 {
                return Err(cols.err(&rec, name, "depth sample must be positive"));
            }
            depth_samples[i] = d;
        }
        let crown_pixel_width = cols.opt_f64(&rec, CROWN_COLUMN)?;
        if crown_pixel_width.is_some_and(|c| c < 0.0) {
            return Err(cols.err(&rec, CROWN_COLUMN, "negative pixel size"));
        }
        out.push(Observation {
            object_id,
            frame_id,
            pixel: PixelMeasurement { u, v, pixel_height, pixel_width },
            depth_samples,
            crown_pixel_width,
        });
    }
    Ok(out)
}

/// Canonical observation CSV: the nine required columns followed by
/// `crown_pixel_width`, empty where absent.
pub fn write_observations<W: Write>(mut w: W, observations: &[Observation]) -> std::io::Result<()> {
    writeln!(w, "{},{CROWN_COLUMN}", OBS_COLUMNS.join(","))?;
    for o in observations {
        let crown = o.crown_pixel_width.map(|c| c.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            o.object_id,
            o.frame_id,
            o.pixel.u,
            o.pixel.v,
            o.pixel.pixel_height,
            o.pixel.pixel_width,
            o.depth_samples[0],
            o.depth_samples[1],
            o.depth_samples[2],
            crown
        )?;
    }
    Ok(())
}

/// Measured camera-to-object distance for one sighting (training target).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundDistance {
    pub object_id: String,
    pub frame_id: u64,
    pub distance_m: f64,
}

pub fn read_ground_distances(path: &Path) -> Result<Vec<GroundDistance>, IngestError> {
    parse_ground_distances(open(path)?, &path.display().to_string())
}

pub fn parse_ground_distances<R: Read>(reader: R, file: &str) -> Result<Vec<GroundDistance>, IngestError> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
    let cols = Columns::new(file, &header, &["object_id", "frame_id", "distance_m"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(file, e))?;
        let distance_m = cols.f64(&rec, "distance_m")?;
        if distance_m <= 0.0 {
            return Err(cols.err(&rec, "distance_m", "distance must be positive"));
        }
        out.push(GroundDistance {
            object_id: cols.raw(&rec, "object_id")?.to_string(),
            frame_id: cols.u64(&rec, "frame_id")?,
            distance_m,
        });
    }
    Ok(out)
}

pub fn write_ground_distances<W: Write>(mut w: W, rows: &[GroundDistance]) -> std::io::Result<()> {
    writeln!(w, "object_id,frame_id,distance_m")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.object_id, r.frame_id, r.distance_m)?;
    }
    Ok(())
}

/// A ground feature whose logged GPS position (`observed`) can be compared
/// with its surveyed position (`truth`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPair {
    pub observed: GeoPoint,
    pub truth: GeoPoint,
}

pub fn read_control_points(path: &Path) -> Result<Vec<ControlPair>, IngestError> {
    parse_control_points(open(path)?, &path.display().to_string())
}

pub fn parse_control_points<R: Read>(reader: R, file: &str) -> Result<Vec<ControlPair>, IngestError> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
    let cols = Columns::new(file, &header, &["observed_lat", "observed_lon", "true_lat", "true_lon"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(file, e))?;
        let observed = GeoPoint::new(cols.f64(&rec, "observed_lat")?, cols.f64(&rec, "observed_lon")?)
            .map_err(|e| cols.err(&rec, "observed_lat", e.to_string()))?;
        let truth = GeoPoint::new(cols.f64(&rec, "true_lat")?, cols.f64(&rec, "true_lon")?)
            .map_err(|e| cols.err(&rec, "true_lat", e.to_string()))?;
        out.push(ControlPair { observed, truth });
    }
    Ok(out)
}

pub fn write_control_points<W: Write>(mut w: W, pairs: &[ControlPair]) -> std::io::Result<()> {
    writeln!(w, "observed_lat,observed_lon,true_lat,true_lon")?;
    for p in pairs {
        writeln!(w, "{},{},{},{}", p.observed.lat, p.observed.lon, p.truth.lat, p.truth.lon)?;
    }
    Ok(())
}
