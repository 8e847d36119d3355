//! Input files and their preprocessing: observation and track CSVs, ESRI
//! ASCII elevation grids, GeoJSON ground truth, frame sampling and
//! systematic GPS offset correction.

mod dem;
mod ground_truth;
mod observations;
mod track;

use std::path::Path;

use thiserror::Error;

pub use dem::{parse_dem, read_dem, sample_dem, write_dem, DemError, DemGrid};
pub use ground_truth::{
    parse_ground_truth, read_ground_truth, write_ground_truth, Feature, FeatureCollection, GroundTruthObject,
    ObjectKind, PointGeometry,
};
pub use observations::{
    parse_control_points, parse_ground_distances, parse_observations, read_control_points, read_ground_distances,
    read_observations, write_control_points, write_ground_distances, write_observations, ControlPair,
    GroundDistance, Observation,
};
pub use track::{
    correct_gps_offset, derive_azimuth, parse_track, read_track, resolve_poses, sample_frames, write_track, Mount,
    OffsetCorrection, OffsetOptions, ResolvedPose, SpeedClass, Track, TrackFrame, TrackMeta,
};

/// Frames per second of the source video; the GPS log ticks once a second.
pub const VIDEO_FPS: u64 = 30;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: field `{field}`: {message}")]
    Parse { file: String, line: u64, field: String, message: String },
    #[error("no usable frames after sampling")]
    NoUsableFrames,
    #[error("gps offset correction: {0}")]
    Offset(String),
    #[error(transparent)]
    Geo(#[from] crate::geodesy::GeoError),
}

impl IngestError {
    pub(crate) fn parse(file: &str, line: u64, field: &str, message: impl Into<String>) -> Self {
        Self::Parse { file: file.to_string(), line, field: field.to_string(), message: message.into() }
    }
}

pub(crate) fn open(path: &Path) -> Result<std::fs::File, IngestError> {
    std::fs::File::open(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

/// Column lookup for a header-required CSV.
pub(crate) struct Columns {
    file: String,
    names: Vec<String>,
}

impl Columns {
    pub(crate) fn new(file: &str, header: &csv::StringRecord, required: &[&str]) -> Result<Self, IngestError> {
        let names: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
        for r in required {
            if !names.iter().any(|n| n == r) {
                return Err(IngestError::parse(file, 1, r, "missing column in header"));
            }
        }
        Ok(Self { file: file.to_string(), names })
    }

    pub(crate) fn has(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub(crate) fn raw<'r>(&self, rec: &'r csv::StringRecord, name: &str) -> Result<&'r str, IngestError> {
        let line = rec.position().map_or(0, |p| p.line());
        let idx = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| IngestError::parse(&self.file, line, name, "missing column"))?;
        rec.get(idx)
            .map(str::trim)
            .ok_or_else(|| IngestError::parse(&self.file, line, name, "missing value"))
    }

    pub(crate) fn opt_f64(&self, rec: &csv::StringRecord, name: &str) -> Result<Option<f64>, IngestError> {
        if !self.has(name) {
            return Ok(None);
        }
        let line = rec.position().map_or(0, |p| p.line());
        let idx = self.names.iter().position(|n| n == name).unwrap();
        match rec.get(idx).map(str::trim) {
            None | Some("") => Ok(None),
            Some(s) => {
                let v: f64 = s
                    .parse()
                    .map_err(|_| IngestError::parse(&self.file, line, name, format!("not a number: {s:?}")))?;
                if !v.is_finite() {
                    return Err(IngestError::parse(&self.file, line, name, "non-finite value"));
                }
                Ok(Some(v))
            }
        }
    }

    pub(crate) fn f64(&self, rec: &csv::StringRecord, name: &str) -> Result<f64, IngestError> {
        let line = rec.position().map_or(0, |p| p.line());
        self.opt_f64(rec, name)?
            .ok_or_else(|| IngestError::parse(&self.file, line, name, "missing value"))
    }

    pub(crate) fn u64(&self, rec: &csv::StringRecord, name: &str) -> Result<u64, IngestError> {
        let line = rec.position().map_or(0, |p| p.line());
        let s = self.raw(rec, name)?;
        s.parse()
            .map_err(|_| IngestError::parse(&self.file, line, name, format!("not a non-negative integer: {s:?}")))
    }

    pub(crate) fn err(&self, rec: &csv::StringRecord, field: &str, message: impl Into<String>) -> IngestError {
        IngestError::parse(&self.file, rec.position().map_or(0, |p| p.line()), field, message)
    }
}

pub(crate) fn csv_reader<R: std::io::Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(reader)
}

pub(crate) fn csv_error(file: &str, e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    IngestError::parse(file, line, "-", e.to_string())
}
