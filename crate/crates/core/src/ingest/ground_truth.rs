use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{open, IngestError};
use crate::geodesy::GeoPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Tree,
    Pole,
    Other,
}

impl ObjectKind {
    pub fn label(self) -> &'static str {
        match self {
            ObjectKind::Tree => "tree",
            ObjectKind::Pole => "pole",
            ObjectKind::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointGeometry {
    #[serde(rename = "type")]
    pub kind: String,
    /// `[lon, lat]`.
    pub coordinates: [f64; 2],
}

impl PointGeometry {
    pub fn new(p: GeoPoint) -> Self {
        Self { kind: "Point".into(), coordinates: [p.lon, p.lat] }
    }

    pub fn point(&self) -> GeoPoint {
        GeoPoint { lat: self.coordinates[1], lon: self.coordinates[0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature<P> {
    #[serde(rename = "type")]
    pub kind: String,
    pub geometry: PointGeometry,
    pub properties: P,
}

impl<P> Feature<P> {
    pub fn new(p: GeoPoint, properties: P) -> Self {
        Self { kind: "Feature".into(), geometry: PointGeometry::new(p), properties }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCollection<P> {
    #[serde(rename = "type")]
    pub kind: String,
    pub features: Vec<Feature<P>>,
}

impl<P> FeatureCollection<P> {
    pub fn new(features: Vec<Feature<P>>) -> Self {
        Self { kind: "FeatureCollection".into(), features }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TruthProperties {
    object_id: String,
    kind: ObjectKind,
    height_m: f64,
    width_m: f64,
    crown_width_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base_elevation_m: Option<f64>,
}

/// Surveyed position and dimensions of one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub object_id: String,
    pub kind: ObjectKind,
    pub location: GeoPoint,
    pub height_m: f64,
    /// Trunk diameter for trees, body width otherwise.
    pub width_m: f64,
    pub crown_width_m: Option<f64>,
    pub base_elevation_m: Option<f64>,
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthObject>, IngestError> {
    parse_ground_truth(open(path)?, &path.display().to_string())
}

pub fn parse_ground_truth<R: Read>(reader: R, file: &str) -> Result<Vec<GroundTruthObject>, IngestError> {
    let fc: FeatureCollection<TruthProperties> = serde_json::from_reader(reader).map_err(|e| {
        let line = e.line() as u64;
        IngestError::parse(file, line, "-", e.to_string())
    })?;
    let mut out = Vec::with_capacity(fc.features.len());
    for (i, f) in fc.features.into_iter().enumerate() {
        let location = GeoPoint::new(f.geometry.coordinates[1], f.geometry.coordinates[0])
            .map_err(|e| IngestError::parse(file, 0, &format!("features[{i}].geometry"), e.to_string()))?;
        let p = f.properties;
        if p.height_m <= 0.0 {
            return Err(IngestError::parse(file, 0, &format!("features[{i}].height_m"), "height must be positive"));
        }
        if p.crown_width_m.is_some() != (p.kind == ObjectKind::Tree) {
            return Err(IngestError::parse(
                file,
                0,
                &format!("features[{i}].crown_width_m"),
                "crown width is required for trees and only for trees",
            ));
        }
        out.push(GroundTruthObject {
            object_id: p.object_id,
            kind: p.kind,
            location,
            height_m: p.height_m,
            width_m: p.width_m,
            crown_width_m: p.crown_width_m,
            base_elevation_m: p.base_elevation_m,
        });
    }
    Ok(out)
}

pub fn write_ground_truth<W: Write>(mut w: W, objects: &[GroundTruthObject]) -> std::io::Result<()> {
    let fc = FeatureCollection::new(
        objects
            .iter()
            .map(|o| {
                Feature::new(
                    o.location,
                    TruthProperties {
                        object_id: o.object_id.clone(),
                        kind: o.kind,
                        height_m: o.height_m,
                        width_m: o.width_m,
                        crown_width_m: o.crown_width_m,
                        base_elevation_m: o.base_elevation_m,
                    },
                )
            })
            .collect(),
    );
    serde_json::to_writer_pretty(&mut w, &fc)?;
    writeln!(w)
}
