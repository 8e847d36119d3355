//! End-to-end stages that communicate through files in an output directory:
//! simulate, train, geolocate, measure and evaluate.

mod config;
mod evaluate;
mod reference;
mod stages;
pub mod svg;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

pub use config::{
    DepthConfig, EvaluateConfig, GeolocateConfig, IntrinsicsConfig, MeasureConfig, PathsConfig, RunConfig,
};
pub use evaluate::{
    cmd_evaluate, render_text_report, EvaluationReport, ObjectRecord, ObjectStatus, ScenarioSummary, StructuralRow,
    NamedTest, REPORT_VERSION,
};
pub use reference::{reference_constants, ReferenceConstants, REFERENCE_LABEL};
pub use stages::{
    cmd_geolocate, cmd_measure, cmd_simulate, cmd_train, load_poses, run_all, training_samples, EstimateProps,
    EstimatesFile, Measurement, MeasurementsFile, TerrainStatus, TrainReport, Unlocatable, ESTIMATES_FILE,
    MEASUREMENTS_FILE, MODEL_FILE, TRAIN_REPORT_FILE,
};

pub const REPORT_JSON_FILE: &str = "report.json";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const PLOTS_DIR: &str = "plots";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),
    #[error(transparent)]
    Simulate(#[from] crate::simulate::SimError),
    #[error(transparent)]
    Depth(#[from] crate::depth::DepthError),
    #[error(transparent)]
    Stats(#[from] crate::stats::StatsError),
    #[error(transparent)]
    Geo(#[from] crate::geodesy::GeoError),
    #[error(transparent)]
    Camera(#[from] crate::camera::CameraError),
}

impl PipelineError {
    /// True for problems with the user's inputs rather than the environment.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, PipelineError::Write { .. } | PipelineError::Simulate(crate::simulate::SimError::Io { .. }))
    }
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Read { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Json { path: path.display().to_string(), source })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    let err = |source| PipelineError::Write { path: path.display().to_string(), source };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(err)?;
    }
    let mut w = BufWriter::new(fs::File::create(path).map_err(err)?);
    w.write_all(text.as_bytes()).map_err(err)?;
    w.flush().map_err(err)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn scenario_dir(root: &Path, scenario: crate::simulate::Scenario) -> PathBuf {
    root.join(scenario.label())
}

/// Reads `report.json` from an output directory.
pub fn load_report(out: &Path) -> Result<EvaluationReport, PipelineError> {
    read_json(&out.join(REPORT_JSON_FILE))
}
