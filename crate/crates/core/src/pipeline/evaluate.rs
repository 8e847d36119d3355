//! Compares estimates and measurements with ground truth and runs the
//! scenario comparisons.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::reference::{reference_constants, ReferenceConstants, ReferenceSummary};
use super::stages::{training_samples, EstimatesFile, MeasurementsFile, TerrainStatus, TrainReport};
use super::{read_json, scenario_dir, svg, write_json, write_text, PipelineError, RunConfig};
use super::{ESTIMATES_FILE, MEASUREMENTS_FILE, PLOTS_DIR, REPORT_JSON_FILE, REPORT_TEXT_FILE, TRAIN_REPORT_FILE};
use crate::depth::{split_by_frame, CorrectionModel};
use crate::geodesy::{haversine_distance, GeoPoint};
use crate::ingest::{read_ground_distances, read_ground_truth, read_observations, GroundTruthObject, ObjectKind};
use crate::simulate::{Scenario, GROUND_DISTANCES_FILE, GROUND_TRUTH_FILE, OBSERVATIONS_FILE};
use crate::stats::{bin_by_distance, bonferroni, friedman, spearman, summarize, wilcoxon_signed_rank, DistanceBin, SummaryRow, TestResult};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectStatus {
    Located,
    Unlocatable,
    /// Never observed in the drive.
    OutOfCoverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub scenario: Scenario,
    pub object_id: String,
    pub kind: ObjectKind,
    pub status: ObjectStatus,
    pub reason: Option<String>,
    /// `[lon, lat]`
    pub truth: [f64; 2],
    pub estimate: Option<[f64; 2]>,
    pub error_m: Option<f64>,
    pub n_candidates: Option<usize>,
    /// From the first and last observing camera to the true location.
    pub first_camera_distance_m: Option<f64>,
    pub last_camera_distance_m: Option<f64>,
    /// Signed errors, estimate minus truth.
    pub height_error_m: Option<f64>,
    pub width_error_m: Option<f64>,
    pub crown_width_error_m: Option<f64>,
    pub terrain: Option<TerrainStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: Scenario,
    pub n_objects: usize,
    pub n_located: usize,
    pub n_unlocatable: usize,
    pub n_out_of_coverage: usize,
    pub geolocation: Option<SummaryRow>,
    /// Errors binned by last-camera distance.
    pub distance_bins: Vec<DistanceBin>,
    pub reference: Option<ReferenceSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralRow {
    pub scenario: Scenario,
    /// `height_m`, `width_m` or `crown_width_m`.
    pub attribute: String,
    /// `None` pools every class.
    pub kind: Option<ObjectKind>,
    /// Over signed errors; `mae` is the mean absolute error.
    pub summary: SummaryRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTest {
    pub family: String,
    pub name: String,
    pub result: Option<TestResult>,
    /// Bonferroni over the tests of the family that produced a result.
    pub p_adjusted: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Reconciliation {
    /// `scenario/object_id` entries that are not in the ground truth.
    pub unknown_ids: Vec<String>,
    /// Located objects with no measurement row.
    pub unmeasured: Vec<String>,
    /// Objects left out of the paired scenario tests.
    pub unpaired: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub version: u32,
    pub seed: u64,
    pub scenarios: Vec<ScenarioSummary>,
    pub structural: Vec<StructuralRow>,
    pub tests: Vec<NamedTest>,
    pub depth: Option<TrainReport>,
    pub reconciliation: Reconciliation,
    pub objects: Vec<ObjectRecord>,
    pub reference: ReferenceConstants,
}

fn lon_lat(p: GeoPoint) -> [f64; 2] {
    [p.lon, p.lat]
}

fn point(c: [f64; 2]) -> Result<GeoPoint, PipelineError> {
    Ok(GeoPoint::new(c[1], c[0])?)
}

fn scenario_records(
    s: Scenario,
    truth: &[GroundTruthObject],
    estimates: &EstimatesFile,
    measurements: &MeasurementsFile,
    rec: &mut Reconciliation,
) -> Result<Vec<ObjectRecord>, PipelineError> {
    let known: BTreeSet<&str> = truth.iter().map(|o| o.object_id.as_str()).collect();
    let located: BTreeMap<&str, _> =
        estimates.located.features.iter().map(|f| (f.properties.object_id.as_str(), f)).collect();
    let failed: BTreeMap<&str, &str> =
        estimates.unlocatable.iter().map(|u| (u.object_id.as_str(), u.reason.as_str())).collect();
    let measured: BTreeMap<&str, _> = measurements.objects.iter().map(|m| (m.object_id.as_str(), m)).collect();
    for id in located.keys().chain(failed.keys()).chain(measured.keys()).collect::<BTreeSet<_>>() {
        if !known.contains(id) {
            rec.unknown_ids.push(format!("{}/{id}", s.label()));
        }
    }

    let mut out = Vec::with_capacity(truth.len());
    for obj in truth {
        let id = obj.object_id.as_str();
        let mut r = ObjectRecord {
            scenario: s,
            object_id: obj.object_id.clone(),
            kind: obj.kind,
            status: ObjectStatus::OutOfCoverage,
            reason: None,
            truth: lon_lat(obj.location),
            estimate: None,
            error_m: None,
            n_candidates: None,
            first_camera_distance_m: None,
            last_camera_distance_m: None,
            height_error_m: None,
            width_error_m: None,
            crown_width_error_m: None,
            terrain: None,
        };
        if let Some(f) = located.get(id) {
            let p = &f.properties;
            let est = f.geometry.point();
            r.status = ObjectStatus::Located;
            r.estimate = Some(lon_lat(est));
            r.error_m = Some(haversine_distance(est, obj.location)?);
            r.n_candidates = Some(p.n_candidates);
            r.first_camera_distance_m = Some(haversine_distance(point(p.first_camera)?, obj.location)?);
            r.last_camera_distance_m = Some(haversine_distance(point(p.last_camera)?, obj.location)?);
            match measured.get(id) {
                Some(m) => {
                    r.height_error_m = Some(m.best_height() - obj.height_m);
                    r.width_error_m = Some(m.width_m - obj.width_m);
                    r.crown_width_error_m = m.crown_width_m.zip(obj.crown_width_m).map(|(e, t)| e - t);
                    r.terrain = Some(m.terrain);
                }
                None => rec.unmeasured.push(format!("{}/{id}", s.label())),
            }
        } else if let Some(reason) = failed.get(id) {
            r.status = ObjectStatus::Unlocatable;
            r.reason = Some((*reason).to_string());
        }
        out.push(r);
    }
    Ok(out)
}

fn finish_family(tests: &mut [NamedTest]) -> Result<(), PipelineError> {
    let idx: Vec<usize> = (0..tests.len()).filter(|&i| tests[i].result.is_some()).collect();
    let ps: Vec<f64> = idx.iter().map(|&i| tests[i].result.unwrap().p_value).collect();
    let adj = bonferroni(&ps, ps.len())?;
    for (i, p) in idx.into_iter().zip(adj) {
        tests[i].p_adjusted = Some(p);
    }
    Ok(())
}

fn named(family: &str, name: String, outcome: Result<TestResult, String>) -> NamedTest {
    let (result, note) = match outcome {
        Ok(r) => (Some(r), None),
        Err(e) => {
            log::warn!("{family}/{name}: {e}");
            (None, Some(e))
        }
    };
    NamedTest { family: family.into(), name, result, p_adjusted: None, note }
}

/// Values of `a` and `b` for objects present in both, in id order.
fn paired(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> (Vec<f64>, Vec<f64>) {
    a.iter().filter_map(|(id, x)| b.get(id).map(|y| (*x, *y))).unzip()
}

fn wilcoxon_pair(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Result<TestResult, String> {
    let (x, y) = paired(a, b);
    if x.is_empty() {
        return Err("no paired objects".into());
    }
    wilcoxon_signed_rank(&x, &y).map_err(|e| e.to_string())
}

fn geolocation_tests(
    scenarios: &[Scenario],
    errors: &BTreeMap<Scenario, BTreeMap<String, f64>>,
    records: &[ObjectRecord],
    rec: &mut Reconciliation,
) -> Result<Vec<NamedTest>, PipelineError> {
    use Scenario::*;
    let mut all = Vec::new();

    let common: BTreeSet<&String> = match scenarios.first() {
        Some(first) => errors[first].keys().filter(|id| scenarios.iter().all(|s| errors[s].contains_key(*id))).collect(),
        None => BTreeSet::new(),
    };
    let seen: BTreeSet<&String> = errors.values().flat_map(|m| m.keys()).collect();
    for id in seen.difference(&common) {
        rec.unpaired.push((*id).clone());
    }
    if !rec.unpaired.is_empty() {
        log::warn!("{} object(s) not located in every scenario; dropped from paired tests", rec.unpaired.len());
    }
    let common_map = |s: Scenario| -> BTreeMap<String, f64> {
        errors[&s].iter().filter(|(id, _)| common.contains(id)).map(|(k, v)| (k.clone(), *v)).collect()
    };

    let mut family = Vec::new();
    for (a, b) in [(InSlow, InSpeed), (OutSlow, OutSpeed), (InSlow, OutSlow), (InSpeed, OutSpeed)] {
        if scenarios.contains(&a) && scenarios.contains(&b) {
            family.push(named("wilcoxon", format!("{} vs {}", a.label(), b.label()), wilcoxon_pair(&common_map(a), &common_map(b))));
        }
    }
    if scenarios.len() == 4 {
        let avg = |p: Scenario, q: Scenario| -> BTreeMap<String, f64> {
            let (mp, mq) = (common_map(p), common_map(q));
            mp.iter().map(|(id, v)| (id.clone(), (v + mq[id]) / 2.0)).collect()
        };
        let slow = avg(InSlow, OutSlow);
        let high = avg(InSpeed, OutSpeed);
        family.push(named("wilcoxon", "speed (slow vs high, pooled)".into(), wilcoxon_pair(&slow, &high)));
        let inside = avg(InSlow, InSpeed);
        let outside = avg(OutSlow, OutSpeed);
        family.push(named("wilcoxon", "mount (inside vs outside, pooled)".into(), wilcoxon_pair(&inside, &outside)));
    }
    finish_family(&mut family)?;
    all.extend(family);

    if scenarios.len() >= 2 {
        let matrix: Vec<Vec<f64>> =
            common.iter().map(|id| scenarios.iter().map(|s| errors[s][*id]).collect()).collect();
        let label = scenarios.iter().map(|s| s.label()).collect::<Vec<_>>().join(", ");
        let mut family = vec![named("friedman", label, friedman(&matrix).map_err(|e| e.to_string()))];
        finish_family(&mut family)?;
        all.extend(family);
    }

    let mut family = Vec::new();
    for &s in scenarios {
        let rows: Vec<&ObjectRecord> = records.iter().filter(|r| r.scenario == s && r.error_m.is_some()).collect();
        let err: Vec<f64> = rows.iter().map(|r| r.error_m.unwrap()).collect();
        for (which, pick) in [("first", 0), ("last", 1)] {
            let dist: Vec<f64> = rows
                .iter()
                .map(|r| if pick == 0 { r.first_camera_distance_m } else { r.last_camera_distance_m }.unwrap())
                .collect();
            family.push(named(
                "spearman",
                format!("{}: error vs {which} camera distance", s.label()),
                spearman(&err, &dist).map_err(|e| e.to_string()),
            ));
        }
    }
    finish_family(&mut family)?;
    all.extend(family);
    Ok(all)
}

const ATTRIBUTES: [&str; 3] = ["height_m", "width_m", "crown_width_m"];

fn attribute(r: &ObjectRecord, name: &str) -> Option<f64> {
    match name {
        "height_m" => r.height_error_m,
        "width_m" => r.width_error_m,
        _ => r.crown_width_error_m,
    }
}

fn structural(scenarios: &[Scenario], records: &[ObjectRecord]) -> Result<(Vec<StructuralRow>, Vec<NamedTest>), PipelineError> {
    let mut rows = Vec::new();
    let mut tests = Vec::new();
    for attr in ATTRIBUTES {
        for &s in scenarios {
            for kind in [None, Some(ObjectKind::Tree), Some(ObjectKind::Pole), Some(ObjectKind::Other)] {
                let values: Vec<f64> = records
                    .iter()
                    .filter(|r| r.scenario == s && kind.is_none_or(|k| r.kind == k))
                    .filter_map(|r| attribute(r, attr))
                    .collect();
                if values.is_empty() {
                    continue;
                }
                rows.push(StructuralRow { scenario: s, attribute: attr.into(), kind, summary: summarize(&values)? });
            }
        }
        if !scenarios.contains(&Scenario::InSlow) {
            continue;
        }
        let abs_errors = |s: Scenario| -> BTreeMap<String, f64> {
            records
                .iter()
                .filter(|r| r.scenario == s)
                .filter_map(|r| attribute(r, attr).map(|v| (r.object_id.clone(), v.abs())))
                .collect()
        };
        let base = abs_errors(Scenario::InSlow);
        let mut family: Vec<NamedTest> = scenarios
            .iter()
            .filter(|s| **s != Scenario::InSlow)
            .map(|&s| {
                named(&format!("structural {attr}"), format!("In_Slow vs {}", s.label()), wilcoxon_pair(&base, &abs_errors(s)))
            })
            .collect();
        finish_family(&mut family)?;
        tests.extend(family);
    }
    Ok((rows, tests))
}

fn depth_plots(cfg: &RunConfig, out: &Path, plots: &Path) -> Result<(), PipelineError> {
    let data = cfg.data_dir(out);
    let mut points = Vec::new();
    for &s in &cfg.depth.train_scenarios {
        let dir = scenario_dir(&data, s);
        let truth_path = dir.join(GROUND_DISTANCES_FILE);
        if !truth_path.exists() {
            continue;
        }
        let truth: BTreeMap<(String, u64), f64> =
            read_ground_distances(&truth_path)?.into_iter().map(|g| ((g.object_id, g.frame_id), g.distance_m)).collect();
        for obs in read_observations(&dir.join(OBSERVATIONS_FILE))? {
            if let Some(d) = truth.get(&(obs.object_id.clone(), obs.frame_id)) {
                points.push((*d, obs.raw_depth()));
            }
        }
    }
    if !points.is_empty() {
        let doc = svg::scatter("Raw depth vs true distance", "true distance (m)", "raw depth (m)", &points, true);
        write_text(&plots.join("depth_raw_vs_true.svg"), &doc)?;
    }

    let model_path = cfg.model_path(out);
    if cfg.geolocate.correction && model_path.exists() && !points.is_empty() {
        let text = std::fs::read_to_string(&model_path)
            .map_err(|source| PipelineError::Read { path: model_path.display().to_string(), source })?;
        let model = CorrectionModel::from_json(&text)?;
        let samples = training_samples(cfg, out, &cfg.intrinsics.build()?)?;
        let (_, test) = split_by_frame(&samples, cfg.depth.train_fraction, cfg.seed)?;
        let pts: Vec<(f64, f64)> =
            test.iter().map(|s| (s.ground_distance, model.predict(&s.features))).collect();
        let doc = svg::scatter("Corrected depth on held-out frames", "true distance (m)", "predicted (m)", &pts, true);
        write_text(&plots.join("depth_predicted_vs_true.svg"), &doc)?;
    }
    Ok(())
}

fn write_plots(cfg: &RunConfig, out: &Path, report: &EvaluationReport) -> Result<(), PipelineError> {
    let plots = out.join(PLOTS_DIR);
    let located: Vec<&ObjectRecord> = report.objects.iter().filter(|r| r.error_m.is_some()).collect();
    let pts: Vec<(f64, f64)> =
        located.iter().map(|r| (r.last_camera_distance_m.unwrap(), r.error_m.unwrap())).collect();
    let doc = svg::scatter("Geolocation error vs last camera distance", "distance (m)", "error (m)", &pts, false);
    write_text(&plots.join("error_vs_distance.svg"), &doc)?;

    let groups: Vec<(String, Vec<f64>)> = report
        .scenarios
        .iter()
        .map(|s| (s.scenario.label().to_string(), located.iter().filter(|r| r.scenario == s.scenario).map(|r| r.error_m.unwrap()).collect()))
        .collect();
    write_text(&plots.join("error_by_scenario.svg"), &svg::boxplot("Geolocation error by scenario", "error (m)", &groups))?;

    let edges = &cfg.evaluate.distance_bin_edges;
    let errs: Vec<f64> = located.iter().map(|r| r.error_m.unwrap()).collect();
    let dists: Vec<f64> = located.iter().map(|r| r.last_camera_distance_m.unwrap()).collect();
    let groups: Vec<(String, Vec<f64>)> = bin_by_distance(&errs, &dists, edges)?
        .into_iter()
        .map(|b| (bin_label(&b), b.values))
        .collect();
    write_text(&plots.join("error_by_distance_bin.svg"), &svg::boxplot("Geolocation error by distance", "error (m)", &groups))?;

    depth_plots(cfg, out, &plots)
}

fn bin_label(b: &DistanceBin) -> String {
    match b.hi {
        Some(hi) => format!("{}-{} m", b.lo, hi),
        None => format!(">={} m", b.lo),
    }
}

/// Builds the report from the files under `out` and writes it as JSON, text
/// and (unless disabled) SVG plots.
pub fn cmd_evaluate(cfg: &RunConfig, out: &Path) -> Result<EvaluationReport, PipelineError> {
    let data = cfg.data_dir(out);
    let mut truth = read_ground_truth(&data.join(GROUND_TRUTH_FILE))?;
    truth.sort_by(|a, b| a.object_id.cmp(&b.object_id));
    let reference = reference_constants();
    let mut rec = Reconciliation::default();
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    let mut errors: BTreeMap<Scenario, BTreeMap<String, f64>> = BTreeMap::new();
    for &s in &cfg.scenarios {
        let dir = scenario_dir(out, s);
        let estimates: EstimatesFile = read_json(&dir.join(ESTIMATES_FILE))?;
        let measurements: MeasurementsFile = read_json(&dir.join(MEASUREMENTS_FILE))?;
        let rows = scenario_records(s, &truth, &estimates, &measurements, &mut rec)?;
        let located: Vec<&ObjectRecord> = rows.iter().filter(|r| r.error_m.is_some()).collect();
        let errs: Vec<f64> = located.iter().map(|r| r.error_m.unwrap()).collect();
        let dists: Vec<f64> = located.iter().map(|r| r.last_camera_distance_m.unwrap()).collect();
        let count = |st: ObjectStatus| rows.iter().filter(|r| r.status == st).count();
        summaries.push(ScenarioSummary {
            scenario: s,
            n_objects: rows.len(),
            n_located: count(ObjectStatus::Located),
            n_unlocatable: count(ObjectStatus::Unlocatable),
            n_out_of_coverage: count(ObjectStatus::OutOfCoverage),
            geolocation: if errs.is_empty() { None } else { Some(summarize(&errs)?) },
            distance_bins: bin_by_distance(&errs, &dists, &cfg.evaluate.distance_bin_edges)?,
            reference: reference.geolocation.iter().find(|r| r.scenario == s.label()).cloned(),
        });
        errors.insert(s, located.iter().map(|r| (r.object_id.clone(), r.error_m.unwrap())).collect());
        records.extend(rows);
    }
    if !rec.unknown_ids.is_empty() {
        log::warn!("{} id(s) not in the ground truth", rec.unknown_ids.len());
    }
    let mut tests = geolocation_tests(&cfg.scenarios, &errors, &records, &mut rec)?;
    let (structural_rows, structural_tests) = structural(&cfg.scenarios, &records)?;
    tests.extend(structural_tests);
    let train_report = out.join(TRAIN_REPORT_FILE);
    let depth = if train_report.exists() { Some(read_json(&train_report)?) } else { None };

    let report = EvaluationReport {
        version: REPORT_VERSION,
        seed: cfg.seed,
        scenarios: summaries,
        structural: structural_rows,
        tests,
        depth,
        reconciliation: rec,
        objects: records,
        reference,
    };
    write_json(&out.join(REPORT_JSON_FILE), &report)?;
    write_text(&out.join(REPORT_TEXT_FILE), &render_text_report(&report))?;
    if cfg.evaluate.plots {
        write_plots(cfg, out, &report)?;
    }
    Ok(report)
}

fn summary_cells(r: &SummaryRow) -> String {
    format!(
        "{:>4} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2}",
        r.n, r.mean, r.median, r.std, r.min, r.q25, r.q75, r.max, r.iqr
    )
}

fn p_text(p: Option<f64>) -> String {
    match p {
        Some(p) if p < 1e-4 => "<0.0001".into(),
        Some(p) => format!("{p:.4}"),
        None => "-".into(),
    }
}

/// Fixed-width plain-text rendering of a report.
pub fn render_text_report(report: &EvaluationReport) -> String {
    let mut t = String::new();
    let head = format!(
        "{:<24} {:>4} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "scenario", "n", "mean", "median", "std", "min", "q25", "q75", "max", "iqr"
    );
    let _ = writeln!(t, "Geolocation error (m), seed {}\n{head}", report.seed);
    for s in &report.scenarios {
        let label = s.scenario.label();
        match &s.geolocation {
            Some(g) => {
                let _ = writeln!(t, "{label:<24} {}", summary_cells(g));
            }
            None => {
                let _ = writeln!(t, "{label:<24} no located objects");
            }
        }
        if let Some(r) = &s.reference {
            let _ = writeln!(
                t,
                "{:<24} {:>4} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2}",
                "  reference", r.n, r.mean, r.median, r.std, r.min, r.q25, r.q75, r.max, r.iqr
            );
        }
        let _ = writeln!(
            t,
            "{:<24} located {}, unlocatable {}, out of coverage {}",
            "", s.n_located, s.n_unlocatable, s.n_out_of_coverage
        );
    }
    let _ = writeln!(t, "(reference rows: {})", report.reference.label);

    let _ = writeln!(t, "\nError by last-camera distance (median m, n)");
    for s in &report.scenarios {
        let cells: Vec<String> = s
            .distance_bins
            .iter()
            .map(|b| match &b.summary {
                Some(r) => format!("{}: {:.2} ({})", bin_label(b), r.median, r.n),
                None => format!("{}: - (0)", bin_label(b)),
            })
            .collect();
        let _ = writeln!(t, "{:<10} {}", s.scenario.label(), cells.join("  "));
    }

    let _ = writeln!(t, "\nTests{:<45} {:>10} {:>9} {:>9} {:>5}", "", "statistic", "p", "p_adj", "n");
    for test in &report.tests {
        let name = format!("{}: {}", test.family, test.name);
        match &test.result {
            Some(r) => {
                let _ = writeln!(
                    t,
                    "{name:<50} {:>10.4} {:>9} {:>9} {:>5}",
                    r.statistic,
                    p_text(Some(r.p_value)),
                    p_text(test.p_adjusted),
                    r.n
                );
            }
            None => {
                let _ = writeln!(t, "{name:<50} skipped: {}", test.note.as_deref().unwrap_or(""));
            }
        }
    }
    let _ = writeln!(t, "reference ({}):", report.reference.label);
    for r in &report.reference.tests {
        let _ = writeln!(t, "  {} {}: {}, p {}", r.test, r.comparison, r.statistic, r.p_value);
    }

    let _ = writeln!(t, "\nStructural error (signed, estimate - truth)");
    let _ = writeln!(t, "{:<10} {:<14} {:<6} {:>4} {:>8} {:>8} {:>8} {:>8} {:>8}", "scenario", "attribute", "class", "n", "mean", "mae", "median", "std", "iqr");
    for row in &report.structural {
        let r = &row.summary;
        let _ = writeln!(
            t,
            "{:<10} {:<14} {:<6} {:>4} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
            row.scenario.label(),
            row.attribute,
            row.kind.map_or("all", |k| k.label()),
            r.n,
            r.mean,
            r.mae,
            r.median,
            r.std,
            r.iqr
        );
    }
    let refs: Vec<String> =
        report.reference.height_mae_in_slow.iter().map(|h| format!("{} {:.2} m", h.kind, h.mae_m)).collect();
    let _ = writeln!(t, "reference height MAE, In_Slow: {}", refs.join(", "));

    if let Some(d) = &report.depth {
        let cv = &d.cv;
        let hp = &cv.best_hyperparams;
        let _ = writeln!(t, "\nDepth correction");
        let _ = writeln!(
            t,
            "samples {} (train {} / test {}, frames {} / {})",
            d.n_samples, d.n_train, d.n_test, d.n_train_frames, d.n_test_frames
        );
        let _ = writeln!(
            t,
            "best: trees {}, depth {}, rate {}, min leaf {}; {}-fold cv mae {:.4}",
            hp.n_trees, hp.max_depth, hp.learning_rate, hp.min_samples_leaf, cv.k, cv.mean_cv_mae
        );
        if let Some(m) = &cv.test_metrics {
            let r2 = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.4}"));
            let _ = writeln!(
                t,
                "test sqrt scale: mse {:.4} mae {:.4} r2 {}",
                m.transformed.mse,
                m.transformed.mae,
                r2(m.transformed.r2)
            );
            let _ = writeln!(t, "test metres:     mse {:.4} mae {:.4} r2 {}", m.original.mse, m.original.mae, r2(m.original.r2));
        }
        let rd = &report.reference.depth_model;
        let _ = writeln!(
            t,
            "reference: cv mae {:.4}; sqrt mse {:.4} mae {:.4} r2 {:.4}; metres mse {:.4} mae {:.4} r2 {:.4}",
            rd.cv_mae_transformed, rd.mse_transformed, rd.mae_transformed, rd.r2_transformed, rd.mse_original, rd.mae_original, rd.r2_original
        );
    }

    let rec = &report.reconciliation;
    if !(rec.unknown_ids.is_empty() && rec.unmeasured.is_empty() && rec.unpaired.is_empty()) {
        let _ = writeln!(t, "\nReconciliation");
        let _ = writeln!(t, "unknown ids: {}", rec.unknown_ids.join(", "));
        let _ = writeln!(t, "located but unmeasured: {}", rec.unmeasured.join(", "));
        let _ = writeln!(t, "dropped from paired tests: {}", rec.unpaired.join(", "));
    }
    t
}
