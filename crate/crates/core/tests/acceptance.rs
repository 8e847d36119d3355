//! Acceptance criteria. Runs sequentially (harness = false) so the runtime
//! budgets are measured without competing tests, and prints one PASS/FAIL
//! line per criterion.

#![allow(clippy::field_reassign_with_default)]

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use curbsight::camera::TerrainContext;
use curbsight::depth::{HyperGrid, Hyperparams};
use curbsight::geodesy::{from_local_xy, haversine_distance, to_local_xy, GeoPoint, LocalXY};
use curbsight::ingest::{read_dem, read_ground_truth, sample_dem};
use curbsight::pipeline::{
    cmd_geolocate, cmd_measure, cmd_simulate, cmd_train, load_poses, run_all, svg, EvaluationReport,
    RunConfig, MODEL_FILE, PLOTS_DIR, REPORT_JSON_FILE,
};
use curbsight::simulate::{NoiseConfig, Scenario, Terrain, DEM_FILE, GROUND_TRUTH_FILE};
use curbsight::stats::{friedman, spearman, wilcoxon_signed_rank};
use curbsight::triangulate::geometric_median;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(started: Instant, budget: Duration, detail: String) -> Outcome {
    let took = started.elapsed();
    let detail = format!("{detail}; {:.2} s (budget {} s)", took.as_secs_f64(), budget.as_secs());
    check(took < budget, detail)
}

fn xy(x: f64, y: f64) -> LocalXY {
    LocalXY::new(x, y)
}

/// Subgradient condition at `p`: the summed unit vectors towards `p` from
/// the points it does not coincide with must have norm at most the number
/// of coincident points.
fn subgradient_residual(points: &[LocalXY], p: &LocalXY) -> f64 {
    let mut g = (0.0, 0.0);
    let mut coincident = 0.0;
    for q in points {
        let d = p.distance(q);
        if d < 1e-9 {
            coincident += 1.0;
        } else {
            g.0 += (p.x - q.x) / d;
            g.1 += (p.y - q.y) / d;
        }
    }
    (g.0.hypot(g.1) - coincident).max(0.0)
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let square = [xy(0.0, 0.0), xy(1.0, 0.0), xy(1.0, 1.0), xy(0.0, 1.0)];
    let fit = geometric_median(&square, 1e-10, 10_000).map_err(|e| e.to_string())?;
    let square_err = fit.point.distance(&xy(0.5, 0.5));

    // Fermat point of the right isosceles triangle: every side subtends 120°
    let fermat = (3.0 - 3f64.sqrt()) / 6.0;
    let tri = [xy(0.0, 0.0), xy(1.0, 0.0), xy(0.0, 1.0)];
    let fit = geometric_median(&tri, 1e-10, 10_000).map_err(|e| e.to_string())?;
    let tri_err = (fit.point.x - fermat).abs().max((fit.point.y - fermat).abs());

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let n = rng.gen_range(3..=50);
        let mut pts: Vec<LocalXY> = (0..n).map(|_| xy(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0))).collect();
        if rng.gen_bool(0.2) {
            // duplicates make the optimum sit on an input point more often
            let dup = pts[0];
            pts.extend(std::iter::repeat_n(dup, n / 2));
        }
        let fit = geometric_median(&pts, 1e-10, 100_000).map_err(|e| e.to_string())?;
        worst = worst.max(subgradient_residual(&pts, &fit.point));
    }
    let ok = square_err < 1e-6 && tri_err < 1e-4 && worst < 1e-4;
    let detail =
        format!("square err {square_err:.2e} m, triangle err {tri_err:.2e}, worst subgradient residual {worst:.2e}");
    if !ok {
        return Err(detail);
    }
    within_budget(started, Duration::from_secs(5), detail)
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_trip = 0.0_f64;
    let mut worst_rel = 0.0_f64;
    for i in 0..10_000 {
        let r = GeoPoint::new(rng.gen_range(-70.0..70.0), rng.gen_range(-179.0..179.0)).unwrap();
        let range = if i % 2 == 0 { 1000.0 } else { 500.0 };
        let dist = rng.gen_range(1.0..range);
        let dir: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let p = from_local_xy(xy(dist * dir.cos(), dist * dir.sin()), r).unwrap();
        let local = to_local_xy(p, r).unwrap();
        let back = from_local_xy(local, r).unwrap();
        worst_trip = worst_trip.max((back.lat - p.lat).abs()).max((back.lon - p.lon).abs());
        if dist < 500.0 {
            let h = haversine_distance(p, r).unwrap();
            worst_rel = worst_rel.max((local.norm() - h).abs() / h);
        }
    }
    check(
        worst_trip < 1e-9 && worst_rel < 1e-3,
        format!("round trip {worst_trip:.2e} deg, local vs haversine {:.4}%", worst_rel * 100.0),
    )
}

fn single_cell() -> HyperGrid {
    HyperGrid::single(Hyperparams { n_trees: 100, max_depth: 3, learning_rate: 0.1, min_samples_leaf: 2 })
}

fn criterion_3(tmp: &Path) -> Outcome {
    let started = Instant::now();
    let mut cfg = RunConfig::default();
    cfg.seed = 3;
    cfg.noise = NoiseConfig::zero();
    cfg.scene.n_trees = 12;
    cfg.scene.n_poles = 5;
    cfg.scene.n_other = 3;
    cfg.scene.terrain = Terrain::Plane { elevation_m: 150.0, grade_east: 0.04, grade_north: -0.03 };
    cfg.scenarios = vec![Scenario::InSlow];
    cfg.geolocate.correction = false;
    cfg.evaluate.plots = false;
    let out = tmp.join("c3");
    cmd_simulate(&cfg, &out).map_err(|e| e.to_string())?;
    let estimates = cmd_geolocate(&cfg, &out).map_err(|e| e.to_string())?;
    let measures = cmd_measure(&cfg, &out).map_err(|e| e.to_string())?;

    let truth: BTreeMap<String, _> = read_ground_truth(&out.join(GROUND_TRUTH_FILE))
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|o| (o.object_id.clone(), o))
        .collect();
    let est = &estimates[&Scenario::InSlow];
    if est.located.features.len() != truth.len() {
        return Err(format!("{} of {} objects located", est.located.features.len(), truth.len()));
    }
    let mut worst_geo = 0.0_f64;
    for f in &est.located.features {
        let t = &truth[&f.properties.object_id];
        worst_geo = worst_geo.max(haversine_distance(f.geometry.point(), t.location).unwrap());
    }

    let dem = read_dem(&out.join(DEM_FILE)).map_err(|e| e.to_string())?;
    let poses = load_poses(&cfg, &out.join(Scenario::InSlow.label())).map_err(|e| e.to_string())?;
    let located: BTreeMap<&str, GeoPoint> =
        est.located.features.iter().map(|f| (f.properties.object_id.as_str(), f.geometry.point())).collect();
    let mut worst_rel = 0.0_f64;
    let mut worst_terrain = 0.0_f64;
    let mut sloped = 0;
    for m in &measures[&Scenario::InSlow].objects {
        let t = &truth[&m.object_id];
        let Some(total) = m.height_total_m else {
            return Err(format!("{}: no terrain-corrected height ({:?})", m.object_id, m.terrain));
        };
        worst_rel = worst_rel.max((total - t.height_m).abs() / t.height_m);
        // height correction from the hand formula, with elevations read from the DEM
        let ctx = TerrainContext {
            camera_elevation: sample_dem(&dem, poses[&m.frame_ids[0]].position).unwrap().unwrap(),
            object_base_elevation: sample_dem(&dem, located[m.object_id.as_str()]).unwrap().unwrap(),
        };
        let rise = ctx.object_base_elevation - ctx.camera_elevation;
        let run = (m.distance_m.powi(2) - rise.powi(2)).sqrt();
        let analytic = m.height_m + m.height_m * rise / run;
        worst_terrain = worst_terrain.max((total - analytic).abs());
        if rise.abs() > 0.05 {
            sloped += 1;
        }
    }
    let ok = worst_geo < 1e-3 && worst_rel < 1e-6 && worst_terrain < 1e-9 && sloped > 0;
    let detail = format!(
        "{} objects: max geolocation error {worst_geo:.2e} m, max relative height error {worst_rel:.2e}, \
         max terrain deviation {worst_terrain:.2e} m ({sloped} on a slope)",
        truth.len()
    );
    if !ok {
        return Err(detail);
    }
    within_budget(started, Duration::from_secs(10), detail)
}

fn mean_geolocation_error(cfg: &RunConfig, out: &Path) -> Result<f64, String> {
    let truth: BTreeMap<String, GeoPoint> = read_ground_truth(&cfg.data_dir(out).join(GROUND_TRUTH_FILE))
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|o| (o.object_id, o.location))
        .collect();
    let estimates = cmd_geolocate(cfg, out).map_err(|e| e.to_string())?;
    let errors: Vec<f64> = estimates
        .values()
        .flat_map(|e| &e.located.features)
        .map(|f| haversine_distance(f.geometry.point(), truth[&f.properties.object_id]).unwrap())
        .collect();
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

fn criterion_4(tmp: &Path) -> Outcome {
    let started = Instant::now();
    let mut train_cfg = RunConfig::default();
    train_cfg.seed = 2024;
    train_cfg.noise = NoiseConfig::calibrated();
    train_cfg.scene.n_trees = 228;
    train_cfg.scene.n_poles = 102;
    train_cfg.scene.n_other = 48;
    train_cfg.scenarios = vec![Scenario::InSlow];
    let train_out = tmp.join("c4_train");
    cmd_simulate(&train_cfg, &train_out).map_err(|e| e.to_string())?;
    let report = cmd_train(&train_cfg, &train_out).map_err(|e| e.to_string())?;
    let r2 = report.cv.test_metrics.as_ref().and_then(|m| m.original.r2).unwrap_or(f64::NEG_INFINITY);

    let mut wins = 0;
    let mut pairs = Vec::new();
    for seed in 1..=10 {
        let mut cfg = RunConfig::default();
        cfg.seed = seed;
        cfg.noise = NoiseConfig::calibrated();
        cfg.paths.model = train_out.join(MODEL_FILE);
        let out = tmp.join(format!("c4_{seed}"));
        cmd_simulate(&cfg, &out).map_err(|e| e.to_string())?;
        let corrected = mean_geolocation_error(&cfg, &out)?;
        cfg.geolocate.correction = false;
        let raw = mean_geolocation_error(&cfg, &out)?;
        wins += usize::from(corrected < raw);
        pairs.push(format!("{corrected:.2}/{raw:.2}"));
    }
    let ok = report.n_samples >= 2000 && r2 >= 0.90 && wins == 10;
    let detail = format!(
        "{} samples, {} grid cells, held-out R² {r2:.4}; corrected < raw on {wins}/10 seeds (mean m corrected/raw: {})",
        report.n_samples,
        report.cv.cells.len(),
        pairs.join(" ")
    );
    if !ok {
        return Err(detail);
    }
    within_budget(started, Duration::from_secs(60), detail)
}

/// Calibrated four-drive batch with per-seed training at fixed
/// hyperparameters.
fn calibrated_batch(tmp: &Path) -> Result<Vec<EvaluationReport>, String> {
    (1..=10)
        .map(|seed| {
            let mut cfg = RunConfig::default();
            cfg.seed = seed;
            cfg.noise = NoiseConfig::calibrated();
            cfg.depth.grid = single_cell();
            cfg.evaluate.plots = false;
            run_all(&cfg, &tmp.join(format!("batch_{seed}"))).map_err(|e| e.to_string())
        })
        .collect()
}

fn scenario_mean(report: &EvaluationReport, s: Scenario) -> f64 {
    report.scenarios.iter().find(|x| x.scenario == s).and_then(|x| x.geolocation).map_or(f64::NAN, |g| g.mean)
}

fn criterion_5(batch: &[EvaluationReport]) -> Outcome {
    let mut in_band = 0;
    let mut ordered = 0;
    let mut rows = Vec::new();
    for r in batch {
        let slow = [scenario_mean(r, Scenario::InSlow), scenario_mean(r, Scenario::OutSlow)];
        let high = [scenario_mean(r, Scenario::InSpeed), scenario_mean(r, Scenario::OutSpeed)];
        in_band += usize::from(slow.iter().all(|m| (1.0..=6.0).contains(m)));
        let (s, h) = ((slow[0] + slow[1]) / 2.0, (high[0] + high[1]) / 2.0);
        ordered += usize::from(h > s);
        rows.push(format!("{s:.2}/{h:.2}"));
    }
    check(
        in_band == batch.len() && ordered >= 8,
        format!(
            "slow means in [1, 6] m on {in_band}/{} seeds; high > slow on {ordered}/{} (slow/high m: {})",
            batch.len(),
            batch.len(),
            rows.join(" ")
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn criterion_7(batch: &[EvaluationReport]) -> Outcome {
    let mut monotone = 0;
    let mut rows = Vec::new();
    for r in batch {
        let mut bins = vec![Vec::new(); 3];
        for o in &r.objects {
            if let (Some(e), Some(d)) = (o.error_m, o.last_camera_distance_m) {
                if d < 30.0 {
                    bins[(d / 10.0) as usize].push(e);
                }
            }
        }
        let m: Vec<f64> = bins.into_iter().map(median).collect();
        monotone += usize::from(m[0] <= m[1] && m[1] <= m[2]);
        rows.push(format!("{:.2}/{:.2}/{:.2}", m[0], m[1], m[2]));
    }
    check(
        monotone >= 9,
        format!("medians non-decreasing on {monotone}/{} seeds (0-10/10-20/20-30 m: {})", batch.len(), rows.join(" ")),
    )
}

fn wilcoxon_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    // average ranks of |d| by pairwise counting
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks: Vec<f64> = abs
        .iter()
        .map(|x| {
            let below = abs.iter().filter(|y| *y < x).count() as f64;
            let equal = abs.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let stat = |signs: &dyn Fn(usize) -> bool| {
        let plus: f64 = (0..n).filter(|&i| signs(i)).map(|i| ranks[i]).sum();
        let total: f64 = ranks.iter().sum();
        plus.min(total - plus)
    };
    let observed = stat(&|i| d[i] > 0.0);
    let hits = (0u32..1 << n).filter(|mask| stat(&|i| mask & (1 << i) != 0) <= observed + 1e-9).count();
    (observed, hits as f64 / (1u64 << n) as f64)
}

fn friedman_chi2(m: &[Vec<f64>]) -> f64 {
    let (n, k) = (m.len() as f64, m[0].len() as f64);
    let mut sums = vec![0.0; m[0].len()];
    let mut ties = 0.0;
    for row in m {
        for (j, x) in row.iter().enumerate() {
            let below = row.iter().filter(|y| *y < x).count() as f64;
            let equal = row.iter().filter(|y| *y == x).count() as f64;
            sums[j] += below + (equal + 1.0) / 2.0;
        }
        let mut seen: Vec<f64> = Vec::new();
        for x in row {
            if !seen.contains(x) {
                seen.push(*x);
                let t = row.iter().filter(|y| *y == x).count() as f64;
                ties += t * t * t - t;
            }
        }
    }
    let raw = 12.0 / (n * k * (k + 1.0)) * sums.iter().map(|s| s * s).sum::<f64>() - 3.0 * n * (k + 1.0);
    let denom = 1.0 - ties / (n * (k * k * k - k));
    if denom <= 1e-12 {
        0.0
    } else {
        (raw / denom).max(0.0)
    }
}

const PERMS3: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn friedman_oracle(m: &[Vec<f64>]) -> (f64, f64) {
    let observed = friedman_chi2(m);
    if observed == 0.0 {
        return (0.0, 1.0);
    }
    let n = m.len();
    let total = 6usize.pow(n as u32);
    let mut hits = 0;
    for code in 0..total {
        let mut c = code;
        let permuted: Vec<Vec<f64>> = m
            .iter()
            .map(|row| {
                let p = PERMS3[c % 6];
                c /= 6;
                p.iter().map(|&j| row[j]).collect()
            })
            .collect();
        if friedman_chi2(&permuted) >= observed - 1e-9 {
            hits += 1;
        }
    }
    (observed, hits as f64 / total as f64)
}

fn criterion_6() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_w = 0.0_f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=10);
        // one decimal place so ties and zero differences occur
        let a: Vec<f64> = (0..n).map(|_| (rng.gen_range(0.0..5.0_f64) * 10.0).round() / 10.0).collect();
        let b: Vec<f64> = (0..n).map(|_| (rng.gen_range(0.0..5.0_f64) * 10.0).round() / 10.0).collect();
        let got = wilcoxon_signed_rank(&a, &b).map_err(|e| e.to_string())?;
        let (w, p) = wilcoxon_oracle(&a, &b);
        worst_w = worst_w.max((got.statistic - w).abs()).max((got.p_value - p).abs());
    }
    let mut worst_f = 0.0_f64;
    for trial in 0..300 {
        let n = 2 + trial % 3;
        let m: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.gen_range(0..4) as f64).collect()).collect();
        let got = friedman(&m).map_err(|e| e.to_string())?;
        let (chi2, p) = friedman_oracle(&m);
        worst_f = worst_f.max((got.statistic - chi2).abs()).max((got.p_value - p).abs());
    }
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let rho = |y: [f64; 5]| spearman(&x, &y).map(|r| r.statistic).map_err(|e| e.to_string());
    let hand = [
        (rho([10.0, 20.0, 30.0, 40.0, 50.0])?, 1.0),
        (rho([5.0, 4.0, 3.0, 2.0, 1.0])?, -1.0),
        // d = (1,-1,1,-1,0), Σd² = 4, ρ = 1 - 6·4/(5·24) = 0.8
        (rho([2.0, 1.0, 4.0, 3.0, 5.0])?, 0.8),
        // d = (-1,-1,2,1,-1), Σd² = 8, ρ = 0.6
        (rho([2.0, 3.0, 1.0, 5.0, 4.0])?, 0.6),
    ];
    let worst_s = hand.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let ok = worst_w < 1e-12 && worst_f < 1e-12 && worst_s < 1e-12;
    let detail = format!(
        "wilcoxon vs 2^n enumeration {worst_w:.1e}, friedman vs permutations {worst_f:.1e}, spearman hand cases {worst_s:.1e}"
    );
    if !ok {
        return Err(detail);
    }
    within_budget(started, Duration::from_secs(30), detail)
}

fn files_under(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn criterion_8(tmp: &Path) -> Outcome {
    let cfg = RunConfig::default();
    let (a, b) = (tmp.join("det_a"), tmp.join("det_b"));
    for out in [&a, &b] {
        run_all(&cfg, out).map_err(|e| e.to_string())?;
    }
    let files = files_under(&a);
    if files != files_under(&b) {
        return Err("runs produced different file sets".into());
    }
    let mut compared = 0;
    for f in &files {
        let (x, y) = (std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        if f.starts_with(PLOTS_DIR) {
            let (x, y) = (String::from_utf8_lossy(&x), String::from_utf8_lossy(&y));
            if svg::embedded_data(&x) != svg::embedded_data(&y) {
                return Err(format!("{} differs in embedded data", f.display()));
            }
        } else if x != y {
            return Err(format!("{} differs", f.display()));
        }
        compared += 1;
    }
    check(
        files.iter().any(|f| f.ends_with(REPORT_JSON_FILE)) && files.iter().any(|f| f.ends_with(MODEL_FILE)),
        format!("{compared} files identical across two runs, report and model included"),
    )
}

fn run(id: u32, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
    let secs = started.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("criterion {id} PASS  {name}: {detail} [{secs:.2} s]");
            true
        }
        Err(detail) => {
            println!("criterion {id} FAIL  {name}: {detail} [{secs:.2} s]");
            false
        }
    }
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let tmp = tmp.path();
    let mut ok = true;
    ok &= run(1, "geometric median oracle", criterion_1);
    ok &= run(2, "geodesy round trip", criterion_2);
    ok &= run(3, "zero-noise end to end", || criterion_3(tmp));
    ok &= run(4, "depth corrector", || criterion_4(tmp));
    let batch = calibrated_batch(tmp);
    ok &= run(5, "calibrated realism band", || criterion_5(batch.as_ref().map_err(Clone::clone)?));
    ok &= run(6, "statistics oracles", criterion_6);
    ok &= run(7, "distance-bin trend", || criterion_7(batch.as_ref().map_err(Clone::clone)?));
    ok &= run(8, "determinism", || criterion_8(tmp));
    if !ok {
        std::process::exit(1);
    }
}
