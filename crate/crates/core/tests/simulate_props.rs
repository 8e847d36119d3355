#![allow(clippy::field_reassign_with_default)]

use std::collections::{BTreeMap, BTreeSet};

use curbsight::depth::extract_features;
use curbsight::geodesy::haversine_distance;
use curbsight::ingest::{read_ground_truth, resolve_poses, ObjectKind};
use curbsight::pipeline::{cmd_geolocate, cmd_simulate, IntrinsicsConfig, RunConfig};
use curbsight::simulate::{
    generate_scene, render_observations, DriveConfig, NoiseConfig, Scenario, SceneConfig, GROUND_TRUTH_FILE,
};
use proptest::prelude::*;

fn small_scene() -> SceneConfig {
    SceneConfig { n_trees: 8, n_poles: 4, n_other: 3, ..SceneConfig::default() }
}

fn scenario() -> impl Strategy<Value = Scenario> {
    prop::sample::select(Scenario::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn observations_satisfy_schema(seed in any::<u64>(), s in scenario(), noise_scale in 0.0..2.0_f64) {
        let cam = IntrinsicsConfig::default().build().unwrap();
        let scene = generate_scene(&small_scene(), seed).unwrap();
        let cal = NoiseConfig::calibrated();
        let noise = NoiseConfig {
            gps_jitter_sigma: cal.gps_jitter_sigma * noise_scale,
            azimuth_sigma_deg: cal.azimuth_sigma_deg * noise_scale,
            pixel_jitter_sigma: cal.pixel_jitter_sigma * noise_scale,
            extent_jitter_rel: cal.extent_jitter_rel * noise_scale,
            ..cal
        };
        let run = render_observations(&scene, s, &cam, &DriveConfig::default(), &noise, seed).unwrap();
        let kinds: BTreeMap<&str, ObjectKind> = scene.objects.iter().map(|o| (o.object_id.as_str(), o.kind)).collect();
        let poses: BTreeMap<u64, _> = resolve_poses(&run.track).unwrap().into_iter().map(|r| (r.pose.frame_id, r.pose)).collect();
        let mut seen = BTreeSet::new();
        prop_assert!(!run.observations.is_empty());
        prop_assert_eq!(run.observations.len(), run.ground_distances.len());
        for o in &run.observations {
            prop_assert!(seen.insert((o.object_id.clone(), o.frame_id)));
            prop_assert!(o.pixel.u >= 0.0 && o.pixel.u <= cam.image_width - 1.0);
            prop_assert!(o.pixel.v >= 0.0 && o.pixel.v <= cam.image_height - 1.0);
            prop_assert!(o.pixel.pixel_height > 0.0 && o.pixel.pixel_width > 0.0);
            prop_assert!(o.depth_samples.iter().all(|d| d.is_finite() && *d > 0.0));
            let kind = kinds[o.object_id.as_str()];
            prop_assert_eq!(o.crown_pixel_width.is_some(), kind == ObjectKind::Tree);
            let pose = poses.get(&o.frame_id);
            prop_assert!(pose.is_some());
            prop_assert!(extract_features(o, pose.unwrap(), &cam).is_ok());
        }
    }
}

fn mean_error(cfg: &RunConfig, dir: &std::path::Path) -> f64 {
    cmd_simulate(cfg, dir).unwrap();
    let truth: BTreeMap<String, _> =
        read_ground_truth(&dir.join(GROUND_TRUTH_FILE)).unwrap().into_iter().map(|o| (o.object_id, o.location)).collect();
    let est = cmd_geolocate(cfg, dir).unwrap();
    let errors: Vec<f64> = est
        .values()
        .flat_map(|e| &e.located.features)
        .map(|f| haversine_distance(f.geometry.point(), truth[&f.properties.object_id]).unwrap())
        .collect();
    errors.iter().sum::<f64>() / errors.len() as f64
}

/// Mean error over 20 paired seeds at each noise level.
fn error_curve(levels: &[f64], set: impl Fn(&mut NoiseConfig, f64)) -> Vec<f64> {
    let tmp = tempfile::tempdir().unwrap();
    levels
        .iter()
        .map(|&level| {
            let total: f64 = (0..20)
                .map(|seed| {
                    let mut cfg = RunConfig::default();
                    cfg.seed = seed;
                    cfg.scene = small_scene();
                    cfg.scenarios = vec![Scenario::InSlow];
                    cfg.geolocate.correction = false;
                    cfg.noise = NoiseConfig::zero();
                    set(&mut cfg.noise, level);
                    mean_error(&cfg, &tmp.path().join(format!("{level}_{seed}")))
                })
                .sum();
            total / 20.0
        })
        .collect()
}

#[test]
fn more_gps_jitter_means_more_error() {
    let curve = error_curve(&[0.0, 0.5, 1.5, 3.0], |n, v| n.gps_jitter_sigma = v);
    assert!(curve.windows(2).all(|w| w[1] >= w[0]), "{curve:?}");
    assert!(curve[0] < 1e-3);
}

#[test]
fn more_pixel_jitter_means_more_error() {
    let curve = error_curve(&[0.0, 10.0, 30.0, 60.0], |n, v| n.pixel_jitter_sigma = v);
    assert!(curve.windows(2).all(|w| w[1] >= w[0]), "{curve:?}");
}
