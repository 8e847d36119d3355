use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{train, CorrectionModel, Hyperparams};
use super::{shuffled_frames, DepthError, TrainingSample};
use crate::stats::{regression_metrics, RegressionMetrics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperGrid {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub min_samples_leaf: Vec<usize>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            n_trees: vec![50, 100, 200],
            max_depth: vec![2, 3, 4],
            learning_rate: vec![0.05, 0.1, 0.3],
            min_samples_leaf: vec![2, 5],
        }
    }
}

impl HyperGrid {
    pub fn single(hp: Hyperparams) -> Self {
        Self {
            n_trees: vec![hp.n_trees],
            max_depth: vec![hp.max_depth],
            learning_rate: vec![hp.learning_rate],
            min_samples_leaf: vec![hp.min_samples_leaf],
        }
    }

    /// Cells in canonical order: tree count varies slowest, leaf size fastest.
    pub fn cells(&self) -> Vec<Hyperparams> {
        let mut out = Vec::new();
        for &n_trees in &self.n_trees {
            for &max_depth in &self.max_depth {
                for &learning_rate in &self.learning_rate {
                    for &min_samples_leaf in &self.min_samples_leaf {
                        out.push(Hyperparams { n_trees, max_depth, learning_rate, min_samples_leaf });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub hyperparams: Hyperparams,
    pub fold_maes: Vec<f64>,
    /// `None` when some fold could not be trained; such cells rank last.
    pub mean_cv_mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleMetrics {
    pub n: usize,
    pub transformed: RegressionMetrics,
    pub original: RegressionMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub fold_maes: Vec<f64>,
    pub mean_cv_mae: f64,
    pub best_hyperparams: Hyperparams,
    pub cells: Vec<CellScore>,
    pub train_mae_transformed: f64,
    pub test_metrics: Option<ScaleMetrics>,
}

/// Groups sample indices into `k` folds by frame: frames are shuffled with
/// `seed` and dealt round-robin.
pub fn frame_folds(samples: &[TrainingSample], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, DepthError> {
    if k < 2 {
        return Err(DepthError::InvalidConfig(format!("k = {k}, need at least 2 folds")));
    }
    let frames = shuffled_frames(samples, seed);
    if frames.len() < k {
        return Err(DepthError::InvalidData(format!("{} distinct frames for {k} folds", frames.len())));
    }
    let fold_of: BTreeMap<u64, usize> = frames.iter().enumerate().map(|(i, f)| (*f, i % k)).collect();
    let mut folds = vec![Vec::new(); k];
    for (i, s) in samples.iter().enumerate() {
        folds[fold_of[&s.frame_id]].push(i);
    }
    Ok(folds)
}

/// Metrics recomputed from fresh predictions on both the sqrt scale and in meters.
pub fn evaluate_model(model: &CorrectionModel, samples: &[TrainingSample]) -> Result<ScaleMetrics, DepthError> {
    let to_err = |e: crate::stats::StatsError| DepthError::InvalidData(e.to_string());
    let actual_t: Vec<f64> = samples.iter().map(|s| s.ground_distance.sqrt()).collect();
    let pred_t: Vec<f64> = samples.iter().map(|s| model.predict_transformed(&s.features)).collect();
    let actual: Vec<f64> = samples.iter().map(|s| s.ground_distance).collect();
    let pred: Vec<f64> = samples.iter().map(|s| model.predict(&s.features)).collect();
    Ok(ScaleMetrics {
        n: samples.len(),
        transformed: regression_metrics(&actual_t, &pred_t).map_err(to_err)?,
        original: regression_metrics(&actual, &pred).map_err(to_err)?,
    })
}

fn score_cell(samples: &[TrainingSample], folds: &[Vec<usize>], hp: &Hyperparams, seed: u64) -> CellScore {
    let mut fold_maes = Vec::with_capacity(folds.len());
    for (i, fold) in folds.iter().enumerate() {
        let train_set: Vec<TrainingSample> = folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, f)| f.iter().map(|&x| samples[x]))
            .collect();
        let valid: Vec<TrainingSample> = fold.iter().map(|&x| samples[x]).collect();
        match train(&train_set, hp, seed).and_then(|m| evaluate_model(&m, &valid)) {
            Ok(metrics) => fold_maes.push(metrics.transformed.mae),
            Err(e) => {
                log::warn!("grid cell {hp:?} failed on fold {i}: {e}");
                return CellScore { hyperparams: *hp, fold_maes, mean_cv_mae: None };
            }
        }
    }
    let mean = fold_maes.iter().sum::<f64>() / fold_maes.len() as f64;
    CellScore { hyperparams: *hp, fold_maes, mean_cv_mae: Some(mean) }
}

/// Scores every grid cell by frame-grouped k-fold CV on the sqrt scale,
/// retrains the best cell on all of `train_set`, and evaluates it on `test_set`
/// when that is non-empty. Ties keep the earlier cell.
pub fn grid_search_cv(
    train_set: &[TrainingSample],
    test_set: &[TrainingSample],
    grid: &HyperGrid,
    k: usize,
    seed: u64,
) -> Result<(CvReport, CorrectionModel), DepthError> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(DepthError::InvalidConfig("empty hyperparameter grid".into()));
    }
    for hp in &cells {
        hp.validate()?;
    }
    let folds = frame_folds(train_set, k, seed)?;
    let scores: Vec<CellScore> = cells.par_iter().map(|hp| score_cell(train_set, &folds, hp, seed)).collect();

    let mut best: Option<&CellScore> = None;
    for cell in &scores {
        if let Some(m) = cell.mean_cv_mae {
            if best.and_then(|b| b.mean_cv_mae).is_none_or(|bm| m < bm) {
                best = Some(cell);
            }
        }
    }
    let best = best.ok_or_else(|| DepthError::InvalidData("every grid cell failed cross-validation".into()))?;
    let model = train(train_set, &best.hyperparams, seed)?;
    let test_metrics = if test_set.is_empty() { None } else { Some(evaluate_model(&model, test_set)?) };
    let report = CvReport {
        k,
        seed,
        fold_maes: best.fold_maes.clone(),
        mean_cv_mae: best.mean_cv_mae.expect("best cell has a score"),
        best_hyperparams: best.hyperparams,
        train_mae_transformed: model.train_mae_transformed,
        test_metrics,
        cells: scores.clone(),
    };
    Ok((report, model))
}
