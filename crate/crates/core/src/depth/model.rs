use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, RegressionTree, SortedMatrix, TreeParams};
use super::{normalize_weights, DepthError, DepthFeatures, TrainingSample, FEATURE_NAMES, N_FEATURES};

pub const MODEL_FORMAT: &str = "curbsight-depth-gbrt";
pub const MODEL_VERSION: u32 = 1;
pub const DEFAULT_MIN_DISTANCE_M: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 3, learning_rate: 0.1, min_samples_leaf: 2 }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), DepthError> {
        if self.n_trees == 0 || self.max_depth == 0 || self.min_samples_leaf == 0 {
            return Err(DepthError::InvalidConfig(format!("counts must be positive: {self:?}")));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(DepthError::InvalidConfig(format!("learning rate {} not in (0, 1]", self.learning_rate)));
        }
        Ok(())
    }
}

/// Boosted tree ensemble fit on the square root of the ground distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectionModel {
    pub format: String,
    pub version: u32,
    /// Always `"sqrt"`.
    pub transform: String,
    pub feature_names: Vec<String>,
    pub base_prediction: f64,
    pub learning_rate: f64,
    pub min_distance: f64,
    pub hyperparams: Hyperparams,
    pub train_seed: u64,
    /// Weighted MAE on the sqrt scale over the training set.
    pub train_mae_transformed: f64,
    pub trees: Vec<RegressionTree>,
}

impl CorrectionModel {
    pub fn predict_transformed(&self, features: &DepthFeatures) -> f64 {
        let x = features.to_array();
        self.base_prediction + self.learning_rate * self.trees.iter().map(|t| t.predict(&x)).sum::<f64>()
    }

    /// Corrected distance in meters.
    pub fn predict(&self, features: &DepthFeatures) -> f64 {
        self.predict_transformed(features).powi(2).max(self.min_distance)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DepthError> {
        let model: Self = serde_json::from_str(text).map_err(|e| DepthError::Format(e.to_string()))?;
        if model.format != MODEL_FORMAT {
            return Err(DepthError::Format(format!("unexpected format {:?}", model.format)));
        }
        if model.version != MODEL_VERSION {
            return Err(DepthError::Format(format!("unsupported version {}", model.version)));
        }
        if model.transform != "sqrt" {
            return Err(DepthError::Format(format!("unsupported transform {:?}", model.transform)));
        }
        if model.feature_names != FEATURE_NAMES {
            return Err(DepthError::Format("feature list does not match".into()));
        }
        for tree in &model.trees {
            check_tree(tree)?;
        }
        Ok(model)
    }
}

fn check_tree(tree: &RegressionTree) -> Result<(), DepthError> {
    use super::tree::Node;
    if tree.nodes.is_empty() {
        return Err(DepthError::Format("empty tree".into()));
    }
    for (i, node) in tree.nodes.iter().enumerate() {
        if let Node::Split { feature, left, right, .. } = node {
            // children always come after their parent, so this also rules out cycles
            if *feature >= N_FEATURES || *left <= i || *right <= i || *left >= tree.nodes.len() || *right >= tree.nodes.len() {
                return Err(DepthError::Format(format!("malformed split node {i}")));
            }
        }
    }
    Ok(())
}

pub fn train(samples: &[TrainingSample], hp: &Hyperparams, seed: u64) -> Result<CorrectionModel, DepthError> {
    train_with_history(samples, hp, seed).map(|(m, _)| m)
}

/// Trains and also returns the weighted squared-error loss after the base
/// prediction and after each tree.
pub fn train_with_history(
    samples: &[TrainingSample],
    hp: &Hyperparams,
    seed: u64,
) -> Result<(CorrectionModel, Vec<f64>), DepthError> {
    hp.validate()?;
    if samples.is_empty() {
        return Err(DepthError::InvalidData("empty training set".into()));
    }
    for s in samples {
        if !(s.ground_distance > 0.0 && s.ground_distance.is_finite()) {
            return Err(DepthError::InvalidData(format!("ground distance {} in frame {}", s.ground_distance, s.frame_id)));
        }
        if !(s.weight >= 0.0 && s.weight.is_finite()) {
            return Err(DepthError::InvalidData(format!("weight {} in frame {}", s.weight, s.frame_id)));
        }
        if s.features.to_array().iter().any(|v| !v.is_finite()) {
            return Err(DepthError::InvalidData(format!("non-finite feature in frame {}", s.frame_id)));
        }
    }
    let mut weights: Vec<f64> = samples.iter().map(|s| s.weight).collect();
    normalize_weights(&mut weights);
    let w_total: f64 = weights.iter().sum();
    if w_total <= 0.0 {
        return Err(DepthError::InvalidData("all sample weights are zero".into()));
    }

    let targets: Vec<f64> = samples.iter().map(|s| s.ground_distance.sqrt()).collect();
    let base = weights.iter().zip(&targets).map(|(w, t)| w * t).sum::<f64>() / w_total;
    let columns: Vec<Vec<f64>> =
        (0..N_FEATURES).map(|j| samples.iter().map(|s| s.features.to_array()[j]).collect()).collect();
    let matrix = SortedMatrix::new(&columns);
    let params = TreeParams { max_depth: hp.max_depth, min_samples_leaf: hp.min_samples_leaf };

    let mut fitted = vec![base; samples.len()];
    let loss = |fitted: &[f64]| -> f64 {
        weights.iter().zip(targets.iter().zip(fitted)).map(|(w, (t, f))| w * (t - f).powi(2)).sum()
    };
    let mut history = vec![loss(&fitted)];
    let mut trees = Vec::with_capacity(hp.n_trees);
    let mut residuals = vec![0.0; samples.len()];
    let rows: Vec<[f64; N_FEATURES]> = samples.iter().map(|s| s.features.to_array()).collect();
    if samples.len() > 1 {
        for _ in 0..hp.n_trees {
            for ((r, t), f) in residuals.iter_mut().zip(&targets).zip(&fitted) {
                *r = t - f;
            }
            let tree = fit_tree(&matrix, &residuals, &weights, params);
            for (f, x) in fitted.iter_mut().zip(&rows) {
                *f += hp.learning_rate * tree.predict(x);
            }
            let current = loss(&fitted);
            let prev = *history.last().expect("history starts non-empty");
            assert!(
                current <= prev * (1.0 + 1e-12) + 1e-12,
                "boosting loss increased from {prev} to {current}"
            );
            history.push(current);
            trees.push(tree);
        }
    }
    let train_mae_transformed =
        weights.iter().zip(targets.iter().zip(&fitted)).map(|(w, (t, f))| w * (t - f).abs()).sum::<f64>() / w_total;
    log::debug!("trained {} trees, final loss {:.6}", trees.len(), history.last().unwrap_or(&0.0));
    let model = CorrectionModel {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        transform: "sqrt".into(),
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        base_prediction: base,
        learning_rate: hp.learning_rate,
        min_distance: DEFAULT_MIN_DISTANCE_M,
        hyperparams: *hp,
        train_seed: seed,
        train_mae_transformed,
        trees,
    };
    Ok((model, history))
}
