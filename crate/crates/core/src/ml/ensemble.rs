use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, DecisionTree, TreeParams};
use super::{Dataset, MlError, Task};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    RandomForest,
    GradientBoosting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    /// Features tried per split; `None` means `max(1, floor(sqrt(D)))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 200, tree: TreeParams::default(), max_features: None, bootstrap: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub tree: TreeParams,
}

impl Default for GbmParams {
    fn default() -> Self {
        Self { n_trees: 300, learning_rate: 0.1, tree: TreeParams { max_depth: 3, ..TreeParams::default() } }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    RandomForest(ForestParams),
    GradientBoosting(GbmParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub format_version: u32,
    pub kind: EnsembleKind,
    pub task: Task,
    pub n_features: usize,
    pub seed: u64,
    pub params: ModelParams,
    /// Boosting only: initial raw score (mean target or log-odds).
    pub base_score: f64,
    pub learning_rate: f64,
    /// Forest only: features considered per split.
    pub feature_subsample: Option<usize>,
    pub trees: Vec<DecisionTree>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    /// Regression estimates, or classes 0/1.
    pub values: Vec<f64>,
    /// Classification only: probability of class 1.
    pub probabilities: Option<Vec<f64>>,
}

fn default_features(d: usize) -> usize {
    ((d as f64).sqrt().floor() as usize).max(1)
}

pub fn fit_forest(train: &Dataset, params: &ForestParams, seed: u64) -> Result<Ensemble, MlError> {
    train.validate()?;
    if params.n_trees == 0 {
        return Err(MlError::InvalidParameter("n_trees must be at least 1".into()));
    }
    let d = train.n_features();
    let k = params.max_features.unwrap_or_else(|| default_features(d)).clamp(1, d.max(1));
    let mut root = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..params.n_trees).map(|_| root.next_u64()).collect();
    let n = train.len();
    let trees = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let rows: Vec<usize> =
                if params.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
            let x: Vec<Vec<f64>> = rows.iter().map(|&i| train.x[i].clone()).collect();
            let y: Vec<f64> = rows.iter().map(|&i| train.y[i]).collect();
            fit_tree(&x, &y, train.task, &params.tree, Some(k), Some(&mut rng))
        })
        .collect();
    Ok(Ensemble {
        format_version: MODEL_FORMAT_VERSION,
        kind: EnsembleKind::RandomForest,
        task: train.task,
        n_features: d,
        seed,
        params: ModelParams::RandomForest(*params),
        base_score: 0.0,
        learning_rate: 1.0,
        feature_subsample: Some(k),
        trees,
    })
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Boosting on squared error (regression) or log loss (classification).
/// Classification leaves take the Newton step `sum(g) / sum(p(1-p))`.
pub fn fit_gbm(train: &Dataset, params: &GbmParams, seed: u64) -> Result<Ensemble, MlError> {
    train.validate()?;
    if params.n_trees == 0 {
        return Err(MlError::InvalidParameter("n_trees must be at least 1".into()));
    }
    let rate = params.learning_rate;
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(MlError::InvalidParameter(format!("learning rate {rate} outside (0, 1]")));
    }
    let n = train.len() as f64;
    let base_score = match train.task {
        Task::Regression => train.y.iter().sum::<f64>() / n,
        Task::Classification => {
            let p = train.y.iter().sum::<f64>() / n;
            if p == 0.0 || p == 1.0 {
                return Err(MlError::DegenerateTargets);
            }
            (p / (1.0 - p)).ln()
        }
    };
    let mut raw = vec![base_score; train.len()];
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let residual: Vec<f64> = match train.task {
            Task::Regression => train.y.iter().zip(&raw).map(|(y, f)| y - f).collect(),
            Task::Classification => train.y.iter().zip(&raw).map(|(y, f)| y - sigmoid(*f)).collect(),
        };
        let mut tree = fit_tree(&train.x, &residual, Task::Regression, &params.tree, None, None);
        let leaves: Vec<usize> = train.x.iter().map(|row| tree.leaf_index(row)).collect();
        if train.task == Task::Classification {
            let mut num = vec![0.0; tree.nodes.len()];
            let mut den = vec![0.0; tree.nodes.len()];
            for (i, &leaf) in leaves.iter().enumerate() {
                let p = sigmoid(raw[i]);
                num[leaf] += residual[i];
                den[leaf] += p * (1.0 - p);
            }
            for (leaf, (num, den)) in num.iter().zip(&den).enumerate() {
                if *den > 0.0 {
                    tree.set_leaf_value(leaf, num / den.max(1e-12));
                }
            }
        }
        for (i, &leaf) in leaves.iter().enumerate() {
            if let super::Node::Leaf { value, .. } = tree.nodes[leaf] {
                raw[i] += rate * value;
            }
        }
        trees.push(tree);
    }
    let _ = seed;
    Ok(Ensemble {
        format_version: MODEL_FORMAT_VERSION,
        kind: EnsembleKind::GradientBoosting,
        task: train.task,
        n_features: train.n_features(),
        seed,
        params: ModelParams::GradientBoosting(*params),
        base_score,
        learning_rate: rate,
        feature_subsample: None,
        trees,
    })
}

fn check_width(model: &Ensemble, x: &[Vec<f64>]) -> Result<(), MlError> {
    match x.iter().find(|r| r.len() != model.n_features) {
        Some(r) => Err(MlError::WidthMismatch { expected: model.n_features, got: r.len() }),
        None => Ok(()),
    }
}

/// Boosting raw scores after each round, `rounds + 1` vectors starting
/// with the base score.
pub fn staged_raw_scores(model: &Ensemble, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, MlError> {
    check_width(model, x)?;
    if model.kind != EnsembleKind::GradientBoosting {
        return Err(MlError::InvalidParameter("staged scores need a boosting model".into()));
    }
    let mut raw = vec![model.base_score; x.len()];
    let mut out = vec![raw.clone()];
    for t in &model.trees {
        for (r, row) in raw.iter_mut().zip(x) {
            *r += model.learning_rate * t.predict_row(row);
        }
        out.push(raw.clone());
    }
    Ok(out)
}

fn predict_row(model: &Ensemble, row: &[f64]) -> (f64, Option<f64>) {
    let m = model.trees.len() as f64;
    match (model.kind, model.task) {
        (EnsembleKind::RandomForest, Task::Regression) => {
            (model.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / m, None)
        }
        (EnsembleKind::RandomForest, Task::Classification) => {
            let votes = model.trees.iter().map(|t| t.predict_class(row)).sum::<f64>();
            let class = if votes > m - votes { 1.0 } else { 0.0 };
            (class, Some(votes / m))
        }
        (EnsembleKind::GradientBoosting, task) => {
            let raw =
                model.base_score + model.learning_rate * model.trees.iter().map(|t| t.predict_row(row)).sum::<f64>();
            match task {
                Task::Regression => (raw, None),
                Task::Classification => {
                    let p = sigmoid(raw);
                    (if p > 0.5 { 1.0 } else { 0.0 }, Some(p))
                }
            }
        }
    }
}

/// Row-wise predictions; classification also reports class-1 probability.
pub fn predict(model: &Ensemble, x: &[Vec<f64>]) -> Result<Predictions, MlError> {
    check_width(model, x)?;
    let rows: Vec<(f64, Option<f64>)> = x.par_iter().map(|row| predict_row(model, row)).collect();
    let values = rows.iter().map(|r| r.0).collect();
    let probabilities = (model.task == Task::Classification).then(|| rows.iter().map(|r| r.1.unwrap()).collect());
    Ok(Predictions { values, probabilities })
}

impl Ensemble {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, MlError> {
        let m: Ensemble = serde_json::from_str(s).map_err(|e| MlError::Format(e.to_string()))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(MlError::Format(format!("unsupported model version {}", m.format_version)));
        }
        if m.trees.is_empty() {
            return Err(MlError::Format("model has no trees".into()));
        }
        Ok(m)
    }
}
