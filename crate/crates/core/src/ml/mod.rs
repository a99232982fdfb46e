//! Tree learners: CART, random forests and gradient boosting.

mod ensemble;
mod split;
mod tree;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use ensemble::{
    fit_forest, fit_gbm, predict, staged_raw_scores, Ensemble, EnsembleKind, ForestParams, GbmParams, ModelParams,
    Predictions, MODEL_FORMAT_VERSION,
};
pub use split::{stratified_split, train_size, train_test_split};
pub use tree::{fit_cart, fit_tree, DecisionTree, Node, TreeParams, TreeRng};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MlError {
    #[error("need at least {need} samples, have {have}")]
    TooFewSamples { need: usize, have: usize },
    #[error("classification targets contain a single class")]
    DegenerateTargets,
    #[error("input has {got} features, model expects {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub ids: Vec<String>,
    pub task: Task,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>, ids: Vec<String>, task: Task) -> Result<Self, MlError> {
        let ds = Self { x, y, ids, task };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<(), MlError> {
        let bad = |m: String| Err(MlError::InvalidDataset(m));
        if self.x.is_empty() {
            return Err(MlError::TooFewSamples { need: 1, have: 0 });
        }
        if self.x.len() != self.y.len() || self.x.len() != self.ids.len() {
            return bad(format!("{} rows, {} targets, {} ids", self.x.len(), self.y.len(), self.ids.len()));
        }
        let d = self.x[0].len();
        for (i, row) in self.x.iter().enumerate() {
            if row.len() != d {
                return bad(format!("row {i} has {} features, expected {d}", row.len()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return bad(format!("row {i} has a non-finite feature"));
            }
        }
        if let Some(i) = self.y.iter().position(|v| !v.is_finite()) {
            return bad(format!("target {i} is not finite"));
        }
        if self.task == Task::Classification {
            if let Some(i) = self.y.iter().position(|v| *v != 0.0 && *v != 1.0) {
                return bad(format!("class target {i} is {}, expected 0 or 1", self.y[i]));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: rows.iter().map(|&i| self.x[i].clone()).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            task: self.task,
        }
    }

    /// SHA-256 over ids, feature bits and target bits.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for ((row, y), id) in self.x.iter().zip(&self.y).zip(&self.ids) {
            h.update(id.as_bytes());
            h.update([0]);
            for v in row {
                h.update(v.to_bits().to_le_bytes());
            }
            h.update(y.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}
