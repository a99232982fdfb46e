//! Regression and classification metrics with explicit undefined flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{truth} truths but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("need at least {need} pairs, have {have}")]
    TooFewPairs { need: usize, have: usize },
    #[error("labels must be 0 or 1, found {0}")]
    InvalidLabel(f64),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityRow {
    pub truth: f64,
    pub pred: f64,
    pub id: String,
    /// Optional grouping such as cathode class.
    #[serde(default)]
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub n: usize,
    pub mae: f64,
    /// `None` when the truths are constant.
    pub r2: Option<f64>,
    pub undefined: Vec<String>,
    pub pairs: Vec<ParityRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub n: usize,
    /// `confusion[truth][pred]`; class 0 unstable, class 1 stable.
    pub confusion: [[u64; 2]; 2],
    /// Rows per true class.
    pub support: [u64; 2],
    pub positive_class: u8,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub undefined: Vec<String>,
}

fn check_len(t: usize, p: usize) -> Result<(), EvalError> {
    if t != p {
        return Err(EvalError::LengthMismatch { truth: t, pred: p });
    }
    Ok(())
}

/// MAE and R² = 1 − SS_res/SS_tot. `ids` and `tags` may be empty.
pub fn regression_metrics(
    truth: &[f64],
    pred: &[f64],
    ids: &[String],
    tags: &[String],
) -> Result<RegressionReport, EvalError> {
    check_len(truth.len(), pred.len())?;
    let n = truth.len();
    if n < 2 {
        return Err(EvalError::TooFewPairs { need: 2, have: n });
    }
    let nf = n as f64;
    let mae = truth.iter().zip(pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / nf;
    let mean = truth.iter().sum::<f64>() / nf;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum();
    let r2 = (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot);
    let undefined = if r2.is_none() { vec!["r2".to_string()] } else { vec![] };
    let pairs = (0..n)
        .map(|i| ParityRow {
            truth: truth[i],
            pred: pred[i],
            id: ids.get(i).cloned().unwrap_or_else(|| i.to_string()),
            tag: tags.get(i).cloned().unwrap_or_default(),
        })
        .collect();
    Ok(RegressionReport { n, mae, r2, undefined, pairs })
}

fn label(v: f64) -> Result<usize, EvalError> {
    match v {
        0.0 => Ok(0),
        1.0 => Ok(1),
        other => Err(EvalError::InvalidLabel(other)),
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn classification_metrics(
    truth: &[f64],
    pred: &[f64],
    positive_class: u8,
) -> Result<ClassificationReport, EvalError> {
    check_len(truth.len(), pred.len())?;
    let mut confusion = [[0u64; 2]; 2];
    for (t, p) in truth.iter().zip(pred) {
        confusion[label(*t)?][label(*p)?] += 1;
    }
    Ok(ClassificationReport::from_confusion(confusion, positive_class))
}

impl ClassificationReport {
    /// Every metric follows from the confusion matrix alone.
    pub fn from_confusion(confusion: [[u64; 2]; 2], positive_class: u8) -> Self {
        let pos = usize::from(positive_class.min(1));
        let neg = 1 - pos;
        let tp = confusion[pos][pos];
        let fp = confusion[neg][pos];
        let fn_ = confusion[pos][neg];
        let tn = confusion[neg][neg];
        let n = tp + fp + fn_ + tn;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        let mut undefined = Vec::new();
        for (name, v) in [("precision", precision), ("recall", recall), ("f1", f1)] {
            if v.is_none() {
                undefined.push(name.to_string());
            }
        }
        let accuracy = ratio(tp + tn, n).unwrap_or_else(|| {
            undefined.insert(0, "accuracy".to_string());
            0.0
        });
        ClassificationReport {
            n: n as usize,
            confusion,
            support: [confusion[0][0] + confusion[0][1], confusion[1][0] + confusion[1][1]],
            positive_class: pos as u8,
            accuracy,
            precision,
            recall,
            f1,
            undefined,
        }
    }
}

/// `{task}_{target_cycle}_{model}_{seed}`; tasks without a target cycle use `na`.
pub fn report_stem(task: &str, target_cycle: Option<u32>, model: &str, seed: u64) -> String {
    let cycle = target_cycle.map_or_else(|| "na".to_string(), |c| c.to_string());
    format!("{task}_{cycle}_{model}_{seed}")
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), EvalError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| EvalError::Io(e.to_string()))?;
    }
    std::fs::write(path, bytes).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))
}

impl RegressionReport {
    pub fn parity_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["truth", "pred", "id", "tag"]).unwrap();
        for r in &self.pairs {
            w.write_record([r.truth.to_string(), r.pred.to_string(), r.id.clone(), r.tag.clone()]).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `<stem>.json` and `<stem>.parity.csv`.
    pub fn emit(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, EvalError> {
        let json = dir.join(format!("{stem}.json"));
        let csv = dir.join(format!("{stem}.parity.csv"));
        write(&json, self.to_json().as_bytes())?;
        write(&csv, self.parity_csv().as_bytes())?;
        Ok(vec![json, csv])
    }
}

impl ClassificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn confusion_csv(&self) -> String {
        let c = self.confusion;
        format!("truth\\pred,0,1\n0,{},{}\n1,{},{}\n", c[0][0], c[0][1], c[1][0], c[1][1])
    }

    /// Writes `<stem>.json` and `<stem>.confusion.csv`.
    pub fn emit(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, EvalError> {
        let json = dir.join(format!("{stem}.json"));
        let csv = dir.join(format!("{stem}.confusion.csv"));
        write(&json, self.to_json().as_bytes())?;
        write(&csv, self.confusion_csv().as_bytes())?;
        Ok(vec![json, csv])
    }
}
