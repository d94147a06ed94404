use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_len, Result, XcnError};
use crate::optim::{logloss, Learner};

/// Area under the ROC curve via the Mann–Whitney rank statistic. Tied
/// predictions share the average of their ranks.
pub fn auc(preds: &[f64], labels: &[u8]) -> Result<f64> {
    check_len("auc", preds.len(), labels.len())?;
    if preds.iter().any(|p| p.is_nan()) {
        return Err(XcnError::NonFinite("prediction passed to auc".into()));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(XcnError::Undefined("AUC needs at least one positive and one negative"));
    }

    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[a].total_cmp(&preds[b]));

    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && preds[order[end]] == preds[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their mean.
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i] == 1).count();
        pos_rank_sum += avg_rank * pos_in_group as f64;
        start = end;
    }
    let np = n_pos as f64;
    Ok((pos_rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `None` when the data holds a single class.
    pub auc: Option<f64>,
    pub logloss: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl EvalReport {
    pub fn from_predictions(preds: &[f64], labels: &[u8]) -> Result<Self> {
        let loss = logloss(preds, labels)?;
        let n_pos = labels.iter().filter(|&&y| y == 1).count();
        let n_neg = labels.len() - n_pos;
        let auc = if n_pos > 0 && n_neg > 0 {
            Some(auc(preds, labels)?)
        } else {
            None
        };
        Ok(Self {
            auc,
            logloss: loss,
            n_pos,
            n_neg,
        })
    }
}

/// Machine-readable `key=value` lines.
impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.auc {
            Some(a) => writeln!(f, "auc={a}")?,
            None => writeln!(f, "auc=unavailable")?,
        }
        writeln!(f, "logloss={}", self.logloss)?;
        writeln!(f, "n_pos={}", self.n_pos)?;
        write!(f, "n_neg={}", self.n_neg)
    }
}

/// Scores every instance, in dataset order.
pub fn predict_all<L: Learner>(model: &L, data: &Dataset) -> Result<Vec<f64>> {
    model.check_dataset(data)?;
    data.instances().par_iter().map(|inst| model.predict(inst)).collect()
}

pub fn evaluate<L: Learner>(model: &L, data: &Dataset) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(XcnError::Empty("evaluation dataset"));
    }
    let preds = predict_all(model, data)?;
    EvalReport::from_predictions(&preds, &data.labels())
}
