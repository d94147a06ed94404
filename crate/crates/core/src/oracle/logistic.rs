//! Logistic regression on raw dense values plus one-hot sparse ids. With no
//! interaction features it sets the bar that a crossing model must clear.

use crate::data::{Dataset, Instance};
use crate::error::{check_len, Result, XcnError};
use crate::metrics::evaluate;
use crate::optim::{fit, Learner, TrainConfig};
use crate::params::Parameterized;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    dense: Vec<f64>,
    sparse: Vec<Vec<f64>>,
    bias: [f64; 1],
}

impl LogisticRegression {
    pub fn zeros(num_dense: usize, vocab_sizes: &[usize]) -> Self {
        Self {
            dense: vec![0.0; num_dense],
            sparse: vocab_sizes.iter().map(|&v| vec![0.0; v]).collect(),
            bias: [0.0],
        }
    }

    fn logit(&self, inst: &Instance) -> Result<f64> {
        check_len("logistic dense fields", self.dense.len(), inst.dense.len())?;
        check_len("logistic sparse fields", self.sparse.len(), inst.sparse.len())?;
        let mut z = self.bias[0];
        for (w, d) in self.dense.iter().zip(&inst.dense) {
            z += w * d;
        }
        for (field, (table, &id)) in self.sparse.iter().zip(&inst.sparse).enumerate() {
            let w = table.get(id as usize).ok_or(XcnError::OutOfVocab {
                field,
                id,
                vocab: table.len(),
            })?;
            z += w;
        }
        Ok(z)
    }
}

impl Parameterized for LogisticRegression {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &[f64])) {
        f("dense", &self.dense);
        for (i, t) in self.sparse.iter().enumerate() {
            f(&format!("field{i}"), t);
        }
        f("bias", &self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("dense", &mut self.dense);
        for (i, t) in self.sparse.iter_mut().enumerate() {
            f(&format!("field{i}"), t);
        }
        f("bias", &mut self.bias);
    }
}

impl Learner for LogisticRegression {
    fn predict(&self, inst: &Instance) -> Result<f64> {
        Ok(crate::layers::sigmoid(self.logit(inst)?))
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.dense.len(), &self.sparse.iter().map(Vec::len).collect::<Vec<_>>())
    }

    fn accumulate_gradient(&self, inst: &Instance, grads: &mut Self) -> Result<f64> {
        let p = self.predict(inst)?;
        let g = p - inst.y();
        for (gw, d) in grads.dense.iter_mut().zip(&inst.dense) {
            *gw += g * d;
        }
        for (table, &id) in grads.sparse.iter_mut().zip(&inst.sparse) {
            table[id as usize] += g;
        }
        grads.bias[0] += g;
        Ok(p)
    }

    fn check_dataset(&self, data: &Dataset) -> Result<()> {
        check_len("dataset dense fields", self.dense.len(), data.num_dense())?;
        check_len("dataset sparse fields", self.sparse.len(), data.num_sparse())?;
        for inst in data.instances() {
            self.logit(inst)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrBaselineConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LrBaselineConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            epochs: 5,
            batch_size: 256,
            seed: 0,
        }
    }
}

/// Validation AUC of an unregularized logistic regression trained on `train`.
pub fn lr_baseline_auc(train: &Dataset, valid: &Dataset, cfg: &LrBaselineConfig) -> Result<f64> {
    let vocab = train.min_vocab_sizes().iter().zip(valid.min_vocab_sizes()).map(|(a, b)| (*a).max(b)).collect::<Vec<_>>();
    let mut model = LogisticRegression::zeros(train.num_dense(), &vocab);
    let train_cfg = TrainConfig {
        lr: cfg.lr,
        batch_size: cfg.batch_size,
        lambda: 0.0,
        epochs: cfg.epochs,
        seed: cfg.seed,
        eval_every: 0,
        shuffle: true,
    };
    fit(&mut model, train, None, &train_cfg, &mut |_, _| true)?;
    evaluate(&model, valid)?
        .auc
        .ok_or(XcnError::Undefined("validation split holds a single class"))
}
