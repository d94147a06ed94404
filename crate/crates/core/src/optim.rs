//! Logloss objective with squared-L2 regularization, Adam, and the
//! mini-batch training loop.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{BatchIter, Dataset, Instance};
use crate::error::{check_len, Result, XcnError};
use crate::metrics::evaluate;
use crate::params::Parameterized;

/// Predictions are clamped to `[PRED_CLAMP, 1 − PRED_CLAMP]` inside the loss.
pub const PRED_CLAMP: f64 = 1e-7;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// A model that can be trained by [`fit`].
///
/// Gradient containers are values of the implementing type, so the optimizer
/// can pair parameter and gradient groups by position.
pub trait Learner: Parameterized + Sync {
    /// Predicted click probability.
    fn predict(&self, inst: &Instance) -> Result<f64>;

    /// A zero-filled gradient container.
    fn zeros_like(&self) -> Self
    where
        Self: Sized;

    /// Adds the gradient of the single-instance Logloss into `grads` and
    /// returns the prediction.
    fn accumulate_gradient(&self, inst: &Instance, grads: &mut Self) -> Result<f64>
    where
        Self: Sized;

    fn check_dataset(&self, data: &Dataset) -> Result<()>;
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PRED_CLAMP, 1.0 - PRED_CLAMP)
}

/// `−[y log p + (1 − y) log(1 − p)]` with `p` clamped.
pub fn instance_logloss(p: f64, y: u8) -> f64 {
    let p = clamp_prob(p);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Mean binary cross-entropy, summed in index order.
pub fn logloss(preds: &[f64], labels: &[u8]) -> Result<f64> {
    check_len("logloss", preds.len(), labels.len())?;
    if preds.is_empty() {
        return Err(XcnError::Empty("logloss of zero predictions"));
    }
    let mut sum = 0.0;
    for (&p, &y) in preds.iter().zip(labels) {
        sum += instance_logloss(p, y);
    }
    Ok(sum / preds.len() as f64)
}

/// `J = loss + λ‖θ‖²` over every parameter.
pub fn objective<P: Parameterized + ?Sized>(loss: f64, params: &P, lambda: f64) -> f64 {
    let mut sq = 0.0;
    params.visit_params(&mut |_, s| {
        for v in s {
            sq += v * v;
        }
    });
    loss + lambda * sq
}

/// Gradient of [`objective`]: `g + 2λθ`, flattened in registry order.
pub fn objective_gradient<P: Parameterized>(params: &P, grads: &P, lambda: f64) -> Vec<f64> {
    let mut g = grads.flat_params();
    let mut offset = 0;
    params.visit_params(&mut |_, s| {
        for (gi, &th) in g[offset..offset + s.len()].iter_mut().zip(s) {
            *gi += 2.0 * lambda * th;
        }
        offset += s.len();
    });
    g
}

/// Mean Logloss gradient over `batch`, written into `grads`; returns the
/// batch's mean Logloss.
///
/// Instances are reduced in ascending dataset index regardless of the order
/// of `batch`, so the result is bitwise independent of that order.
pub fn batch_gradient<L: Learner>(model: &L, data: &Dataset, batch: &[usize], grads: &mut L) -> Result<f64> {
    if batch.is_empty() {
        return Err(XcnError::Empty("batch"));
    }
    let mut sorted = batch.to_vec();
    sorted.sort_unstable();
    grads.fill_zero();
    let mut loss = 0.0;
    for &i in &sorted {
        let inst = data.get(i);
        let p = model.accumulate_gradient(inst, grads)?;
        loss += instance_logloss(p, inst.label);
    }
    let n = sorted.len() as f64;
    grads.scale(1.0 / n);
    Ok(loss / n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }

    /// One bias-corrected Adam update on `g + 2λθ` (L2 folded into the
    /// gradient before the moment estimates).
    pub fn step<P: Parameterized>(&mut self, params: &mut P, grads: &P, lr: f64, lambda: f64) -> Result<()> {
        let g = objective_gradient(params, grads, lambda);
        check_len("adam_step", self.m.len(), g.len())?;
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let (m, v) = (&mut self.m, &mut self.v);
        let mut offset = 0;
        params.visit_params_mut(&mut |_, s| {
            for (j, th) in s.iter_mut().enumerate() {
                let k = offset + j;
                let gk = g[k];
                m[k] = b1 * m[k] + (1.0 - b1) * gk;
                v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                *th -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            offset += s.len();
        });
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub lambda: f64,
    pub epochs: usize,
    /// Seeds the shuffling stream.
    pub seed: u64,
    /// Also evaluate every this many steps; 0 means only at epoch ends.
    pub eval_every: usize,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            batch_size: 4096,
            lambda: 1e-4,
            epochs: 1,
            seed: 0,
            eval_every: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    /// Every violated constraint as `(key, message)`.
    pub fn problems(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            out.push(("lr", format!("must be finite and >= 0, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            out.push(("batch_size", "must be >= 1".to_string()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            out.push(("lambda", format!("must be finite and >= 0, got {}", self.lambda)));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(XcnError::InvalidConfig(
                p.iter().map(|(k, m)| format!("{k}: {m}")).collect::<Vec<_>>().join("; "),
            ))
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: u64,
    pub epoch: usize,
    pub train_logloss: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub val_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub val_logloss: Option<f64>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub records: Vec<LogRecord>,
    pub adam: AdamState,
    /// True when the callback asked to stop early.
    pub interrupted: bool,
}

impl FitOutcome {
    /// The last record that carries validation metrics.
    pub fn last_validation(&self) -> Option<&LogRecord> {
        self.records.iter().rev().find(|r| r.val_logloss.is_some())
    }
}

/// Mini-batch Adam over `epochs` shuffled passes of `train`.
///
/// `on_record` sees every log record as it is produced and returns `false`
/// to stop after the current step.
pub fn fit<L: Learner>(
    model: &mut L,
    train: &Dataset,
    valid: Option<&Dataset>,
    cfg: &TrainConfig,
    on_record: &mut dyn FnMut(&LogRecord, &L) -> bool,
) -> Result<FitOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(XcnError::Empty("training dataset"));
    }
    model.check_dataset(train)?;
    if let Some(v) = valid {
        model.check_dataset(v)?;
    }

    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(model.num_params());
    let mut grads = model.zeros_like();
    let mut records = Vec::new();
    let mut step: u64 = 0;

    for epoch in 1..=cfg.epochs {
        let batches: Vec<Vec<usize>> = BatchIter::new(train.len(), cfg.batch_size, cfg.shuffle, &mut rng).collect();
        let last = batches.len();
        for (bi, batch) in batches.iter().enumerate() {
            let loss = batch_gradient(model, train, batch, &mut grads)?;
            if !loss.is_finite() {
                return Err(XcnError::NonFinite(format!("training loss at step {}", step + 1)));
            }
            adam.step(model, &grads, cfg.lr, cfg.lambda)?;
            step += 1;

            let at_epoch_end = bi + 1 == last;
            let on_cadence = cfg.eval_every > 0 && step.is_multiple_of(cfg.eval_every as u64);
            let mut record = LogRecord {
                step,
                epoch,
                train_logloss: loss,
                val_auc: None,
                val_logloss: None,
                wall_ms: 0,
            };
            if let Some(v) = valid.filter(|v| !v.is_empty() && (at_epoch_end || on_cadence)) {
                let report = evaluate(model, v)?;
                if !report.logloss.is_finite() {
                    return Err(XcnError::NonFinite(format!("validation loss at step {step}")));
                }
                record.val_auc = report.auc;
                record.val_logloss = Some(report.logloss);
            }
            record.wall_ms = started.elapsed().as_millis() as u64;
            let keep_going = on_record(&record, model);
            records.push(record);
            if !keep_going {
                return Ok(FitOutcome {
                    records,
                    adam,
                    interrupted: true,
                });
            }
        }
    }
    Ok(FitOutcome {
        records,
        adam,
        interrupted: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Single scalar parameter, used to exercise the update rule directly.
    #[derive(Debug, Clone)]
    struct Scalar([f64; 1]);

    impl Parameterized for Scalar {
        fn visit_params(&self, f: &mut dyn FnMut(&str, &[f64])) {
            f("x", &self.0);
        }
        fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
            f("x", &mut self.0);
        }
    }

    #[test]
    fn logloss_values() {
        let l = logloss(&[0.5, 0.5], &[1, 0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let perfect = logloss(&[1.0, 0.0], &[1, 0]).unwrap();
        assert!(perfect.is_finite() && perfect > 0.0 && perfect < 2e-7);
        assert!(logloss(&[], &[]).is_err());
        assert!(logloss(&[0.5], &[1, 0]).is_err());
    }

    #[test]
    fn logloss_matches_independent_sum() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let preds: Vec<f64> = (0..500).map(|_| rng.gen_range(0.001..0.999)).collect();
        let labels: Vec<u8> = (0..500).map(|_| rng.gen_range(0..2)).collect();
        // Compensated sum of the textbook form.
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for (p, y) in preds.iter().zip(&labels) {
            let yf = f64::from(*y);
            let term = -(yf * p.ln() + (1.0 - yf) * (1.0 - p).ln()) - comp;
            let t = sum + term;
            comp = (t - sum) - term;
            sum = t;
        }
        let reference = sum / 500.0;
        assert!((logloss(&preds, &labels).unwrap() - reference).abs() <= 1e-12 * reference);
    }

    #[test]
    fn objective_values() {
        let p = Scalar([2.0]);
        assert_eq!(objective(1.0, &p, 0.0), 1.0);
        assert_eq!(objective(1.0, &p, 0.5), 3.0);
        assert!(objective(0.3, &Scalar([-0.1]), 1e-4) >= 0.3);
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut p = Scalar([1.25]);
        let g = Scalar([0.0]);
        let mut s = AdamState::new(1);
        for _ in 0..5 {
            s.step(&mut p, &g, 0.001, 0.0).unwrap();
        }
        assert_eq!(p.0[0], 1.25);
        assert_eq!(s.t, 5);
    }

    #[test]
    fn adam_first_step() {
        let mut p = Scalar([0.0]);
        let mut s = AdamState::new(1);
        s.step(&mut p, &Scalar([1.0]), 0.001, 0.0).unwrap();
        // m̂ = 1, v̂ = 1 at t = 1
        let expected = -0.001 / (1.0 + ADAM_EPS);
        assert!((p.0[0] - expected).abs() < 1e-15);
        assert!(s.v[0] >= 0.0);
    }

    #[test]
    fn adam_includes_l2_term() {
        let p = Scalar([3.0]);
        let g = objective_gradient(&p, &Scalar([0.5]), 0.1);
        assert_eq!(g, vec![0.5 + 2.0 * 0.1 * 3.0]);
        let mut s = AdamState::new(2);
        assert!(s.step(&mut Scalar([1.0]), &Scalar([1.0]), 0.1, 0.0).is_err());
    }

    #[test]
    fn train_config_problems_name_keys() {
        let cfg = TrainConfig {
            lr: -1.0,
            batch_size: 0,
            lambda: f64::NAN,
            ..TrainConfig::default()
        };
        let keys: Vec<&str> = cfg.problems().iter().map(|p| p.0).collect();
        assert_eq!(keys, vec!["lr", "batch_size", "lambda"]);
    }
}
