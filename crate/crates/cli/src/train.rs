use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde_json::{json, Map, Value};
use xcrossnet::metrics::{auc, evaluate, EvalReport};
use xcrossnet::model::{save_checkpoint, XCrossNetModel};
use xcrossnet::optim::{fit, LogRecord};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::source::{load_data, CHECKPOINT_FILE, CONFIG_FILE, LOG_FILE, VOCAB_FILE};

pub struct TrainSummary {
    pub report: Option<EvalReport>,
    /// AUC of the true probabilities on the validation split (synthetic data).
    pub bayes_auc: Option<f64>,
    pub steps: u64,
    pub interrupted: bool,
}

fn meta(cfg: &RunConfig, record: Option<&LogRecord>, interrupted: bool) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("step".into(), json!(record.map_or(0, |r| r.step)));
    m.insert("epoch".into(), json!(record.map_or(0, |r| r.epoch)));
    m.insert("interrupted".into(), json!(interrupted));
    m.insert("dense_transform".into(), json!(cfg.data.dense_transform));
    m
}

fn write_checkpoint(model: &XCrossNetModel, meta: Map<String, Value>, dir: &Path) -> Result<(), CliError> {
    let path = dir.join(CHECKPOINT_FILE);
    save_checkpoint(model, meta, &path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn run(cfg: &RunConfig, stop: Arc<AtomicBool>) -> Result<TrainSummary, CliError> {
    let data = load_data(cfg)?;
    let (num_dense, num_sparse) = (data.train.num_dense(), data.train.num_sparse());
    let model_cfg = cfg.model.to_model_config(num_dense, num_sparse, data.vocab_sizes.clone());
    let mut model = XCrossNetModel::init(&model_cfg)?;

    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    std::fs::write(dir.join(CONFIG_FILE), cfg.to_toml()?)?;
    if let Some(v) = &data.vocab {
        v.save(&dir.join(VOCAB_FILE))?;
    }
    let mut log = BufWriter::new(File::create(dir.join(LOG_FILE))?);

    eprintln!(
        "training on {} instances ({} validation), {} parameters",
        data.train.len(),
        data.valid.len(),
        model.param_counts().total
    );
    let valid = (!data.valid.is_empty()).then_some(&data.valid);
    let mut io_error: Option<CliError> = None;
    let outcome = fit(&mut model, &data.train, valid, &cfg.train, &mut |record, model| {
        let line = serde_json::to_string(record).expect("log record serializes");
        if let Err(e) = writeln!(log, "{line}").and_then(|_| log.flush()) {
            io_error = Some(e.into());
            return false;
        }
        if let Some(l) = record.val_logloss {
            let auc = record.val_auc.map_or("unavailable".to_string(), |a| format!("{a:.5}"));
            eprintln!(
                "epoch {} step {}: train_logloss={:.5} val_logloss={l:.5} val_auc={auc}",
                record.epoch, record.step, record.train_logloss
            );
        }
        let every = cfg.output.checkpoint_every;
        if every > 0 && record.step % every == 0 {
            if let Err(e) = write_checkpoint(model, meta(cfg, Some(record), false), dir) {
                io_error = Some(e);
                return false;
            }
        }
        !stop.load(Ordering::SeqCst)
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    let outcome = outcome?;
    write_checkpoint(&model, meta(cfg, outcome.records.last(), outcome.interrupted), dir)?;

    let report = match valid {
        Some(v) => Some(evaluate(&model, v)?),
        None => None,
    };
    let bayes_auc = match (&data.valid_probs, valid) {
        (Some(p), Some(v)) => auc(p, &v.labels()).ok(),
        _ => None,
    };
    Ok(TrainSummary {
        report,
        bayes_auc,
        steps: outcome.records.last().map_or(0, |r| r.step),
        interrupted: outcome.interrupted,
    })
}
