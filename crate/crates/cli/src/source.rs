//! Loading the datasets a command works on.

use std::path::{Path, PathBuf};

use xcrossnet::data::{
    load_split, read_dataset, synth_generate, Dataset, DenseTransform, FieldVocab, Schema,
};
use xcrossnet::model::{load_checkpoint, CheckpointHeader, XCrossNetModel};

use crate::config::RunConfig;
use crate::error::CliError;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const LOG_FILE: &str = "train_log.jsonl";
pub const CONFIG_FILE: &str = "run_config.toml";
pub const VOCAB_FILE: &str = "vocab.json";

pub struct Loaded {
    pub train: Dataset,
    pub valid: Dataset,
    /// Only for file data.
    pub vocab: Option<FieldVocab>,
    pub vocab_sizes: Vec<usize>,
    /// True click probabilities of the validation split, only for
    /// synthetic data.
    pub valid_probs: Option<Vec<f64>>,
}

/// The training and validation data described by a resolved config.
pub fn load_data(cfg: &RunConfig) -> Result<Loaded, CliError> {
    if let Some(spec) = &cfg.data.synth {
        let data = synth_generate(spec)?;
        return Ok(Loaded {
            train: data.train,
            valid: data.valid,
            vocab: None,
            vocab_sizes: spec.vocab_sizes.clone(),
            valid_probs: Some(data.valid_probs),
        });
    }
    let train_path = cfg
        .data
        .train
        .as_deref()
        .ok_or_else(|| CliError::Usage("no training data (pass --data <PATH> or --synth <PRESET>)".into()))?;
    let (num_dense, num_sparse) = cfg.schema();
    let split = load_split(
        train_path,
        cfg.data.valid.as_deref(),
        cfg.data.valid_fraction,
        Schema { num_dense, num_sparse },
        cfg.data.dense_transform,
        cfg.data.min_freq,
    )?;
    let vocab_sizes = split.vocab.vocab_sizes();
    Ok(Loaded {
        train: split.train,
        valid: split.valid,
        vocab: Some(split.vocab),
        vocab_sizes,
        valid_probs: None,
    })
}

pub fn open_checkpoint(path: &Path) -> Result<(XCrossNetModel, CheckpointHeader), CliError> {
    load_checkpoint(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Where `eval` and `predict` take their data from.
pub enum DataArg {
    /// The validation split of a finished run, rebuilt from its saved config.
    RunDir(PathBuf),
    /// A TSV file scored with an existing vocabulary.
    File { path: PathBuf, vocab: Option<PathBuf> },
    /// A regenerated synthetic split.
    Synth { config: Box<RunConfig>, train_split: bool },
}

pub fn read_run_config(dir: &Path) -> Result<RunConfig, CliError> {
    let path = dir.join(CONFIG_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// The dataset to score; `checkpoint` is used to locate a default vocabulary
/// and to read the dense transform used in training.
pub fn scoring_data(arg: &DataArg, checkpoint: &Path, header: &CheckpointHeader) -> Result<Dataset, CliError> {
    match arg {
        DataArg::RunDir(dir) => Ok(load_data(&read_run_config(dir)?)?.valid),
        DataArg::Synth { config, train_split } => {
            let loaded = load_data(config)?;
            Ok(if *train_split { loaded.train } else { loaded.valid })
        }
        DataArg::File { path, vocab } => {
            let vocab_path = match vocab {
                Some(v) => v.clone(),
                None => checkpoint.with_file_name(VOCAB_FILE),
            };
            let vocab = FieldVocab::load(&vocab_path)
                .map_err(|e| CliError::Io(format!("{}: {e} (pass --vocab <PATH>)", vocab_path.display())))?;
            let transform = header
                .meta
                .get("dense_transform")
                .and_then(|v| serde_json::from_value::<DenseTransform>(v.clone()).ok())
                .unwrap_or_default();
            let schema = Schema {
                num_dense: header.model.num_dense,
                num_sparse: header.model.num_sparse,
            };
            if vocab.vocab_sizes() != header.model.vocab_sizes {
                return Err(CliError::Usage(format!(
                    "{}: vocabulary sizes {:?} do not match the checkpoint's {:?}",
                    vocab_path.display(),
                    vocab.vocab_sizes(),
                    header.model.vocab_sizes
                )));
            }
            Ok(read_dataset(path, schema, transform, &vocab)?)
        }
    }
}
