//! Run configuration: built-in defaults, then the synthetic preset's
//! adjustments, then a TOML file, then command-line flags.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xcrossnet::data::{DenseTransform, SynthSpec, CRITEO_SCHEMA, DEFAULT_MIN_FREQ};
use xcrossnet::model::ModelConfig;
use xcrossnet::optim::TrainConfig;

use crate::error::CliError;

/// Batch size used with synthetic data instead of the full-scale default.
pub const SYNTH_BATCH_SIZE: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    pub embedding_dim: usize,
    pub product_units: usize,
    pub cross_depth: usize,
    pub mlp_widths: Vec<usize>,
    pub seed: u64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            embedding_dim: m.embedding_dim,
            product_units: m.product_units,
            cross_depth: m.cross_depth,
            mlp_widths: m.mlp_widths,
            seed: m.seed,
        }
    }
}

impl ArchConfig {
    pub fn to_model_config(&self, num_dense: usize, num_sparse: usize, vocab_sizes: Vec<usize>) -> ModelConfig {
        ModelConfig {
            num_dense,
            num_sparse,
            vocab_sizes,
            embedding_dim: self.embedding_dim,
            product_units: self.product_units,
            cross_depth: self.cross_depth,
            mlp_widths: self.mlp_widths.clone(),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Column counts of TSV data; synthetic data carries its own.
    pub num_dense: usize,
    pub num_sparse: usize,
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    /// Tail fraction of `train` held out when `valid` is not given.
    pub valid_fraction: f64,
    pub dense_transform: DenseTransform,
    pub min_freq: u64,
    pub synth: Option<SynthSpec>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            num_dense: CRITEO_SCHEMA.num_dense,
            num_sparse: CRITEO_SCHEMA.num_sparse,
            train: None,
            valid: None,
            valid_fraction: 0.125,
            dense_transform: DenseTransform::Log,
            min_freq: DEFAULT_MIN_FREQ,
            synth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also write the checkpoint every this many steps; 0 means only at the end.
    pub checkpoint_every: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("xcn-run"),
            checkpoint_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ArchConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub output: OutputConfig,
}

/// Named synthetic tasks.
pub fn synth_preset(name: &str) -> Result<SynthSpec, CliError> {
    match name {
        "default" => Ok(SynthSpec::default()),
        "linear" => Ok(SynthSpec::default().linear_only()),
        "null" => Ok(SynthSpec::default().null()),
        other => Err(CliError::Usage(format!(
            "--synth: unknown preset '{other}' (expected default, linear or null)"
        ))),
    }
}

pub(crate) fn to_value<T: Serialize>(v: &T) -> toml::Value {
    toml::Value::try_from(v).expect("config types serialize to TOML")
}

/// Every dotted key a config file may contain.
fn known_keys() -> BTreeSet<String> {
    let mut full = RunConfig::default();
    full.data.train = Some(PathBuf::new());
    full.data.valid = Some(PathBuf::new());
    full.data.synth = Some(SynthSpec::default());
    let mut out = BTreeSet::new();
    collect_keys(&to_value(&full), "", &mut out);
    out
}

fn collect_keys(v: &toml::Value, prefix: &str, out: &mut BTreeSet<String>) {
    if let toml::Value::Table(t) = v {
        for (k, child) in t {
            let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            out.insert(key.clone());
            collect_keys(child, &key, out);
        }
    }
}

fn unknown_keys(v: &toml::Value, prefix: &str, known: &BTreeSet<String>, out: &mut Vec<String>) {
    if let toml::Value::Table(t) = v {
        for (k, child) in t {
            let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            if known.contains(&key) {
                unknown_keys(child, &key, known, out);
            } else {
                out.push(key);
            }
        }
    }
}

pub(crate) fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_table() && v.is_table() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Command-line values that override the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub synth: Option<SynthSpec>,
    pub synth_seed: Option<u64>,
    pub data: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub valid_fraction: Option<f64>,
    pub num_dense: Option<usize>,
    pub num_sparse: Option<usize>,
    pub dense_transform: Option<DenseTransform>,
    pub min_freq: Option<u64>,
    pub out: Option<PathBuf>,
    pub checkpoint_every: Option<u64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub lambda: Option<f64>,
    /// Seeds both initialization and shuffling.
    pub seed: Option<u64>,
    pub eval_every: Option<usize>,
    pub embedding_dim: Option<usize>,
    pub product_units: Option<usize>,
    pub cross_depth: Option<usize>,
    pub mlp_widths: Option<Vec<usize>>,
}

pub fn read_config_file(path: &Path) -> Result<toml::Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    text.parse::<toml::Value>()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Resolves defaults, the synthetic preset, the config file and flags into
/// one validated config. Every problem found is reported together.
pub fn resolve(file: Option<toml::Value>, flags: &Overrides) -> Result<RunConfig, CliError> {
    let mut problems = Vec::new();
    if let Some(f) = &file {
        let mut unknown = Vec::new();
        unknown_keys(f, "", &known_keys(), &mut unknown);
        problems.extend(unknown.into_iter().map(|k| format!("{k}: unknown key")));
    }
    let file_has_synth = file
        .as_ref()
        .and_then(|f| f.get("data"))
        .and_then(|d| d.get("synth"))
        .is_some();

    let mut base = RunConfig::default();
    if flags.synth.is_some() || file_has_synth {
        base.train.batch_size = SYNTH_BATCH_SIZE;
    }
    let mut merged = to_value(&base);
    if let Some(f) = file {
        if problems.is_empty() {
            merge(&mut merged, f);
        }
    }
    let mut cfg: RunConfig = match merged.try_into() {
        Ok(c) => c,
        Err(e) => {
            problems.push(e.to_string().trim().to_string());
            RunConfig::default()
        }
    };
    if !problems.is_empty() {
        return Err(CliError::Usage(format!("invalid configuration:\n  {}", problems.join("\n  "))));
    }

    apply_overrides(&mut cfg, flags);
    let problems = validate(&cfg);
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Usage(format!("invalid configuration:\n  {}", problems.join("\n  "))))
    }
}

fn apply_overrides(cfg: &mut RunConfig, f: &Overrides) {
    if let Some(s) = &f.synth {
        cfg.data.synth = Some(s.clone());
    }
    if let (Some(seed), Some(s)) = (f.synth_seed, cfg.data.synth.as_mut()) {
        s.seed = seed;
    }
    if let Some(p) = &f.data {
        cfg.data.train = Some(p.clone());
    }
    if let Some(p) = &f.valid {
        cfg.data.valid = Some(p.clone());
    }
    macro_rules! set {
        ($src:expr => $dst:expr) => {
            if let Some(v) = $src.clone() {
                $dst = v;
            }
        };
    }
    set!(f.valid_fraction => cfg.data.valid_fraction);
    set!(f.num_dense => cfg.data.num_dense);
    set!(f.num_sparse => cfg.data.num_sparse);
    set!(f.dense_transform => cfg.data.dense_transform);
    set!(f.min_freq => cfg.data.min_freq);
    set!(f.out => cfg.output.dir);
    set!(f.checkpoint_every => cfg.output.checkpoint_every);
    set!(f.epochs => cfg.train.epochs);
    set!(f.batch_size => cfg.train.batch_size);
    set!(f.lr => cfg.train.lr);
    set!(f.lambda => cfg.train.lambda);
    set!(f.eval_every => cfg.train.eval_every);
    set!(f.embedding_dim => cfg.model.embedding_dim);
    set!(f.product_units => cfg.model.product_units);
    set!(f.cross_depth => cfg.model.cross_depth);
    set!(f.mlp_widths => cfg.model.mlp_widths);
    if let Some(seed) = f.seed {
        cfg.model.seed = seed;
        cfg.train.seed = seed;
    }
}

/// Every semantic problem, as `key: message` lines.
pub fn validate(cfg: &RunConfig) -> Vec<String> {
    let mut out = Vec::new();
    let placeholder = cfg.model.to_model_config(1, 1, vec![1]);
    for (k, m) in placeholder.problems() {
        out.push(format!("model.{k}: {m}"));
    }
    for (k, m) in cfg.train.problems() {
        out.push(format!("train.{k}: {m}"));
    }
    if cfg.train.epochs == 0 {
        out.push("train.epochs: must be >= 1".to_string());
    }
    if !(0.0..1.0).contains(&cfg.data.valid_fraction) {
        out.push(format!("data.valid_fraction: must be in [0, 1), got {}", cfg.data.valid_fraction));
    }
    match (&cfg.data.synth, &cfg.data.train) {
        (Some(_), Some(_)) => out.push("data.synth: cannot be combined with data.train".to_string()),
        (Some(s), None) => {
            if let Err(e) = s.validate() {
                out.push(format!("data.synth: {e}"));
            }
        }
        (None, None) => out.push("data.train: no training data (pass --data <PATH> or --synth <PRESET>)".to_string()),
        (None, Some(_)) => {
            for (k, v) in [("num_dense", cfg.data.num_dense), ("num_sparse", cfg.data.num_sparse)] {
                if v == 0 {
                    out.push(format!("data.{k}: must be >= 1"));
                }
            }
        }
    }
    out
}

impl RunConfig {
    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self).map_err(|e| CliError::Usage(format!("config cannot be written as TOML: {e}")))
    }

    /// `(M, N)` of the configured data source.
    pub fn schema(&self) -> (usize, usize) {
        match &self.data.synth {
            Some(s) => (s.num_dense, s.num_sparse),
            None => (self.data.num_dense, self.data.num_sparse),
        }
    }
}

pub fn parse_widths(s: &str) -> Result<Vec<usize>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|w| w.trim().parse::<usize>().map_err(|_| format!("'{w}' is not a width")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth_flags() -> Overrides {
        Overrides {
            synth: Some(SynthSpec::default()),
            ..Overrides::default()
        }
    }

    #[test]
    fn synth_preset_uses_small_batches() {
        let cfg = resolve(None, &synth_flags()).unwrap();
        assert_eq!(cfg.train.batch_size, SYNTH_BATCH_SIZE);
        assert_eq!(cfg.train.lr, 0.001);
        assert_eq!(cfg.train.lambda, 1e-4);
        assert_eq!(cfg.model.mlp_widths, vec![400, 400]);
    }

    #[test]
    fn flags_override_file() {
        let file: toml::Value = "[train]\nepochs = 5\nbatch_size = 64\n".parse().unwrap();
        let flags = Overrides {
            epochs: Some(2),
            seed: Some(9),
            ..synth_flags()
        };
        let cfg = resolve(Some(file), &flags).unwrap();
        assert_eq!(cfg.train.epochs, 2);
        assert_eq!(cfg.train.batch_size, 64);
        assert_eq!((cfg.model.seed, cfg.train.seed), (9, 9));
    }

    #[test]
    fn every_unknown_key_is_listed() {
        let file: toml::Value = "bogus = 1\n[train]\nlearning_rate = 0.1\n[model]\ndepth = 3\n".parse().unwrap();
        let err = resolve(Some(file), &synth_flags()).unwrap_err().to_string();
        for key in ["bogus", "train.learning_rate", "model.depth"] {
            assert!(err.contains(key), "{err}");
        }
    }

    #[test]
    fn every_invalid_value_is_listed() {
        let flags = Overrides {
            lr: Some(-1.0),
            batch_size: Some(0),
            cross_depth: Some(0),
            ..Overrides::default()
        };
        let err = resolve(None, &flags).unwrap_err().to_string();
        for key in ["train.lr", "train.batch_size", "model.cross_depth", "data.train"] {
            assert!(err.contains(key), "{err}");
        }
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = resolve(None, &synth_flags()).unwrap();
        let back = resolve(Some(cfg.to_toml().unwrap().parse().unwrap()), &Overrides::default()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn widths_parse() {
        assert_eq!(parse_widths("400,400").unwrap(), vec![400, 400]);
        assert_eq!(parse_widths("").unwrap(), Vec::<usize>::new());
        assert!(parse_widths("4,x").is_err());
    }
}
