//! The assembled network: cross stack on dense features, embedding and
//! product layers on sparse features, a concatenation cross layer joining
//! both, and an MLP head.
//!
//! ```text
//! D ──► CrossStack ──► O_C ─┐
//!                           ├─► ConcatCross ──► H_0 ──► Mlp ──► σ
//! S ──► Embedding ──► ProductLayer ──► O_P ─┘
//! ```

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Instance};
use crate::error::{check_len, Result, XcnError};
use crate::layers::{
    ConcatCache, ConcatCross, CrossCache, CrossStack, Embedding, Mlp, MlpCache, ProductCache, ProductLayer,
};
use crate::optim::Learner;
use crate::params::{visit_prefixed, visit_prefixed_mut, Parameterized};

/// Topology and initialization seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// M
    pub num_dense: usize,
    /// N
    pub num_sparse: usize,
    pub vocab_sizes: Vec<usize>,
    /// K
    pub embedding_dim: usize,
    /// T
    pub product_units: usize,
    /// L
    pub cross_depth: usize,
    pub mlp_widths: Vec<usize>,
    pub seed: u64,
}

impl Default for ModelConfig {
    /// Criteo topology. `vocab_sizes` is left empty: it comes from the data.
    fn default() -> Self {
        Self {
            num_dense: 13,
            num_sparse: 26,
            vocab_sizes: Vec::new(),
            embedding_dim: 20,
            product_units: 100,
            cross_depth: 4,
            mlp_widths: vec![400, 400],
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Small topology used by the gradient check.
    pub fn gradcheck_default() -> Self {
        Self {
            num_dense: 3,
            num_sparse: 4,
            vocab_sizes: vec![5; 4],
            embedding_dim: 5,
            product_units: 6,
            cross_depth: 2,
            mlp_widths: vec![8],
            seed: 0,
        }
    }

    /// `dim(O_C) = M·(L+1)`.
    pub fn dense_cross_dim(&self) -> usize {
        self.num_dense * (self.cross_depth + 1)
    }

    /// `dim(O_P) = 2T`.
    pub fn sparse_cross_dim(&self) -> usize {
        2 * self.product_units
    }

    /// `dim(X_0) = M·(L+1) + 2T`.
    pub fn concat_dim(&self) -> usize {
        self.dense_cross_dim() + self.sparse_cross_dim()
    }

    /// Width of `H_0`, the MLP input.
    pub fn mlp_input_dim(&self) -> usize {
        2 * self.concat_dim()
    }

    /// Every violated constraint as `(key, message)`.
    pub fn problems(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        for (key, v) in [
            ("num_dense", self.num_dense),
            ("num_sparse", self.num_sparse),
            ("embedding_dim", self.embedding_dim),
            ("product_units", self.product_units),
            ("cross_depth", self.cross_depth),
        ] {
            if v == 0 {
                out.push((key, "must be >= 1".to_string()));
            }
        }
        if self.vocab_sizes.len() != self.num_sparse {
            out.push((
                "vocab_sizes",
                format!("has {} entries, expected one per sparse field ({})", self.vocab_sizes.len(), self.num_sparse),
            ));
        } else if self.vocab_sizes.contains(&0) {
            out.push(("vocab_sizes", "every vocabulary needs at least one id".to_string()));
        }
        if self.mlp_widths.contains(&0) {
            out.push(("mlp_widths", "hidden widths must be >= 1".to_string()));
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

/// Parameter counts per stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCounts {
    pub cross: usize,
    pub embedding: usize,
    pub product: usize,
    pub concat: usize,
    pub mlp: usize,
    pub total: usize,
}

/// How `dim(O_C)` is counted for the balance index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimConvention {
    /// `M·(L+1)`: the raw dense input is part of the dense cross output.
    WithInput,
    /// `M·L`: only the L cross vectors are counted.
    CrossOnly,
}

/// `(dim(O_C) / dim(O_P)) / (M / N)`.
pub fn balance_index(config: &ModelConfig, convention: DimConvention) -> f64 {
    let dense_dim = match convention {
        DimConvention::WithInput => config.num_dense * (config.cross_depth + 1),
        DimConvention::CrossOnly => config.num_dense * config.cross_depth,
    };
    let sparse_dim = 2 * config.product_units;
    (dense_dim as f64 / sparse_dim as f64) / (config.num_dense as f64 / config.num_sparse as f64)
}

/// One group in the flat parameter layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// The flat parameter layout: groups in a fixed order (cross weight, cross
/// bias, embedding tables by field, Θ, order-1 weights, concat weight,
/// concat bias, then MLP hidden layers and the output unit).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamRegistry {
    pub entries: Vec<RegistryEntry>,
}

impl ParamRegistry {
    pub fn of<P: Parameterized + ?Sized>(params: &P) -> Self {
        let mut entries = Vec::new();
        let mut offset = 0;
        params.visit_params(&mut |name, s| {
            entries.push(RegistryEntry {
                name: name.to_string(),
                offset,
                len: s.len(),
            });
            offset += s.len();
        });
        Self { entries }
    }

    pub fn total(&self) -> usize {
        self.entries.last().map_or(0, |e| e.offset + e.len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XCrossNetModel {
    config: ModelConfig,
    pub cross: CrossStack,
    pub embedding: Embedding,
    pub product: ProductLayer,
    pub concat: ConcatCross,
    pub mlp: Mlp,
}

/// Everything [`XCrossNetModel::backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ModelCache {
    sparse: Vec<u32>,
    cross: CrossCache,
    product: ProductCache,
    concat: ConcatCache,
    mlp: MlpCache,
}

impl ModelCache {
    pub fn output(&self) -> f64 {
        self.mlp.output()
    }

    pub fn logit(&self) -> f64 {
        self.mlp.logit()
    }

    pub fn mlp_pre_activations(&self) -> impl Iterator<Item = f64> + '_ {
        self.mlp.pre_activations()
    }
}

impl XCrossNetModel {
    /// Draws every parameter from one ChaCha8 stream seeded with
    /// `config.seed`, in registry order: cross weights, embedding tables, Θ,
    /// order-1 weights, concat weight, MLP hidden matrices, output weights.
    /// Biases start at zero.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let cross = CrossStack::init(config.num_dense, config.cross_depth, &mut rng);
        let embedding = Embedding::init(&config.vocab_sizes, config.embedding_dim, &mut rng);
        let product = ProductLayer::init(config.num_sparse, config.embedding_dim, config.product_units, &mut rng);
        let concat = ConcatCross::init(config.concat_dim(), &mut rng);
        let mlp = Mlp::init(config.mlp_input_dim(), &config.mlp_widths, &mut rng);
        Ok(Self {
            config: config.clone(),
            cross,
            embedding,
            product,
            concat,
            mlp,
        })
    }

    /// All parameters zero.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config: config.clone(),
            cross: CrossStack::zeros(config.num_dense, config.cross_depth),
            embedding: Embedding::zeros(&config.vocab_sizes, config.embedding_dim),
            product: ProductLayer::zeros(config.num_sparse, config.embedding_dim, config.product_units),
            concat: ConcatCross::zeros(config.concat_dim()),
            mlp: Mlp::zeros(config.mlp_input_dim(), &config.mlp_widths),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn registry(&self) -> ParamRegistry {
        ParamRegistry::of(self)
    }

    pub fn param_counts(&self) -> ParamCounts {
        let cross = self.cross.num_params();
        let embedding = self.embedding.num_params();
        let product = self.product.num_params();
        let concat = self.concat.num_params();
        let mlp = self.mlp.num_params();
        ParamCounts {
            cross,
            embedding,
            product,
            concat,
            mlp,
            total: cross + embedding + product + concat + mlp,
        }
    }

    fn check_instance(&self, inst: &Instance) -> Result<()> {
        check_len("instance dense fields", self.config.num_dense, inst.dense.len())?;
        check_len("instance sparse fields", self.config.num_sparse, inst.sparse.len())
    }

    pub fn forward(&self, inst: &Instance) -> Result<(f64, ModelCache)> {
        self.check_instance(inst)?;
        let (oc, cross) = self.cross.forward(&inst.dense)?;
        let emb = self.embedding.forward(&inst.sparse)?;
        let (op, product) = self.product.forward(&emb)?;
        let (h0, concat) = self.concat.forward(&oc, &op)?;
        let (out, mlp) = self.mlp.forward(&h0)?;
        Ok((
            out,
            ModelCache {
                sparse: inst.sparse.clone(),
                cross,
                product,
                concat,
                mlp,
            },
        ))
    }

    /// Adds the gradient of the single-instance Logloss for label `y` into
    /// `grads`. The gradient at the logit is exactly `O_G − y`.
    pub fn backward(&self, cache: &ModelCache, y: u8, grads: &mut XCrossNetModel) -> Result<()> {
        if grads.config != self.config {
            return Err(XcnError::InvalidConfig("gradient container has a different topology".into()));
        }
        let grad_logit = cache.mlp.output() - f64::from(y);
        let grad_h0 = self.mlp.backward_logit(&cache.mlp, grad_logit, &mut grads.mlp)?;
        let (grad_oc, grad_op) = self.concat.backward(&cache.concat, &grad_h0, &mut grads.concat)?;
        self.cross.backward(&cache.cross, &grad_oc, &mut grads.cross)?;
        let grad_emb = self.product.backward(&cache.product, &grad_op, &mut grads.product)?;
        self.embedding.backward(&cache.sparse, &grad_emb, &mut grads.embedding)
    }
}

impl Parameterized for XCrossNetModel {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &[f64])) {
        visit_prefixed("cross", &self.cross, f);
        visit_prefixed("embedding", &self.embedding, f);
        visit_prefixed("product", &self.product, f);
        visit_prefixed("concat", &self.concat, f);
        visit_prefixed("mlp", &self.mlp, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        visit_prefixed_mut("cross", &mut self.cross, f);
        visit_prefixed_mut("embedding", &mut self.embedding, f);
        visit_prefixed_mut("product", &mut self.product, f);
        visit_prefixed_mut("concat", &mut self.concat, f);
        visit_prefixed_mut("mlp", &mut self.mlp, f);
    }
}

impl Learner for XCrossNetModel {
    fn predict(&self, inst: &Instance) -> Result<f64> {
        Ok(self.forward(inst)?.0)
    }

    fn zeros_like(&self) -> Self {
        Self {
            config: self.config.clone(),
            cross: self.cross.zeros_like(),
            embedding: self.embedding.zeros_like(),
            product: self.product.zeros_like(),
            concat: self.concat.zeros_like(),
            mlp: self.mlp.zeros_like(),
        }
    }

    fn accumulate_gradient(&self, inst: &Instance, grads: &mut Self) -> Result<f64> {
        let (p, cache) = self.forward(inst)?;
        self.backward(&cache, inst.label, grads)?;
        Ok(p)
    }

    fn check_dataset(&self, data: &Dataset) -> Result<()> {
        check_len("dataset dense fields", self.config.num_dense, data.num_dense())?;
        check_len("dataset sparse fields", self.config.num_sparse, data.num_sparse())?;
        for inst in data.instances() {
            for (field, (&id, &vocab)) in inst.sparse.iter().zip(&self.config.vocab_sizes).enumerate() {
                if id as usize >= vocab {
                    return Err(XcnError::OutOfVocab { field, id, vocab });
                }
            }
        }
        Ok(())
    }
}
