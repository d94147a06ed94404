//! In-memory datasets, Criteo TSV ingestion and synthetic task generation.

mod batch;
mod criteo;
mod synth;
mod vocab;

pub use batch::BatchIter;
pub use criteo::{
    load_split, open_lines, parse_line, read_dataset, read_lines, write_tsv, DenseTransform, LoadedSplit, Schema, CRITEO_SCHEMA,
};
pub use synth::{synth_generate, SynthData, SynthSpec};
pub use vocab::{build_vocab, FieldVocab, DEFAULT_MIN_FREQ, OOV_ID};

use crate::error::{Result, XcnError};

/// One labeled example: normalized dense values, sparse ids and a 0/1 label.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub dense: Vec<f64>,
    pub sparse: Vec<u32>,
    pub label: u8,
}

impl Instance {
    pub fn y(&self) -> f64 {
        f64::from(self.label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    num_dense: usize,
    num_sparse: usize,
    instances: Vec<Instance>,
}

impl Dataset {
    pub fn new(num_dense: usize, num_sparse: usize, instances: Vec<Instance>) -> Result<Self> {
        for (i, inst) in instances.iter().enumerate() {
            if inst.dense.len() != num_dense || inst.sparse.len() != num_sparse {
                return Err(XcnError::Parse {
                    line: i + 1,
                    msg: format!(
                        "instance has {} dense / {} sparse fields, expected {num_dense} / {num_sparse}",
                        inst.dense.len(),
                        inst.sparse.len()
                    ),
                });
            }
            if inst.label > 1 {
                return Err(XcnError::Parse {
                    line: i + 1,
                    msg: format!("label {} is not 0 or 1", inst.label),
                });
            }
            if inst.dense.iter().any(|v| !v.is_finite()) {
                return Err(XcnError::NonFinite(format!("dense value in instance {}", i + 1)));
            }
        }
        Ok(Self {
            num_dense,
            num_sparse,
            instances,
        })
    }

    pub fn num_dense(&self) -> usize {
        self.num_dense
    }

    pub fn num_sparse(&self) -> usize {
        self.num_sparse
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn get(&self, i: usize) -> &Instance {
        &self.instances[i]
    }

    pub fn labels(&self) -> Vec<u8> {
        self.instances.iter().map(|i| i.label).collect()
    }

    /// Largest sparse id per field, plus one.
    pub fn min_vocab_sizes(&self) -> Vec<usize> {
        let mut out = vec![1; self.num_sparse];
        for inst in &self.instances {
            for (v, &id) in out.iter_mut().zip(&inst.sparse) {
                *v = (*v).max(id as usize + 1);
            }
        }
        out
    }
}
