use rand::Rng;

use super::init::{fill_normal, SMALL_NORMAL_STD};
use crate::error::{check_len, Result, XcnError};
use crate::linalg::add_into;
use crate::params::Parameterized;

/// One `vocab_i × K` lookup table per sparse field.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    dim: usize,
    vocab_sizes: Vec<usize>,
    tables: Vec<Vec<f64>>,
}

impl Embedding {
    pub fn zeros(vocab_sizes: &[usize], dim: usize) -> Self {
        Self {
            dim,
            vocab_sizes: vocab_sizes.to_vec(),
            tables: vocab_sizes.iter().map(|&v| vec![0.0; v * dim]).collect(),
        }
    }

    /// Entries ~ Normal(0, 0.01), drawn field by field, row-major.
    pub fn init<R: Rng + ?Sized>(vocab_sizes: &[usize], dim: usize, rng: &mut R) -> Self {
        let mut emb = Self::zeros(vocab_sizes, dim);
        for table in &mut emb.tables {
            fill_normal(rng, table, SMALL_NORMAL_STD);
        }
        emb
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.vocab_sizes, self.dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_fields(&self) -> usize {
        self.vocab_sizes.len()
    }

    pub fn vocab_sizes(&self) -> &[usize] {
        &self.vocab_sizes
    }

    pub fn row(&self, field: usize, id: usize) -> &[f64] {
        &self.tables[field][id * self.dim..(id + 1) * self.dim]
    }

    pub fn row_mut(&mut self, field: usize, id: usize) -> &mut [f64] {
        &mut self.tables[field][id * self.dim..(id + 1) * self.dim]
    }

    fn check_ids(&self, ids: &[u32]) -> Result<()> {
        check_len("embed ids", self.vocab_sizes.len(), ids.len())?;
        for (field, (&id, &vocab)) in ids.iter().zip(&self.vocab_sizes).enumerate() {
            if id as usize >= vocab {
                return Err(XcnError::OutOfVocab { field, id, vocab });
            }
        }
        Ok(())
    }

    /// Concatenated embeddings `[E_1; …; E_N]`, length `N·K`.
    pub fn forward(&self, ids: &[u32]) -> Result<Vec<f64>> {
        self.check_ids(ids)?;
        let mut out = Vec::with_capacity(ids.len() * self.dim);
        for (field, &id) in ids.iter().enumerate() {
            out.extend_from_slice(self.row(field, id as usize));
        }
        Ok(out)
    }

    /// Adds `grad_out` (length `N·K`) into the looked-up rows of `grads`.
    pub fn backward(&self, ids: &[u32], grad_out: &[f64], grads: &mut Embedding) -> Result<()> {
        self.check_ids(ids)?;
        check_len("embed_backward grad", ids.len() * self.dim, grad_out.len())?;
        check_len("embed_backward grads", self.num_params(), grads.num_params())?;
        for (field, &id) in ids.iter().enumerate() {
            let g = &grad_out[field * self.dim..(field + 1) * self.dim];
            add_into(g, grads.row_mut(field, id as usize));
        }
        Ok(())
    }
}

impl Parameterized for Embedding {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &[f64])) {
        for (i, t) in self.tables.iter().enumerate() {
            f(&format!("field{i}"), t);
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        for (i, t) in self.tables.iter_mut().enumerate() {
            f(&format!("field{i}"), t);
        }
    }
}
