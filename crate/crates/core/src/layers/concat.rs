//! Single cross layer over the concatenated dense and sparse cross features:
//! `X_0 = [O_C; O_P]`, `X_1 = X_0 · (X_0ᵀ W) + b`, output `H_0 = [X_0; X_1]`.

use rand::Rng;

use super::init::{fill_normal, SMALL_NORMAL_STD};
use crate::error::{check_len, Result};
use crate::linalg::{axpy_into, dot_unchecked};
use crate::params::Parameterized;

#[derive(Debug, Clone, PartialEq)]
pub struct ConcatCross {
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ConcatCache {
    dense_len: usize,
    x0: Vec<f64>,
    scalar: f64,
}

impl ConcatCache {
    pub fn x0(&self) -> &[f64] {
        &self.x0
    }
}

impl ConcatCross {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weight: vec![0.0; dim],
            bias: vec![0.0; dim],
        }
    }

    pub fn init<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let mut c = Self::zeros(dim);
        fill_normal(rng, &mut c.weight, SMALL_NORMAL_STD);
        c
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dim())
    }

    /// `dim(X_0)`.
    pub fn dim(&self) -> usize {
        self.weight.len()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.dim()
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut [f64] {
        &mut self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn forward(&self, dense_cross: &[f64], sparse_cross: &[f64]) -> Result<(Vec<f64>, ConcatCache)> {
        let d = self.dim();
        check_len("concat_cross_forward", d, dense_cross.len() + sparse_cross.len())?;
        let mut out = Vec::with_capacity(2 * d);
        out.extend_from_slice(dense_cross);
        out.extend_from_slice(sparse_cross);
        let s = dot_unchecked(&out, &self.weight);
        for j in 0..d {
            out.push(out[j] * s + self.bias[j]);
        }
        let cache = ConcatCache {
            dense_len: dense_cross.len(),
            x0: out[..d].to_vec(),
            scalar: s,
        };
        Ok((out, cache))
    }

    /// Accumulates into `grads`; returns `(grad_O_C, grad_O_P)`.
    pub fn backward(
        &self,
        cache: &ConcatCache,
        grad_out: &[f64],
        grads: &mut ConcatCross,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.dim();
        check_len("concat_cross_backward cache", d, cache.x0.len())?;
        check_len("concat_cross_backward grad", 2 * d, grad_out.len())?;
        check_len("concat_cross_backward grads", d, grads.dim())?;
        let (g_x0_direct, g_x1) = grad_out.split_at(d);
        let x0 = &cache.x0;

        axpy_into(1.0, g_x1, &mut grads.bias);
        let grad_s = dot_unchecked(g_x1, x0);
        axpy_into(grad_s, x0, &mut grads.weight);

        let mut g_x0 = g_x0_direct.to_vec();
        axpy_into(cache.scalar, g_x1, &mut g_x0);
        axpy_into(grad_s, &self.weight, &mut g_x0);
        let g_sparse = g_x0.split_off(cache.dense_len);
        Ok((g_x0, g_sparse))
    }
}

impl Parameterized for ConcatCross {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &[f64])) {
        f("weight", &self.weight);
        f("bias", &self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
    }
}
