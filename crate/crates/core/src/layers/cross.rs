//! Cross layers over the dense feature vector.
//!
//! Layer `l` maps `C_l` to `C_{l+1} = D · (C_lᵀ W_l) + b_l` with `C_0 = D`.
//! The M×M matrix `D · C_lᵀ` is never formed: `C_lᵀ W_l` is a scalar, so each
//! layer costs O(M). The stack output is `[D; C_1; …; C_L]`.

use rand::Rng;

use super::init::{fill_normal, SMALL_NORMAL_STD};
use crate::error::{check_len, Result, XcnError};
use crate::linalg::{axpy_into, dot_unchecked};
use crate::params::Parameterized;

#[derive(Debug, Clone, PartialEq)]
pub struct CrossStack {
    dim: usize,
    depth: usize,
    /// `depth × dim`, layer-major.
    weights: Vec<f64>,
    /// `depth × dim`, layer-major.
    biases: Vec<f64>,
}

/// Activations retained by [`CrossStack::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct CrossCache {
    input: Vec<f64>,
    /// `C_1 … C_L`, layer-major.
    crosses: Vec<f64>,
    /// `s_l = C_lᵀ W_l` for `l = 0..L` (with `C_0 = D`).
    scalars: Vec<f64>,
}

impl CrossCache {
    pub fn input(&self) -> &[f64] {
        &self.input
    }

    pub fn scalars(&self) -> &[f64] {
        &self.scalars
    }

    /// `C_l` for `l` in `1..=L`.
    pub fn cross(&self, l: usize) -> &[f64] {
        let m = self.input.len();
        &self.crosses[(l - 1) * m..l * m]
    }
}

impl CrossStack {
    pub fn zeros(dim: usize, depth: usize) -> Self {
        Self {
            dim,
            depth,
            weights: vec![0.0; dim * depth],
            biases: vec![0.0; dim * depth],
        }
    }

    /// Weights ~ Normal(0, 0.01), biases zero.
    pub fn init<R: Rng + ?Sized>(dim: usize, depth: usize, rng: &mut R) -> Self {
        let mut stack = Self::zeros(dim, depth);
        fill_normal(rng, &mut stack.weights, SMALL_NORMAL_STD);
        stack
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dim, self.depth)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn output_dim(&self) -> usize {
        self.dim * (self.depth + 1)
    }

    pub fn weight(&self, l: usize) -> &[f64] {
        &self.weights[l * self.dim..(l + 1) * self.dim]
    }

    pub fn weight_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.weights[l * self.dim..(l + 1) * self.dim]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        &self.biases[l * self.dim..(l + 1) * self.dim]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.biases[l * self.dim..(l + 1) * self.dim]
    }

    pub fn forward(&self, dense: &[f64]) -> Result<(Vec<f64>, CrossCache)> {
        check_len("cross_forward input", self.dim, dense.len())?;
        let m = self.dim;
        let mut out = Vec::with_capacity(self.output_dim());
        out.extend_from_slice(dense);
        let mut scalars = Vec::with_capacity(self.depth);
        for l in 0..self.depth {
            let prev = &out[l * m..(l + 1) * m];
            let s = dot_unchecked(prev, self.weight(l));
            scalars.push(s);
            let bias = self.bias(l);
            for j in 0..m {
                out.push(dense[j] * s + bias[j]);
            }
        }
        let cache = CrossCache {
            input: dense.to_vec(),
            crosses: out[m..].to_vec(),
            scalars,
        };
        Ok((out, cache))
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the dense input.
    pub fn backward(
        &self,
        cache: &CrossCache,
        grad_out: &[f64],
        grads: &mut CrossStack,
    ) -> Result<Vec<f64>> {
        let m = self.dim;
        if cache.scalars.len() != self.depth || cache.input.len() != m {
            return Err(XcnError::DimensionMismatch {
                context: "cross_backward cache",
                expected: self.depth,
                actual: cache.scalars.len(),
            });
        }
        check_len("cross_backward grad", self.output_dim(), grad_out.len())?;
        check_len("cross_backward grads", self.num_params(), grads.num_params())?;

        let dense = &cache.input;
        let mut grad_dense = grad_out[..m].to_vec();
        if self.depth == 0 {
            return Ok(grad_dense);
        }
        // Running gradient w.r.t. C_l, seeded with the direct output gradient.
        let mut grad_c = grad_out[self.depth * m..].to_vec();
        for l in (0..self.depth).rev() {
            // C_{l+1} = D * s_l + b_l,  s_l = <X_l, W_l>,  X_0 = D, X_l = C_l.
            axpy_into(1.0, &grad_c, grads.bias_mut(l));
            let s = cache.scalars[l];
            let grad_s = dot_unchecked(&grad_c, dense);
            axpy_into(s, &grad_c, &mut grad_dense);
            if l == 0 {
                axpy_into(grad_s, dense, grads.weight_mut(0));
                axpy_into(grad_s, self.weight(0), &mut grad_dense);
            } else {
                axpy_into(grad_s, cache.cross(l), grads.weight_mut(l));
                let mut next = grad_out[l * m..(l + 1) * m].to_vec();
                axpy_into(grad_s, self.weight(l), &mut next);
                grad_c = next;
            }
        }
        Ok(grad_dense)
    }
}

impl Parameterized for CrossStack {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &[f64])) {
        f("weight", &self.weights);
        f("bias", &self.biases);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("weight", &mut self.weights);
        f("bias", &mut self.biases);
    }
}
