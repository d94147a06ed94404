//! Product layer over field embeddings.
//!
//! For each of the `T` output units:
//!
//! ```text
//! u_t   = Σ_i Θ_ti · E_i              (length K)
//! P2_t  = <u_t, u_t>                  = Σ_i Σ_j Θ_ti Θ_tj <E_i, E_j>
//! P1_t  = Σ_i <W1_ti, E_i>
//! ```
//!
//! The pairwise weights `W2_tij = Θ_ti Θ_tj` are never materialized, which
//! brings the order-2 term from O(N²·K·T) to O(N·K·T). Output is `[P1; P2]`.

use rand::Rng;

use super::init::{fill_normal, SMALL_NORMAL_STD};
use crate::error::{check_len, Result, XcnError};
use crate::linalg::{axpy_into, dot_unchecked};
use crate::params::Parameterized;

#[derive(Debug, Clone, PartialEq)]
pub struct ProductLayer {
    fields: usize,
    emb_dim: usize,
    units: usize,
    /// `T × N`
    theta: Vec<f64>,
    /// `T × N × K`
    order1: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ProductCache {
    emb_dim: usize,
    embeddings: Vec<f64>,
    /// `u_t` for every unit, `T × K`.
    reduced: Vec<f64>,
}

impl ProductCache {
    pub fn reduced(&self, t: usize) -> &[f64] {
        &self.reduced[t * self.emb_dim..(t + 1) * self.emb_dim]
    }

    pub fn embeddings(&self) -> &[f64] {
        &self.embeddings
    }
}

impl ProductLayer {
    pub fn zeros(fields: usize, emb_dim: usize, units: usize) -> Self {
        Self {
            fields,
            emb_dim,
            units,
            theta: vec![0.0; units * fields],
            order1: vec![0.0; units * fields * emb_dim],
        }
    }

    /// Θ then order-1 weights, each ~ Normal(0, 0.01).
    pub fn init<R: Rng + ?Sized>(fields: usize, emb_dim: usize, units: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(fields, emb_dim, units);
        fill_normal(rng, &mut p.theta, SMALL_NORMAL_STD);
        fill_normal(rng, &mut p.order1, SMALL_NORMAL_STD);
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.fields, self.emb_dim, self.units)
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn fields(&self) -> usize {
        self.fields
    }

    pub fn emb_dim(&self) -> usize {
        self.emb_dim
    }

    pub fn output_dim(&self) -> usize {
        2 * self.units
    }

    /// `Θ_t`, one weight per field.
    pub fn theta(&self, t: usize) -> &[f64] {
        &self.theta[t * self.fields..(t + 1) * self.fields]
    }

    pub fn theta_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.theta[t * self.fields..(t + 1) * self.fields]
    }

    /// `W1_ti`, length K.
    pub fn order1(&self, t: usize, i: usize) -> &[f64] {
        let k = self.emb_dim;
        let start = (t * self.fields + i) * k;
        &self.order1[start..start + k]
    }

    pub fn order1_mut(&mut self, t: usize, i: usize) -> &mut [f64] {
        let k = self.emb_dim;
        let start = (t * self.fields + i) * k;
        &mut self.order1[start..start + k]
    }

    /// `embeddings` is `[E_1; …; E_N]` as produced by the embedding layer.
    pub fn forward(&self, embeddings: &[f64]) -> Result<(Vec<f64>, ProductCache)> {
        let (n, k, t_count) = (self.fields, self.emb_dim, self.units);
        check_len("product_forward embeddings", n * k, embeddings.len())?;
        let mut p1 = Vec::with_capacity(t_count);
        let mut p2 = Vec::with_capacity(t_count);
        let mut reduced = vec![0.0; t_count * k];
        for t in 0..t_count {
            let u = &mut reduced[t * k..(t + 1) * k];
            let theta = &self.theta[t * n..(t + 1) * n];
            let w1 = &self.order1[t * n * k..(t + 1) * n * k];
            let mut first = 0.0;
            for i in 0..n {
                let e_i = &embeddings[i * k..(i + 1) * k];
                axpy_into(theta[i], e_i, u);
                first += dot_unchecked(&w1[i * k..(i + 1) * k], e_i);
            }
            p1.push(first);
            p2.push(dot_unchecked(u, u));
        }
        p1.extend(p2);
        let cache = ProductCache {
            emb_dim: k,
            embeddings: embeddings.to_vec(),
            reduced,
        };
        Ok((p1, cache))
    }

    /// Accumulates Θ and order-1 gradients into `grads`; returns the gradient
    /// with respect to the concatenated embeddings.
    pub fn backward(
        &self,
        cache: &ProductCache,
        grad_out: &[f64],
        grads: &mut ProductLayer,
    ) -> Result<Vec<f64>> {
        let (n, k, t_count) = (self.fields, self.emb_dim, self.units);
        if cache.emb_dim != k || cache.reduced.len() != t_count * k {
            return Err(XcnError::DimensionMismatch {
                context: "product_backward cache",
                expected: t_count * k,
                actual: cache.reduced.len(),
            });
        }
        check_len("product_backward embeddings", n * k, cache.embeddings.len())?;
        check_len("product_backward grad", 2 * t_count, grad_out.len())?;
        check_len("product_backward grads", self.num_params(), grads.num_params())?;

        let emb = &cache.embeddings;
        let mut grad_emb = vec![0.0; n * k];
        for t in 0..t_count {
            let g1 = grad_out[t];
            let g2 = grad_out[t_count + t];
            let u = cache.reduced(t);
            let theta = self.theta(t);
            for i in 0..n {
                let e_i = &emb[i * k..(i + 1) * k];
                let ge_i = &mut grad_emb[i * k..(i + 1) * k];
                if g1 != 0.0 {
                    // dP1_t/dW1_ti = E_i, dP1_t/dE_i = W1_ti
                    axpy_into(g1, e_i, grads.order1_mut(t, i));
                    axpy_into(g1, self.order1(t, i), ge_i);
                }
                if g2 != 0.0 {
                    // dP2_t/dΘ_ti = 2<u_t, E_i>, dP2_t/dE_i = 2Θ_ti u_t
                    grads.theta_mut(t)[i] += 2.0 * g2 * dot_unchecked(u, e_i);
                    axpy_into(2.0 * g2 * theta[i], u, ge_i);
                }
            }
        }
        Ok(grad_emb)
    }
}

impl Parameterized for ProductLayer {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &[f64])) {
        f("theta", &self.theta);
        f("order1", &self.order1);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("theta", &mut self.theta);
        f("order1", &mut self.order1);
    }
}
