//! ReLU hidden layers followed by a single sigmoid output unit.
//!
//! Hidden weight matrices are stored input-major (`in × out`): the forward
//! pass becomes a sequence of row AXPYs, and every pre-activation still sums
//! its inputs in ascending index order.

use rand::Rng;

use super::init::fill_glorot_uniform;
use crate::error::{check_len, Result, XcnError};
use crate::linalg::{axpy_into, dot_unchecked};
use crate::params::Parameterized;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    fan_in: usize,
    fan_out: usize,
    /// `fan_in × fan_out`
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            fan_in,
            fan_out,
            weight: vec![0.0; fan_in * fan_out],
            bias: vec![0.0; fan_out],
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.weight[i * self.fan_out..(i + 1) * self.fan_out]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input_dim: usize,
    hidden: Vec<Dense>,
    out_weight: Vec<f64>,
    out_bias: [f64; 1],
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input to each hidden layer, then the input to the output unit.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of every hidden layer.
    pre_acts: Vec<Vec<f64>>,
    logit: f64,
    output: f64,
}

impl MlpCache {
    pub fn logit(&self) -> f64 {
        self.logit
    }

    pub fn output(&self) -> f64 {
        self.output
    }

    pub fn pre_activations(&self) -> impl Iterator<Item = f64> + '_ {
        self.pre_acts.iter().flatten().copied()
    }
}

impl Mlp {
    pub fn zeros(input_dim: usize, widths: &[usize]) -> Self {
        let mut hidden = Vec::with_capacity(widths.len());
        let mut fan_in = input_dim;
        for &w in widths {
            hidden.push(Dense::zeros(fan_in, w));
            fan_in = w;
        }
        Self {
            input_dim,
            hidden,
            out_weight: vec![0.0; fan_in],
            out_bias: [0.0],
        }
    }

    /// Glorot-uniform matrices layer by layer, then the output vector; zero biases.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, widths: &[usize], rng: &mut R) -> Self {
        let mut mlp = Self::zeros(input_dim, widths);
        for layer in &mut mlp.hidden {
            fill_glorot_uniform(rng, &mut layer.weight, layer.fan_in, layer.fan_out);
        }
        let last = mlp.out_weight.len();
        fill_glorot_uniform(rng, &mut mlp.out_weight, last, 1);
        mlp
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim, &self.widths())
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn widths(&self) -> Vec<usize> {
        self.hidden.iter().map(|d| d.fan_out).collect()
    }

    /// Weight from input `i` to unit `j` of hidden layer `layer`.
    pub fn hidden_weight(&self, layer: usize, i: usize, j: usize) -> f64 {
        self.hidden[layer].weight[i * self.hidden[layer].fan_out + j]
    }

    pub fn set_hidden_weight(&mut self, layer: usize, i: usize, j: usize, v: f64) {
        let cols = self.hidden[layer].fan_out;
        self.hidden[layer].weight[i * cols + j] = v;
    }

    pub fn output_weight(&self) -> &[f64] {
        &self.out_weight
    }

    pub fn output_weight_mut(&mut self) -> &mut [f64] {
        &mut self.out_weight
    }

    pub fn output_bias(&self) -> f64 {
        self.out_bias[0]
    }

    pub fn set_output_bias(&mut self, b: f64) {
        self.out_bias[0] = b;
    }

    pub fn forward(&self, input: &[f64]) -> Result<(f64, MlpCache)> {
        check_len("mlp_forward input", self.input_dim, input.len())?;
        let mut inputs = Vec::with_capacity(self.hidden.len() + 1);
        let mut pre_acts = Vec::with_capacity(self.hidden.len());
        let mut h = input.to_vec();
        for layer in &self.hidden {
            let mut z = layer.bias.clone();
            for (i, &hi) in h.iter().enumerate() {
                if hi != 0.0 {
                    axpy_into(hi, layer.row(i), &mut z);
                }
            }
            let next: Vec<f64> = z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
            inputs.push(std::mem::replace(&mut h, next));
            pre_acts.push(z);
        }
        let logit = dot_unchecked(&h, &self.out_weight) + self.out_bias[0];
        inputs.push(h);
        let output = sigmoid(logit);
        Ok((
            output,
            MlpCache {
                inputs,
                pre_acts,
                logit,
                output,
            },
        ))
    }

    /// Backward from the gradient of the sigmoid output.
    pub fn backward(&self, cache: &MlpCache, grad_out: f64, grads: &mut Mlp) -> Result<Vec<f64>> {
        let dsig = cache.output * (1.0 - cache.output);
        self.backward_logit(cache, grad_out * dsig, grads)
    }

    /// Backward from the gradient of the pre-sigmoid logit. Accumulates into
    /// `grads`; returns the gradient with respect to the MLP input.
    pub fn backward_logit(&self, cache: &MlpCache, grad_logit: f64, grads: &mut Mlp) -> Result<Vec<f64>> {
        if cache.inputs.len() != self.hidden.len() + 1 {
            return Err(XcnError::DimensionMismatch {
                context: "mlp_backward cache",
                expected: self.hidden.len() + 1,
                actual: cache.inputs.len(),
            });
        }
        check_len("mlp_backward cache input", self.input_dim, cache.inputs[0].len())?;
        if grads.widths() != self.widths() || grads.input_dim != self.input_dim {
            return Err(XcnError::DimensionMismatch {
                context: "mlp_backward grads",
                expected: self.num_params(),
                actual: grads.num_params(),
            });
        }

        let last_in = &cache.inputs[self.hidden.len()];
        grads.out_bias[0] += grad_logit;
        axpy_into(grad_logit, last_in, &mut grads.out_weight);
        let mut grad_h: Vec<f64> = self.out_weight.iter().map(|w| grad_logit * w).collect();

        for l in (0..self.hidden.len()).rev() {
            let layer = &self.hidden[l];
            let z = &cache.pre_acts[l];
            // ReLU'(0) = 0.
            let delta: Vec<f64> = grad_h
                .iter()
                .zip(z)
                .map(|(&g, &zv)| if zv > 0.0 { g } else { 0.0 })
                .collect();
            let input = &cache.inputs[l];
            let g_layer = &mut grads.hidden[l];
            axpy_into(1.0, &delta, &mut g_layer.bias);
            let cols = layer.fan_out;
            for (i, &xi) in input.iter().enumerate() {
                if xi != 0.0 {
                    axpy_into(xi, &delta, &mut g_layer.weight[i * cols..(i + 1) * cols]);
                }
            }
            // Inputs of deeper layers are ReLU outputs: a zero input has a zero
            // local derivative, so its gradient is never consumed.
            let masked = l > 0;
            grad_h = input
                .iter()
                .enumerate()
                .map(|(i, &xi)| {
                    if masked && xi == 0.0 {
                        0.0
                    } else {
                        dot_unchecked(layer.row(i), &delta)
                    }
                })
                .collect();
        }
        Ok(grad_h)
    }
}

impl Parameterized for Mlp {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &[f64])) {
        for (i, layer) in self.hidden.iter().enumerate() {
            f(&format!("hidden{i}.weight"), &layer.weight);
            f(&format!("hidden{i}.bias"), &layer.bias);
        }
        f("output.weight", &self.out_weight);
        f("output.bias", &self.out_bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        for (i, layer) in self.hidden.iter_mut().enumerate() {
            f(&format!("hidden{i}.weight"), &mut layer.weight);
            f(&format!("hidden{i}.bias"), &mut layer.bias);
        }
        f("output.weight", &mut self.out_weight);
        f("output.bias", &mut self.out_bias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{finite_diff, FD_EPSILON};
    use crate::testutil::{max_rel_err, random_vec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_half() {
        let m = Mlp::zeros(5, &[4, 3]);
        let (o, _) = m.forward(&[1.0, -2.0, 3.0, 0.5, 9.0]).unwrap();
        assert_eq!(o, 0.5);
    }

    #[test]
    fn dead_relu_path() {
        let mut m = Mlp::zeros(1, &[1]);
        m.set_hidden_weight(0, 0, 0, 1.0);
        m.output_weight_mut()[0] = 1.0;
        m.set_output_bias(0.7);
        let (o, cache) = m.forward(&[-5.0]).unwrap();
        assert_eq!(o, sigmoid(0.7));
        assert!(cache.pre_activations().all(|z| z == -5.0));
    }

    #[test]
    fn shape_mismatch() {
        let m = Mlp::zeros(3, &[2]);
        assert!(m.forward(&[1.0, 2.0]).is_err());
        let (_, cache) = m.forward(&[1.0, 2.0, 3.0]).unwrap();
        let other = Mlp::zeros(3, &[2, 2]);
        let mut g = other.zeros_like();
        assert!(other.backward(&cache, 1.0, &mut g).is_err());
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Mlp::init(4, &[5, 3], &mut rng);
        let (_, cache) = m.forward(&[0.1, 0.2, -0.3, 0.4]).unwrap();
        let mut g = m.zeros_like();
        let gi = m.backward(&cache, 0.0, &mut g).unwrap();
        assert!(gi.iter().all(|&v| v == 0.0));
        assert!(g.flat_params().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_head_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = Mlp::init(3, &[], &mut rng);
        let x = [0.4, -1.2, 0.9];
        let (o, cache) = m.forward(&x).unwrap();
        let mut g = m.zeros_like();
        m.backward(&cache, 0.8, &mut g).unwrap();
        let factor = 0.8 * o * (1.0 - o);
        for (gw, xi) in g.output_weight().iter().zip(&x) {
            assert!((gw - factor * xi).abs() <= 1e-15);
        }
        assert!((g.output_bias() - factor).abs() <= 1e-15);
    }

    #[test]
    fn hidden_activations_nonnegative_and_output_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Mlp::init(6, &[8, 8], &mut rng);
        for _ in 0..50 {
            let x = random_vec(&mut rng, 6, 3.0);
            let (o, cache) = m.forward(&x).unwrap();
            assert!(o > 0.0 && o < 1.0);
            for h in &cache.inputs[1..] {
                assert!(h.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut checked = 0;
        while checked < 10 {
            let input_dim = rng.gen_range(1..6);
            let widths: Vec<usize> = (0..rng.gen_range(0..3)).map(|_| rng.gen_range(1..6)).collect();
            let mut m = Mlp::zeros(input_dim, &widths);
            let flat = random_vec(&mut rng, m.num_params(), 1.0);
            m.set_flat_params(&flat).unwrap();
            let x = random_vec(&mut rng, input_dim, 1.0);
            let (_, cache) = m.forward(&x).unwrap();
            if cache.pre_activations().any(|z| z.abs() < 1e-4) {
                continue;
            }
            let mut g = m.zeros_like();
            let gx = m.backward(&cache, 1.0, &mut g).unwrap();
            let fd_p = finite_diff(
                |p| {
                    let mut mm = m.clone();
                    mm.set_flat_params(p).unwrap();
                    mm.forward(&x).unwrap().0
                },
                &flat,
                FD_EPSILON,
            )
            .unwrap();
            assert!(max_rel_err(&g.flat_params(), &fd_p) < 1e-6);
            let fd_x = finite_diff(|xx| m.forward(xx).unwrap().0, &x, FD_EPSILON).unwrap();
            assert!(max_rel_err(&gx, &fd_x) < 1e-6);
            checked += 1;
        }
    }
}
