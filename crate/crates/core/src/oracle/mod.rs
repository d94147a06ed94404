//! Brute-force reference computations.
//!
//! Nothing here calls into the fast layer paths' arithmetic: the cross
//! references materialize full outer-product matrices, the product reference
//! runs the unfactored double sum, and gradients come from central
//! differences. These are the ground truth the fast paths are tested against.

mod logistic;
mod polynomial;

pub use logistic::{lr_baseline_auc, LogisticRegression, LrBaselineConfig};
pub use polynomial::{
    compare_coefficient_formulas, evaluate_polynomial, expand_cross_polynomial, indexed_sum_coefficient,
    CoefficientFinding, Monomial,
};

use crate::error::{check_len, Result, XcnError};
use crate::layers::{ConcatCross, CrossStack};
use crate::linalg::outer;
use crate::params::Parameterized;

/// Central-difference step used by every gradient check.
pub const FD_EPSILON: f64 = 1e-5;

/// Pairs with both magnitudes below this are treated as agreeing zeros.
pub const GRAD_ZERO_FLOOR: f64 = 1e-10;

/// `|a - b| / max(|a|, |b|)`, or `None` when both are below [`GRAD_ZERO_FLOOR`].
pub fn relative_error(a: f64, b: f64) -> Option<f64> {
    let scale = a.abs().max(b.abs());
    if scale < GRAD_ZERO_FLOOR {
        None
    } else {
        Some((a - b).abs() / scale)
    }
}

/// A copy of `p` with every parameter replaced by its absolute value.
///
/// Evaluating a reference forward pass on `abs_params` and `|inputs|` gives
/// the magnitude of each output's summands, the natural scale for rounding
/// error when the signed terms cancel.
pub fn abs_params<P: Parameterized + Clone>(p: &P) -> P {
    let mut q = p.clone();
    q.visit_params_mut(&mut |_, s| s.iter_mut().for_each(|v| *v = v.abs()));
    q
}

/// `max_i |a_i - b_i| / scale_i`, where `scale_i` is the summand magnitude of
/// output `i` (see [`abs_params`]). Zero-scale entries must agree exactly.
pub fn max_scaled_error(a: &[f64], b: &[f64], scale: &[f64]) -> Result<f64> {
    check_len("max_scaled_error", a.len(), b.len())?;
    check_len("max_scaled_error scale", a.len(), scale.len())?;
    let mut worst: f64 = 0.0;
    for ((&x, &y), &s) in a.iter().zip(b).zip(scale) {
        let diff = (x - y).abs();
        if s > 0.0 {
            worst = worst.max(diff / s);
        } else if diff > 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    Ok(worst)
}

/// Central differences `(f(θ + εe_i) − f(θ − εe_i)) / 2ε` for every coordinate.
pub fn finite_diff<F>(mut f: F, theta: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let plus = f(&probe);
        probe[i] = orig - eps;
        let minus = f(&probe);
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(XcnError::NonFinite(format!("objective at coordinate {i}")));
        }
        grad.push((plus - minus) / (2.0 * eps));
    }
    Ok(grad)
}

/// Cross stack computed literally: `C_{l+1} = (D · C_lᵀ) · W_l + b_l` with the
/// M×M matrix formed explicitly.
pub fn naive_cross_forward(dense: &[f64], stack: &CrossStack) -> Result<Vec<f64>> {
    check_len("naive_cross_forward", stack.dim(), dense.len())?;
    let mut out = dense.to_vec();
    let mut prev = dense.to_vec();
    for l in 0..stack.depth() {
        let m = outer(dense, &prev);
        let mut next = m.matvec(stack.weight(l))?;
        for (v, b) in next.iter_mut().zip(stack.bias(l)) {
            *v += b;
        }
        out.extend_from_slice(&next);
        prev = next;
    }
    Ok(out)
}

/// Concatenation cross layer with `X_0 · X_0ᵀ` materialized.
pub fn naive_concat_cross_forward(dense_cross: &[f64], sparse_cross: &[f64], layer: &ConcatCross) -> Result<Vec<f64>> {
    let x0: Vec<f64> = dense_cross.iter().chain(sparse_cross).copied().collect();
    check_len("naive_concat_cross_forward", layer.dim(), x0.len())?;
    let mut x1 = outer(&x0, &x0).matvec(layer.weight())?;
    for (v, b) in x1.iter_mut().zip(layer.bias()) {
        *v += b;
    }
    Ok(x0.into_iter().chain(x1).collect())
}

/// Order-2 product output for one unit as the unfactored double sum
/// `Σ_i Σ_j Θ_i Θ_j <E_i, E_j>`. `embeddings` is `[E_1; …; E_N]`.
pub fn naive_product_p2(embeddings: &[f64], emb_dim: usize, theta: &[f64]) -> Result<f64> {
    let n = theta.len();
    check_len("naive_product_p2", n * emb_dim, embeddings.len())?;
    let mut total = 0.0;
    for i in (0..n).rev() {
        for j in (0..n).rev() {
            let w2 = theta[i] * theta[j];
            let mut inner = 0.0;
            for c in (0..emb_dim).rev() {
                inner += embeddings[i * emb_dim + c] * embeddings[j * emb_dim + c];
            }
            total += w2 * inner;
        }
    }
    Ok(total)
}

/// AUC as the fraction of (positive, negative) pairs ranked correctly, with
/// ties counted as one half. O(n_pos · n_neg).
pub fn pairwise_auc(preds: &[f64], labels: &[u8]) -> Result<f64> {
    check_len("pairwise_auc", preds.len(), labels.len())?;
    let pos: Vec<f64> = preds.iter().zip(labels).filter(|(_, &y)| y == 1).map(|(&p, _)| p).collect();
    let neg: Vec<f64> = preds.iter().zip(labels).filter(|(_, &y)| y != 1).map(|(&p, _)| p).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(XcnError::Undefined("AUC needs both classes"));
    }
    let mut wins = 0.0;
    for &p in &pos {
        for &q in &neg {
            if p > q {
                wins += 1.0;
            } else if p == q {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (pos.len() as f64 * neg.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn finite_diff_on_known_functions() {
        let theta = [0.3, -1.7, 2.5, 0.0];
        let g = finite_diff(|t| 0.5 * t.iter().map(|x| x * x).sum::<f64>(), &theta, FD_EPSILON).unwrap();
        for (gi, ti) in g.iter().zip(&theta) {
            assert!((gi - ti).abs() < 1e-9);
        }
        let c = [1.5, -2.0, 0.25, 4.0];
        let g = finite_diff(|t| t.iter().zip(&c).map(|(a, b)| a * b).sum(), &theta, FD_EPSILON).unwrap();
        for (gi, ci) in g.iter().zip(&c) {
            assert!((gi - ci).abs() < 1e-9);
        }
    }

    #[test]
    fn finite_diff_rejects_non_finite() {
        let r = finite_diff(|t| if t[0] > 0.0 { f64::NAN } else { 0.0 }, &[0.0], FD_EPSILON);
        assert!(matches!(r, Err(XcnError::NonFinite(_))));
    }

    #[test]
    fn naive_cross_worked_example() {
        let mut s = CrossStack::zeros(2, 1);
        s.weight_mut(0).copy_from_slice(&[1.0, 1.0]);
        assert_eq!(naive_cross_forward(&[1.0, 2.0], &s).unwrap(), vec![1.0, 2.0, 3.0, 6.0]);
        let z = CrossStack::zeros(2, 3);
        assert_eq!(naive_cross_forward(&[1.0, 2.0], &z).unwrap(), vec![1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn naive_p2_cases() {
        assert_eq!(naive_product_p2(&[2.0, 3.0], 1, &[1.0, 1.0]).unwrap(), 25.0);
        let e = [1.0, 2.0, -3.0, 0.5];
        // Θ one-hot at field 1 leaves <E_1, E_1> only.
        assert_eq!(naive_product_p2(&e, 2, &[0.0, 1.0]).unwrap(), 9.25);
        assert!(naive_product_p2(&e, 3, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn pairwise_auc_cases() {
        assert_eq!(pairwise_auc(&[0.9, 0.1], &[1, 0]).unwrap(), 1.0);
        assert_eq!(pairwise_auc(&[0.8, 0.5, 0.3], &[1, 0, 1]).unwrap(), 0.5);
        assert_eq!(pairwise_auc(&[0.4; 5], &[1, 0, 1, 0, 0]).unwrap(), 0.5);
        assert!(pairwise_auc(&[0.1, 0.2], &[1, 1]).is_err());
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1e-12, -1e-12), None);
        assert_eq!(relative_error(2.0, 1.0), Some(0.5));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x: f64 = rng.gen_range(1.0..2.0);
        assert_eq!(relative_error(x, x), Some(0.0));
    }
}
