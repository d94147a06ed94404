//! Symbolic view of a bias-free cross stack.
//!
//! With zero biases the scalar chain of a cross stack collapses to a product
//! of linear forms, `s_L = Π_{i=0}^{L} <D, W^i>`. Expanding that product gives
//! a homogeneous polynomial of degree `L + 1` in the dense inputs.

use std::collections::BTreeMap;

use crate::error::{Result, XcnError};

/// Upper bound on the number of distinct monomials an expansion may produce.
pub const MAX_MONOMIALS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    /// Exponent of each dense field.
    pub exponents: Vec<u32>,
    pub coefficient: f64,
}

impl Monomial {
    pub fn order(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn evaluate(&self, dense: &[f64]) -> f64 {
        let mut v = self.coefficient;
        for (x, &e) in dense.iter().zip(&self.exponents) {
            v *= x.powi(e as i32);
        }
        v
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

fn check_weights(weights: &[Vec<f64>]) -> Result<usize> {
    let m = weights
        .first()
        .map(Vec::len)
        .ok_or(XcnError::Empty("cross polynomial needs at least one weight vector"))?;
    if m == 0 || weights.iter().any(|w| w.len() != m) {
        return Err(XcnError::InvalidConfig(
            "weight vectors must be non-empty and of equal length".into(),
        ));
    }
    Ok(m)
}

/// Expands `Π_i <D, W^i>` into monomials with combined coefficients, sorted by
/// exponent vector. `weights[i]` is `W^i`.
pub fn expand_cross_polynomial(weights: &[Vec<f64>]) -> Result<Vec<Monomial>> {
    let m = check_weights(weights)?;
    let degree = weights.len() as u64;
    let count = binomial(degree + m as u64 - 1, m as u64 - 1);
    if count > MAX_MONOMIALS as u64 {
        return Err(XcnError::InvalidConfig(format!(
            "expansion would produce {count} monomials (limit {MAX_MONOMIALS})"
        )));
    }

    let mut terms: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    terms.insert(vec![0; m], 1.0);
    for w in weights {
        let mut next: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (exps, coef) in &terms {
            for (j, &wj) in w.iter().enumerate() {
                let mut e = exps.clone();
                e[j] += 1;
                *next.entry(e).or_insert(0.0) += coef * wj;
            }
        }
        terms = next;
    }
    Ok(terms
        .into_iter()
        .map(|(exponents, coefficient)| Monomial { exponents, coefficient })
        .collect())
}

pub fn evaluate_polynomial(monomials: &[Monomial], dense: &[f64]) -> f64 {
    monomials.iter().map(|t| t.evaluate(dense)).sum()
}

/// The coefficient formula
///
/// ```text
/// Ŵ_α = Σ_{k=1}^{M} Σ_{|I| = α_k} Π_{j=1}^{M} W_j^{I_j}
/// ```
///
/// evaluated literally: `I` ranges over vectors in `{0, …, L}^M` (one layer
/// index per field) whose entries sum to `α_k`, and `W_j^{I_j}` is field `j`
/// of weight vector `I_j`. This does *not* in general agree with the
/// coefficients of [`expand_cross_polynomial`]; see
/// [`compare_coefficient_formulas`].
pub fn indexed_sum_coefficient(weights: &[Vec<f64>], alpha: &[i64]) -> Result<f64> {
    let m = check_weights(weights)?;
    if alpha.len() != m {
        return Err(XcnError::DimensionMismatch {
            context: "indexed_sum_coefficient alpha",
            expected: m,
            actual: alpha.len(),
        });
    }
    if alpha.iter().any(|&a| a < 0) {
        return Err(XcnError::InvalidConfig("multi-index entries must be non-negative".into()));
    }
    let order: i64 = alpha.iter().sum();
    if order != weights.len() as i64 {
        return Err(XcnError::InvalidConfig(format!(
            "multi-index order {order} differs from polynomial degree {}",
            weights.len()
        )));
    }

    let max_layer = weights.len() - 1;
    let mut total = 0.0;
    for &target in alpha {
        let mut index = vec![0usize; m];
        total += sum_over_indices(weights, max_layer, target as usize, 0, &mut index);
    }
    Ok(total)
}

fn sum_over_indices(
    weights: &[Vec<f64>],
    max_layer: usize,
    remaining: usize,
    field: usize,
    index: &mut [usize],
) -> f64 {
    let m = index.len();
    if field == m {
        if remaining != 0 {
            return 0.0;
        }
        return (0..m).map(|j| weights[index[j]][j]).product();
    }
    let mut acc = 0.0;
    for layer in 0..=max_layer.min(remaining) {
        index[field] = layer;
        acc += sum_over_indices(weights, max_layer, remaining - layer, field + 1, index);
    }
    acc
}

/// One multi-index compared under both coefficient definitions.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFinding {
    pub alpha: Vec<u32>,
    pub expansion: f64,
    pub indexed_sum: f64,
}

impl CoefficientFinding {
    pub fn agrees(&self, tol: f64) -> bool {
        (self.expansion - self.indexed_sum).abs() <= tol * self.expansion.abs().max(1.0)
    }
}

/// Compares every multi-index of the expansion against the indexed-sum formula.
pub fn compare_coefficient_formulas(weights: &[Vec<f64>]) -> Result<Vec<CoefficientFinding>> {
    expand_cross_polynomial(weights)?
        .into_iter()
        .map(|mono| {
            let alpha: Vec<i64> = mono.exponents.iter().map(|&e| e as i64).collect();
            Ok(CoefficientFinding {
                indexed_sum: indexed_sum_coefficient(weights, &alpha)?,
                expansion: mono.coefficient,
                alpha: mono.exponents,
            })
        })
        .collect()
}
