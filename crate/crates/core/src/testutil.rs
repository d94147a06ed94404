use rand::Rng;

use crate::oracle::relative_error;

pub(crate) fn random_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Largest per-coordinate relative error, ignoring pairs that are both ~0.
pub(crate) fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .filter_map(|(&x, &y)| relative_error(x, y))
        .fold(0.0, f64::max)
}

pub(crate) fn assert_close_rel(a: &[f64], b: &[f64], tol: f64) {
    let err = max_rel_err(a, b);
    assert!(err <= tol, "max relative error {err:e} exceeds {tol:e}");
}
