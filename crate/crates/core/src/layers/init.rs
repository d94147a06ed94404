use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Standard deviation used for cross weights, embeddings, Θ and order-1 weights.
pub const SMALL_NORMAL_STD: f64 = 0.01;

pub(crate) fn fill_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64], std: f64) {
    let dist = Normal::new(0.0, std).expect("finite positive std");
    for v in out {
        *v = dist.sample(rng);
    }
}

/// Glorot/Xavier uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
pub(crate) fn fill_glorot_uniform<R: Rng + ?Sized>(
    rng: &mut R,
    out: &mut [f64],
    fan_in: usize,
    fan_out: usize,
) {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in out {
        *v = rng.gen_range(-a..a);
    }
}
