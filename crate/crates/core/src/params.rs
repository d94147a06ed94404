//! Named, ordered access to every trainable value of a model.
//!
//! Gradient containers are values of the same type as the parameters they
//! describe (see `zeros_like` on each layer), so a parameter set and its
//! gradient always enumerate their groups in the same order.

use crate::error::{check_len, Result};

pub trait Parameterized {
    /// Visits each parameter group in registry order.
    fn visit_params(&self, f: &mut dyn FnMut(&str, &[f64]));

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64]));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, s| n += s.len());
        n
    }

    fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit_params(&mut |_, s| out.extend_from_slice(s));
        out
    }

    fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        check_len("set_flat_params", self.num_params(), flat.len())?;
        let mut offset = 0;
        self.visit_params_mut(&mut |_, s| {
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        });
        Ok(())
    }

    fn fill_zero(&mut self) {
        self.visit_params_mut(&mut |_, s| s.fill(0.0));
    }

    /// Multiplies every value by `factor`.
    fn scale(&mut self, factor: f64) {
        self.visit_params_mut(&mut |_, s| s.iter_mut().for_each(|v| *v *= factor));
    }

    /// `(name, len)` for every group, in order.
    fn group_layout(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        self.visit_params(&mut |name, s| out.push((name.to_string(), s.len())));
        out
    }
}

/// Runs `f` on `inner`'s groups with `prefix.` prepended to every name.
pub(crate) fn visit_prefixed<P: Parameterized + ?Sized>(
    prefix: &str,
    inner: &P,
    f: &mut dyn FnMut(&str, &[f64]),
) {
    inner.visit_params(&mut |name, s| f(&format!("{prefix}.{name}"), s));
}

pub(crate) fn visit_prefixed_mut<P: Parameterized + ?Sized>(
    prefix: &str,
    inner: &mut P,
    f: &mut dyn FnMut(&str, &mut [f64]),
) {
    inner.visit_params_mut(&mut |name, s| f(&format!("{prefix}.{name}"), s));
}
