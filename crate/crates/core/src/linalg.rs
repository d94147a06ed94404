//! Dense vector and matrix arithmetic over `f64`.
//!
//! Every reduction accumulates in ascending index order so that reruns are
//! bit-stable. Vectors are plain slices; [`Mat64`] is a row-major matrix used
//! by the reference paths in [`crate::oracle`].

use crate::error::{check_len, Result};

/// Inner product, summed left to right.
pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len("dot", a.len(), b.len())?;
    Ok(dot_unchecked(a, b))
}

#[inline]
pub(crate) fn dot_unchecked(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Returns `alpha * x + y`.
pub fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_len("axpy", y.len(), x.len())?;
    Ok(x.iter().zip(y).map(|(xi, yi)| alpha * xi + yi).collect())
}

/// `y += alpha * x` in place. Each element of `y` sees exactly one update, so
/// the loop vectorizes without changing any accumulation order.
#[inline]
pub(crate) fn axpy_into(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `y += x` in place.
#[inline]
pub(crate) fn add_into(x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi;
    }
}

/// Squared Euclidean norm.
pub fn norm_sq(a: &[f64]) -> f64 {
    dot_unchecked(a, a)
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat64 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat64 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("Mat64::from_row_major", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Matrix-vector product `self · w`.
    pub fn matvec(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len("Mat64::matvec", self.cols, w.len())?;
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(w) {
                acc += a * b;
            }
            out.push(acc);
        }
        Ok(out)
    }
}

/// Outer product `a · bᵀ`.
pub fn outer(a: &[f64], b: &[f64]) -> Mat64 {
    let mut data = Vec::with_capacity(a.len() * b.len());
    for &ai in a {
        data.extend(b.iter().map(|&bj| ai * bj));
    }
    Mat64 {
        rows: a.len(),
        cols: b.len(),
        data,
    }
}
