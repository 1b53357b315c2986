use std::fmt::Debug;
use std::ops::{Add, Mul};

/// Arithmetic used by every forward pass.
///
/// Forward passes are written once against this trait. Training and inference
/// instantiate it with `f64`; FLOP accounting instantiates it with an
/// instrumented type that counts each `+` and `*`. Only `+` and `*` are
/// counted, so forward code never adds to a literal zero: accumulators start
/// from their first term.
pub trait Scalar: Copy + Debug + Add<Output = Self> + Mul<Output = Self> {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    /// `max(0, x)`; a comparison, not an arithmetic operation.
    fn relu(self) -> Self;
}

impl Scalar for f64 {
    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }

    #[inline(always)]
    fn relu(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
}

/// Sum of a non-empty slice: `n - 1` additions.
#[inline]
pub fn sum<S: Scalar>(xs: &[S]) -> S {
    let mut acc = xs[0];
    for &x in &xs[1..] {
        acc = acc + x;
    }
    acc
}

/// Dot product of equal-length slices with `f64` weights: `n` mults, `n - 1` adds.
#[inline]
pub fn dot_w<S: Scalar>(xs: &[S], w: &[f64]) -> S {
    let mut acc = xs[0] * S::from_f64(w[0]);
    for (&x, &wi) in xs[1..].iter().zip(&w[1..]) {
        acc = acc + x * S::from_f64(wi);
    }
    acc
}

/// `out = x · M` for a row vector `x` of length `n_in` and row-major `M` of
/// shape `[n_in, n_out]`: `n_in * n_out` mults, `(n_in - 1) * n_out` adds.
#[inline]
pub fn vec_mat<S: Scalar>(x: &[S], m: &[f64], n_out: usize, out: &mut [S]) {
    let x0 = x[0];
    for (o, &w) in out.iter_mut().zip(&m[..n_out]) {
        *o = x0 * S::from_f64(w);
    }
    for (r, &xr) in x.iter().enumerate().skip(1) {
        let row = &m[r * n_out..(r + 1) * n_out];
        for (o, &w) in out.iter_mut().zip(row) {
            *o = *o + xr * S::from_f64(w);
        }
    }
}

/// Plain `f64` dot product used by backward passes (not FLOP-accounted).
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn to_f64_vec<S: Scalar>(xs: &[S]) -> Vec<f64> {
    xs.iter().map(|x| x.to_f64()).collect()
}

pub fn from_f64_vec<S: Scalar>(xs: &[f64]) -> Vec<S> {
    xs.iter().map(|&x| S::from_f64(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vec_mat_matches_hand_product() {
        // [1, 2] · [[0, 1], [1, 0]] = [2, 1]
        let mut out = [0.0; 2];
        vec_mat(&[1.0, 2.0], &[0.0, 1.0, 1.0, 0.0], 2, &mut out);
        assert_eq!(out, [2.0, 1.0]);
    }

    #[test]
    fn chunked_dot_matches_naive() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..11).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }
}
