//! Pairwise interaction learning functions.
//!
//! The `*_into` forms write into a caller buffer and are what the models use;
//! the checked forms validate shapes and allocate.

use crate::error::{shape_err, Result};
use crate::numcore::Scalar;

/// `out = a ⊙ b`. Cost: `d` mults.
#[inline]
pub fn phi_basic_inner_into<S: Scalar>(a: &[S], b: &[S], out: &mut [S]) {
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = x * y;
    }
}

/// `out = w ⊙ a ⊙ b`, evaluated as `(w ⊙ a) ⊙ b`. Cost: `2d` mults.
#[inline]
pub fn phi_inner_into<S: Scalar>(a: &[S], b: &[S], w: &[f64], out: &mut [S]) {
    for (((o, &x), &y), &wk) in out.iter_mut().zip(a).zip(b).zip(w) {
        *o = S::from_f64(wk) * x * y;
    }
}

/// `out = (a W) ⊙ b` with row-major `W` of shape `[d, d]`. Cost: `2d²`.
#[inline]
pub fn phi_kernel_into<S: Scalar>(a: &[S], b: &[S], w: &[f64], out: &mut [S]) {
    let d = a.len();
    crate::numcore::vec_mat(a, w, d, out);
    for (o, &y) in out.iter_mut().zip(b) {
        *o = *o * y;
    }
}

/// `out = (a · p) (q ⊙ b)`, the rank-one factorization of the kernel
/// function with `W = pᵀ q`. Cost: `4d - 1`.
#[inline]
pub fn phi_outer_into<S: Scalar>(a: &[S], b: &[S], p: &[f64], q: &[f64], out: &mut [S]) {
    let s = crate::numcore::dot_w(a, p);
    for ((o, &y), &qk) in out.iter_mut().zip(b).zip(q) {
        *o = s * (S::from_f64(qk) * y);
    }
}

fn same_len(what: &str, lens: &[usize]) -> Result<usize> {
    let d = lens[0];
    if lens.iter().any(|&l| l != d) {
        return Err(shape_err(format!("{what}: inconsistent lengths {lens:?}")));
    }
    if d == 0 {
        return Err(shape_err(format!("{what}: empty vectors")));
    }
    Ok(d)
}

pub fn phi_basic_inner(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let d = same_len("basic inner", &[a.len(), b.len()])?;
    let mut out = vec![0.0; d];
    phi_basic_inner_into(a, b, &mut out);
    Ok(out)
}

pub fn phi_inner(a: &[f64], b: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let d = same_len("inner", &[a.len(), b.len(), w.len()])?;
    let mut out = vec![0.0; d];
    phi_inner_into(a, b, w, &mut out);
    Ok(out)
}

/// `w` is the row-major `d × d` kernel.
pub fn phi_kernel(a: &[f64], b: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let d = same_len("kernel", &[a.len(), b.len()])?;
    if w.len() != d * d {
        return Err(shape_err(format!(
            "kernel: matrix has {} values, need {}",
            w.len(),
            d * d
        )));
    }
    let mut out = vec![0.0; d];
    phi_kernel_into(a, b, w, &mut out);
    Ok(out)
}

pub fn phi_outer(a: &[f64], b: &[f64], p: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    let d = same_len("outer", &[a.len(), b.len(), p.len(), q.len()])?;
    let mut out = vec![0.0; d];
    phi_outer_into(a, b, p, q, &mut out);
    Ok(out)
}

/// Row-major `pᵀ q`, the kernel matrix an outer edge represents.
pub fn outer_as_kernel(p: &[f64], q: &[f64]) -> Vec<f64> {
    p.iter().flat_map(|&pr| q.iter().map(move |&qc| pr * qc)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity(d: usize) -> Vec<f64> {
        (0..d * d).map(|k| if k / d == k % d { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn basic_inner_examples() {
        assert_eq!(phi_basic_inner(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), [3.0, 8.0]);
        assert_eq!(phi_basic_inner(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), [0.0, 0.0]);
        assert!(phi_basic_inner(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn inner_examples() {
        assert_eq!(phi_inner(&[1.0, 2.0], &[3.0, 4.0], &[0.0, 1.0]).unwrap(), [0.0, 8.0]);
        assert!(phi_inner(&[1.0, 2.0], &[3.0, 4.0], &[1.0]).is_err());
    }

    #[test]
    fn kernel_examples() {
        let out = phi_kernel(&[1.0, 2.0], &[3.0, 4.0], &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(out, [6.0, 4.0]);
        assert!(phi_kernel(&[1.0, 2.0], &[3.0, 4.0], &[1.0; 3]).is_err());
    }

    #[test]
    fn outer_examples() {
        let out = phi_outer(&[1.0, 2.0], &[3.0, 4.0], &[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(out, [3.0, 4.0]);
        let zero = phi_outer(&[1.0, 2.0], &[3.0, 4.0], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(zero, [0.0, 0.0]);
    }

    fn vecs(d: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, d)
    }

    proptest! {
        #[test]
        fn basic_inner_commutes((a, b) in (1usize..6).prop_flat_map(|d| (vecs(d), vecs(d)))) {
            prop_assert_eq!(phi_basic_inner(&a, &b).unwrap(), phi_basic_inner(&b, &a).unwrap());
        }

        #[test]
        fn degeneracy_chain_is_bitwise((a, b) in (1usize..6).prop_flat_map(|d| (vecs(d), vecs(d)))) {
            let d = a.len();
            let basic = phi_basic_inner(&a, &b).unwrap();
            let inner = phi_inner(&a, &b, &vec![1.0; d]).unwrap();
            let kernel = phi_kernel(&a, &b, &identity(d)).unwrap();
            for k in 0..d {
                prop_assert_eq!(basic[k].to_bits(), inner[k].to_bits());
                prop_assert_eq!(basic[k].to_bits(), kernel[k].to_bits());
            }
        }

        #[test]
        fn inner_is_homogeneous_in_weights((a, b, w) in (1usize..6).prop_flat_map(|d| (vecs(d), vecs(d), vecs(d)))) {
            let w2: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
            let one = phi_inner(&a, &b, &w).unwrap();
            let two = phi_inner(&a, &b, &w2).unwrap();
            for (x, y) in one.iter().zip(&two) {
                prop_assert!((2.0 * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn diagonal_kernel_is_inner((a, b, w) in (1usize..6).prop_flat_map(|d| (vecs(d), vecs(d), vecs(d)))) {
            let d = a.len();
            let mut diag = vec![0.0; d * d];
            for k in 0..d { diag[k * d + k] = w[k]; }
            let k = phi_kernel(&a, &b, &diag).unwrap();
            let i = phi_inner(&a, &b, &w).unwrap();
            for (x, y) in k.iter().zip(&i) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn outer_is_rank_one_kernel((a, b, p, q) in (1usize..6).prop_flat_map(|d| (vecs(d), vecs(d), vecs(d), vecs(d)))) {
            let o = phi_outer(&a, &b, &p, &q).unwrap();
            let k = phi_kernel(&a, &b, &outer_as_kernel(&p, &q)).unwrap();
            for (x, y) in o.iter().zip(&k) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }
}
