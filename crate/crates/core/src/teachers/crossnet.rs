//! Cross network with full-matrix cross layers.
//!
//! With `x_0` the concatenated embeddings (`n = m d` values), each layer computes
//! `x_{t+1} = x_0 ⊙ (x_t M_t + b_t) + x_t`, and a linear head reads `x_l`.
//! `M_t` acts on row vectors, so it is the transpose of the usual `W_t`.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::network::Network;
use crate::numcore::{dot, dot_w, vec_mat, Grads, ParamStore, Scalar, Tensor};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossNetSpec {
    pub fields: usize,
    pub dim: usize,
    pub depth: usize,
}

#[derive(Debug, Clone)]
pub struct CrossNet {
    spec: CrossNetSpec,
    weights: Vec<String>,
    biases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossCache<S = f64> {
    /// `xs[t]` is `x_t`; `xs[0]` is the input.
    pub xs: Vec<Vec<S>>,
    /// `us[t] = x_t M_t + b_t`.
    pub us: Vec<Vec<S>>,
}

pub const CROSS_HEAD_W: &str = "cross.head.w";
pub const CROSS_HEAD_B: &str = "cross.head.b";

impl CrossNet {
    pub fn new(spec: CrossNetSpec) -> Result<Self> {
        if spec.fields < 1 || spec.dim < 1 || spec.depth < 1 {
            return Err(config_err(format!(
                "invalid cross network {spec:?}: depth >= 1 required"
            )));
        }
        Ok(Self {
            weights: (0..spec.depth).map(|t| format!("cross.w.{t}")).collect(),
            biases: (0..spec.depth).map(|t| format!("cross.b.{t}")).collect(),
            spec,
        })
    }

    pub fn spec(&self) -> &CrossNetSpec {
        &self.spec
    }

    fn width(&self) -> usize {
        self.spec.fields * self.spec.dim
    }
}

impl Network for CrossNet {
    type Cache<S: Scalar> = CrossCache<S>;

    fn num_fields(&self) -> usize {
        self.spec.fields
    }

    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn register(&self, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<()> {
        let n = self.width();
        let normal = Normal::new(0.0, 1.0 / (n as f64).sqrt()).expect("valid std");
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let data = (0..n * n).map(|_| normal.sample(rng)).collect();
            store.insert(w.clone(), Tensor::new(vec![n, n], data)?)?;
            store.insert(b.clone(), Tensor::zeros(&[n]))?;
        }
        store.insert(CROSS_HEAD_W, Tensor::zeros(&[n]))?;
        store.insert(CROSS_HEAD_B, Tensor::zeros(&[1]))?;
        Ok(())
    }

    fn forward<S: Scalar>(&self, store: &ParamStore, emb: &[S]) -> (S, CrossCache<S>) {
        let n = self.width();
        let mut xs = vec![emb.to_vec()];
        let mut us = Vec::with_capacity(self.spec.depth);
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let x = xs.last().expect("non-empty");
            let mut u = vec![emb[0]; n];
            vec_mat(x, store.data(w), n, &mut u);
            for (ui, &bi) in u.iter_mut().zip(store.data(b)) {
                *ui = *ui + S::from_f64(bi);
            }
            let next = (0..n).map(|k| emb[k] * u[k] + x[k]).collect();
            us.push(u);
            xs.push(next);
        }
        let out = xs.last().expect("non-empty");
        let logit = dot_w(out, store.data(CROSS_HEAD_W)) + S::from_f64(store.data(CROSS_HEAD_B)[0]);
        (logit, CrossCache { xs, us })
    }

    fn backward(
        &self,
        store: &ParamStore,
        emb: &[f64],
        cache: &CrossCache<f64>,
        dlogit: f64,
        grads: &mut Grads,
        demb: &mut [f64],
    ) {
        let n = self.width();
        let depth = self.spec.depth;
        for (g, &x) in grads.buf(CROSS_HEAD_W).iter_mut().zip(&cache.xs[depth]) {
            *g += dlogit * x;
        }
        grads.buf(CROSS_HEAD_B)[0] += dlogit;
        let mut dx: Vec<f64> = store.data(CROSS_HEAD_W).iter().map(|&w| dlogit * w).collect();
        let mut du = vec![0.0; n];
        for t in (0..depth).rev() {
            let x = &cache.xs[t];
            let u = &cache.us[t];
            for k in 0..n {
                du[k] = dx[k] * emb[k];
                demb[k] += dx[k] * u[k];
            }
            let m = store.data(&self.weights[t]);
            {
                let gm = grads.buf(&self.weights[t]);
                for r in 0..n {
                    let xr = x[r];
                    if xr != 0.0 {
                        for (g, &d) in gm[r * n..(r + 1) * n].iter_mut().zip(&du) {
                            *g += xr * d;
                        }
                    }
                }
            }
            for (g, &d) in grads.buf(&self.biases[t]).iter_mut().zip(&du) {
                *g += d;
            }
            for r in 0..n {
                dx[r] += dot(&m[r * n..(r + 1) * n], &du);
            }
        }
        for (g, &x) in demb.iter_mut().zip(&dx) {
            *g += x;
        }
    }

    fn param_count(&self) -> usize {
        let n = self.width();
        self.spec.depth * (n * n + n) + n + 1
    }

    fn flops(&self) -> u64 {
        let n = self.width() as u64;
        self.spec.depth as u64 * (2 * n * n + 2 * n) + 2 * n
    }
}
