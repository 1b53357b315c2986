//! Compressed interaction network.
//!
//! With `X^0` the `m × d` embedding matrix, layer `k` computes
//!
//! ```text
//! X^k_h = Σ_i Σ_j W^k_{h,i,j} (X^{k-1}_i ⊙ X^0_j)
//! ```
//!
//! Each layer's feature maps are sum pooled over `d`; the pooled values of all
//! layers feed a linear head.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::network::Network;
use crate::numcore::{axpy, dot, dot_w, sum, Grads, ParamStore, Scalar, Tensor};

pub const DEFAULT_CIN_LAYER_SIZE: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CinSpec {
    pub fields: usize,
    pub dim: usize,
    /// Feature-map counts `H_1..H_l`.
    pub layer_sizes: Vec<usize>,
}

impl CinSpec {
    pub fn uniform(fields: usize, dim: usize, depth: usize, size: usize) -> Self {
        Self {
            fields,
            dim,
            layer_sizes: vec![size; depth],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cin {
    spec: CinSpec,
    /// `H_0 = m, H_1, ..., H_l`.
    sizes: Vec<usize>,
    weights: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CinCache<S = f64> {
    /// `maps[k]` is `X^k` flattened as `[H_k, d]`.
    pub maps: Vec<Vec<S>>,
    /// `products[k]` is `Z^{k+1}` flattened as `[H_k, m, d]`.
    pub products: Vec<Vec<S>>,
    pub pooled: Vec<S>,
}

pub const CIN_HEAD_W: &str = "cin.head.w";
pub const CIN_HEAD_B: &str = "cin.head.b";

impl Cin {
    pub fn new(spec: CinSpec) -> Result<Self> {
        if spec.fields < 1 || spec.dim < 1 {
            return Err(config_err("CIN needs at least one field and d >= 1"));
        }
        if spec.layer_sizes.is_empty() || spec.layer_sizes.contains(&0) {
            return Err(config_err(format!(
                "CIN needs depth >= 1 with positive layer sizes, got {:?}",
                spec.layer_sizes
            )));
        }
        let mut sizes = vec![spec.fields];
        sizes.extend_from_slice(&spec.layer_sizes);
        let weights = (0..spec.layer_sizes.len()).map(|k| format!("cin.w.{k}")).collect();
        Ok(Self { spec, sizes, weights })
    }

    pub fn spec(&self) -> &CinSpec {
        &self.spec
    }

    fn pooled_len(&self) -> usize {
        self.spec.layer_sizes.iter().sum()
    }
}

impl Network for Cin {
    type Cache<S: Scalar> = CinCache<S>;

    fn num_fields(&self) -> usize {
        self.spec.fields
    }

    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn register(&self, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<()> {
        let m = self.spec.fields;
        for (k, name) in self.weights.iter().enumerate() {
            let (hp, h) = (self.sizes[k], self.sizes[k + 1]);
            let fan_in = (hp * m) as f64;
            let normal = Normal::new(0.0, 1.0 / fan_in.sqrt()).expect("valid std");
            let data = (0..h * hp * m).map(|_| normal.sample(rng)).collect();
            store.insert(name.clone(), Tensor::new(vec![h, hp, m], data)?)?;
        }
        store.insert(CIN_HEAD_W, Tensor::zeros(&[self.pooled_len()]))?;
        store.insert(CIN_HEAD_B, Tensor::zeros(&[1]))?;
        Ok(())
    }

    fn forward<S: Scalar>(&self, store: &ParamStore, emb: &[S]) -> (S, CinCache<S>) {
        let (m, d) = (self.spec.fields, self.spec.dim);
        let mut maps = vec![emb.to_vec()];
        let mut products = Vec::with_capacity(self.weights.len());
        let mut pooled = Vec::with_capacity(self.pooled_len());
        for (k, name) in self.weights.iter().enumerate() {
            let (hp, h) = (self.sizes[k], self.sizes[k + 1]);
            let prev = &maps[k];
            let mut z = Vec::with_capacity(hp * m * d);
            for i in 0..hp {
                let xi = &prev[i * d..(i + 1) * d];
                for j in 0..m {
                    z.extend(xi.iter().zip(&emb[j * d..(j + 1) * d]).map(|(&a, &b)| a * b));
                }
            }
            let w = store.data(name);
            let mut next = Vec::with_capacity(h * d);
            for hh in 0..h {
                let wh = &w[hh * hp * m..(hh + 1) * hp * m];
                let mut acc: Vec<S> = z[..d].iter().map(|&v| v * S::from_f64(wh[0])).collect();
                for (c, &wc) in wh.iter().enumerate().skip(1) {
                    let wc = S::from_f64(wc);
                    for (a, &v) in acc.iter_mut().zip(&z[c * d..(c + 1) * d]) {
                        *a = *a + v * wc;
                    }
                }
                pooled.push(sum(&acc));
                next.extend(acc);
            }
            products.push(z);
            maps.push(next);
        }
        let logit = dot_w(&pooled, store.data(CIN_HEAD_W)) + S::from_f64(store.data(CIN_HEAD_B)[0]);
        (logit, CinCache { maps, products, pooled })
    }

    fn backward(
        &self,
        store: &ParamStore,
        emb: &[f64],
        cache: &CinCache<f64>,
        dlogit: f64,
        grads: &mut Grads,
        demb: &mut [f64],
    ) {
        let (m, d) = (self.spec.fields, self.spec.dim);
        let head_w = store.data(CIN_HEAD_W);
        for (g, &p) in grads.buf(CIN_HEAD_W).iter_mut().zip(&cache.pooled) {
            *g += dlogit * p;
        }
        grads.buf(CIN_HEAD_B)[0] += dlogit;

        let layers = self.weights.len();
        let mut offset = self.pooled_len();
        // Gradient of the current layer's maps; starts at the last layer.
        let mut dmap = vec![0.0; self.sizes[layers] * d];
        for k in (0..layers).rev() {
            let (hp, h) = (self.sizes[k], self.sizes[k + 1]);
            offset -= h;
            for hh in 0..h {
                let g = dlogit * head_w[offset + hh];
                for x in &mut dmap[hh * d..(hh + 1) * d] {
                    *x += g;
                }
            }
            let z = &cache.products[k];
            let w = store.data(&self.weights[k]);
            let gw = grads.buf(&self.weights[k]);
            let mut dz = vec![0.0; hp * m * d];
            for hh in 0..h {
                let dx = &dmap[hh * d..(hh + 1) * d];
                let wh = &w[hh * hp * m..(hh + 1) * hp * m];
                let gh = &mut gw[hh * hp * m..(hh + 1) * hp * m];
                for c in 0..hp * m {
                    gh[c] += dot(dx, &z[c * d..(c + 1) * d]);
                    axpy(wh[c], dx, &mut dz[c * d..(c + 1) * d]);
                }
            }
            let prev = &cache.maps[k];
            let mut dprev = vec![0.0; hp * d];
            for i in 0..hp {
                for j in 0..m {
                    let dzc = &dz[(i * m + j) * d..(i * m + j + 1) * d];
                    for t in 0..d {
                        dprev[i * d + t] += dzc[t] * emb[j * d + t];
                        demb[j * d + t] += dzc[t] * prev[i * d + t];
                    }
                }
            }
            dmap = dprev;
        }
        for (g, &x) in demb.iter_mut().zip(&dmap) {
            *g += x;
        }
    }

    fn param_count(&self) -> usize {
        let m = self.spec.fields;
        self.sizes.windows(2).map(|w| w[1] * w[0] * m).sum::<usize>() + self.pooled_len() + 1
    }

    fn flops(&self) -> u64 {
        let (m, d) = (self.spec.fields as u64, self.spec.dim as u64);
        let layers: u64 = self
            .sizes
            .windows(2)
            .map(|w| {
                let (hp, h) = (w[0] as u64, w[1] as u64);
                hp * m * d + h * hp * m * d + h * (hp * m - 1) * d + h * (d - 1)
            })
            .sum();
        layers + 2 * self.pooled_len() as u64
    }
}
