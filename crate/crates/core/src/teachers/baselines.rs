//! Shallow comparison students: field-weighted (FwFM), field-matrixed (FmFM)
//! factorization machines and a small ReLU MLP.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::interactions::mlp::{Mlp, MlpCache};
use crate::interactions::phi::{phi_inner_into, phi_kernel_into};
use crate::network::Network;
use crate::numcore::{dot, dot_w, sum, vec_mat, Grads, ParamStore, Scalar, Tensor};

pub const TINY_MLP_HIDDEN: [usize; 3] = [128, 128, 128];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairwiseKind {
    Fwfm,
    Fmfm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseSpec {
    pub fields: usize,
    pub dim: usize,
    pub kind: PairwiseKind,
}

/// `logit = b + Σ_i v_i · e_i + Σ_{i<j} pool(φ(e_i, e_j))`, with a weight
/// vector (FwFM) or matrix (FmFM) per field pair.
#[derive(Debug, Clone)]
pub struct Pairwise {
    spec: PairwiseSpec,
    pairs: Vec<(usize, usize)>,
    weight: String,
    linear: String,
    bias: String,
}

impl Pairwise {
    pub fn new(spec: PairwiseSpec) -> Result<Self> {
        if spec.fields < 2 || spec.dim < 1 {
            return Err(config_err(format!("invalid pairwise model {spec:?}")));
        }
        let pairs = (0..spec.fields)
            .flat_map(|i| (i + 1..spec.fields).map(move |j| (i, j)))
            .collect();
        let prefix = match spec.kind {
            PairwiseKind::Fwfm => "fwfm",
            PairwiseKind::Fmfm => "fmfm",
        };
        Ok(Self {
            spec,
            pairs,
            weight: format!("{prefix}.w"),
            linear: format!("{prefix}.linear"),
            bias: format!("{prefix}.b"),
        })
    }

    pub fn spec(&self) -> &PairwiseSpec {
        &self.spec
    }

    pub fn weight_name(&self) -> &str {
        &self.weight
    }

    pub fn linear_name(&self) -> &str {
        &self.linear
    }

    pub fn bias_name(&self) -> &str {
        &self.bias
    }

    fn edge_len(&self) -> usize {
        match self.spec.kind {
            PairwiseKind::Fwfm => self.spec.dim,
            PairwiseKind::Fmfm => self.spec.dim * self.spec.dim,
        }
    }
}

impl Network for Pairwise {
    type Cache<S: Scalar> = ();

    fn num_fields(&self) -> usize {
        self.spec.fields
    }

    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn register(&self, store: &mut ParamStore, _rng: &mut ChaCha8Rng) -> Result<()> {
        let (p, d) = (self.pairs.len(), self.spec.dim);
        let w = match self.spec.kind {
            PairwiseKind::Fwfm => Tensor::filled(&[p, d], 1.0),
            PairwiseKind::Fmfm => {
                let mut w = Tensor::zeros(&[p, d, d]);
                for e in 0..p {
                    for k in 0..d {
                        w.data_mut()[e * d * d + k * d + k] = 1.0;
                    }
                }
                w
            }
        };
        store.insert(self.weight.clone(), w)?;
        store.insert(self.linear.clone(), Tensor::zeros(&[self.spec.fields, d]))?;
        store.insert(self.bias.clone(), Tensor::zeros(&[1]))?;
        Ok(())
    }

    fn forward<S: Scalar>(&self, store: &ParamStore, emb: &[S]) -> (S, ()) {
        let (m, d) = (self.spec.fields, self.spec.dim);
        let w = store.data(&self.weight);
        let el = self.edge_len();
        let mut acc = emb[..d].to_vec();
        let mut tmp = emb[..d].to_vec();
        for (e, &(i, j)) in self.pairs.iter().enumerate() {
            let out = if e == 0 { &mut acc } else { &mut tmp };
            let (a, b) = (&emb[i * d..(i + 1) * d], &emb[j * d..(j + 1) * d]);
            let we = &w[e * el..(e + 1) * el];
            match self.spec.kind {
                PairwiseKind::Fwfm => phi_inner_into(a, b, we, out),
                PairwiseKind::Fmfm => phi_kernel_into(a, b, we, out),
            }
            if e > 0 {
                for (x, &y) in acc.iter_mut().zip(&tmp) {
                    *x = *x + y;
                }
            }
        }
        let pair_term = sum(&acc);
        let v = store.data(&self.linear);
        let mut linear = dot_w(&emb[..d], &v[..d]);
        for f in 1..m {
            linear = linear + dot_w(&emb[f * d..(f + 1) * d], &v[f * d..(f + 1) * d]);
        }
        let logit = pair_term + linear + S::from_f64(store.data(&self.bias)[0]);
        (logit, ())
    }

    fn backward(&self, store: &ParamStore, emb: &[f64], _cache: &(), dlogit: f64, grads: &mut Grads, demb: &mut [f64]) {
        let d = self.spec.dim;
        let w = store.data(&self.weight);
        let el = self.edge_len();
        {
            let gw = grads.buf(&self.weight);
            let mut u = vec![0.0; d];
            for (e, &(i, j)) in self.pairs.iter().enumerate() {
                let (a, b) = (&emb[i * d..(i + 1) * d], &emb[j * d..(j + 1) * d]);
                let we = &w[e * el..(e + 1) * el];
                let ge = &mut gw[e * el..(e + 1) * el];
                match self.spec.kind {
                    PairwiseKind::Fwfm => {
                        for k in 0..d {
                            ge[k] += dlogit * a[k] * b[k];
                            demb[i * d + k] += dlogit * we[k] * b[k];
                            demb[j * d + k] += dlogit * we[k] * a[k];
                        }
                    }
                    PairwiseKind::Fmfm => {
                        vec_mat(a, we, d, &mut u);
                        let du: Vec<f64> = b.iter().map(|&x| dlogit * x).collect();
                        for k in 0..d {
                            demb[j * d + k] += dlogit * u[k];
                        }
                        for r in 0..d {
                            for c in 0..d {
                                ge[r * d + c] += a[r] * du[c];
                            }
                            demb[i * d + r] += dot(&we[r * d..(r + 1) * d], &du);
                        }
                    }
                }
            }
        }
        let v = store.data(&self.linear);
        for (k, g) in grads.buf(&self.linear).iter_mut().enumerate() {
            *g += dlogit * emb[k];
            demb[k] += dlogit * v[k];
        }
        grads.buf(&self.bias)[0] += dlogit;
    }

    fn param_count(&self) -> usize {
        self.pairs.len() * self.edge_len() + self.spec.fields * self.spec.dim + 1
    }

    fn flops(&self) -> u64 {
        let (m, d) = (self.spec.fields as u64, self.spec.dim as u64);
        let p = self.pairs.len() as u64;
        let phi = match self.spec.kind {
            PairwiseKind::Fwfm => 2 * d,
            PairwiseKind::Fmfm => 2 * d * d,
        };
        p * phi + (p - 1) * d + (d - 1) + m * (2 * d - 1) + (m - 1) + 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TinyMlpSpec {
    pub fields: usize,
    pub dim: usize,
    pub hidden: Vec<usize>,
}

impl TinyMlpSpec {
    pub fn new(fields: usize, dim: usize) -> Self {
        Self {
            fields,
            dim,
            hidden: TINY_MLP_HIDDEN.to_vec(),
        }
    }
}

/// ReLU MLP over the concatenated embeddings.
#[derive(Debug, Clone)]
pub struct TinyMlp {
    spec: TinyMlpSpec,
    mlp: Mlp,
}

impl TinyMlp {
    pub fn new(spec: TinyMlpSpec) -> Result<Self> {
        if spec.fields < 1 || spec.dim < 1 {
            return Err(config_err(format!("invalid tiny MLP {spec:?}")));
        }
        let mlp = Mlp::new("tinymlp", spec.fields * spec.dim, &spec.hidden)?;
        Ok(Self { spec, mlp })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }
}

impl Network for TinyMlp {
    type Cache<S: Scalar> = MlpCache<S>;

    fn num_fields(&self) -> usize {
        self.spec.fields
    }

    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn register(&self, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<()> {
        self.mlp.register(store, rng)
    }

    fn forward<S: Scalar>(&self, store: &ParamStore, emb: &[S]) -> (S, MlpCache<S>) {
        self.mlp.forward(store, emb)
    }

    fn backward(
        &self,
        store: &ParamStore,
        _emb: &[f64],
        cache: &MlpCache<f64>,
        dlogit: f64,
        grads: &mut Grads,
        demb: &mut [f64],
    ) {
        self.mlp.backward(store, cache, dlogit, grads, demb);
    }

    fn param_count(&self) -> usize {
        self.mlp.param_count()
    }

    fn flops(&self) -> u64 {
        self.mlp.flops()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn pairwise(kind: PairwiseKind, m: usize, d: usize) -> (Pairwise, ParamStore) {
        let net = Pairwise::new(PairwiseSpec {
            fields: m,
            dim: d,
            kind,
        })
        .unwrap();
        let mut store = ParamStore::new();
        net.register(&mut store, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        (net, store)
    }

    #[test]
    fn fwfm_single_pair() {
        let (net, store) = pairwise(PairwiseKind::Fwfm, 2, 1);
        assert_eq!(net.forward(&store, &[2.0, 3.0]).0, 6.0);
    }

    #[test]
    fn fmfm_identity_equals_fwfm_ones() {
        let (fw, fw_store) = pairwise(PairwiseKind::Fwfm, 4, 3);
        let (fm, fm_store) = pairwise(PairwiseKind::Fmfm, 4, 3);
        let emb: Vec<f64> = (0..12).map(|k| (k as f64 * 0.37).sin()).collect();
        assert_eq!(fw.forward(&fw_store, &emb).0, fm.forward(&fm_store, &emb).0);
    }

    #[test]
    fn tiny_mlp_zero_weights_give_bias() {
        let net = TinyMlp::new(TinyMlpSpec::new(3, 2)).unwrap();
        let mut store = ParamStore::new();
        net.register(&mut store, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for k in 0..4 {
            let shape = store.get(net.mlp().weight_name(k)).unwrap().shape().to_vec();
            store.set(net.mlp().weight_name(k), Tensor::zeros(&shape)).unwrap();
        }
        store.set("tinymlp.b.3", Tensor::scalar(-0.4)).unwrap();
        assert_eq!(net.forward(&store, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).0, -0.4);
    }

    #[test]
    fn pairwise_needs_two_fields() {
        assert!(Pairwise::new(PairwiseSpec {
            fields: 1,
            dim: 2,
            kind: PairwiseKind::Fwfm
        })
        .is_err());
    }
}
