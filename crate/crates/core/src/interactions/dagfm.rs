//! The DAG factorization machine.
//!
//! Node `i` of the DAG is field `i`. Edges run from lower to higher field
//! index, and every node has a self edge. Each propagation layer updates
//!
//! ```text
//! h_i^{t+1} = Σ_{j ∈ N(i) ∪ {i}} φ(h_j^t, h_i^1)
//! ```
//!
//! with per-layer, per-edge weights for `φ`. Every layer's node states are sum
//! pooled over the embedding dimension, concatenated, and passed to a linear
//! head. With `L` propagation layers the pooled vector has `m (L + 1)` entries.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Error, Result};
use crate::interactions::phi::{phi_basic_inner_into, phi_inner_into, phi_kernel_into, phi_outer_into};
use crate::network::Network;
use crate::numcore::{dot, dot_w, sum, Grads, ParamStore, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionFn {
    BasicInner,
    Inner,
    Kernel,
    Outer,
}

impl InteractionFn {
    pub const ALL: [InteractionFn; 4] = [
        InteractionFn::BasicInner,
        InteractionFn::Inner,
        InteractionFn::Kernel,
        InteractionFn::Outer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InteractionFn::BasicInner => "basic-inner",
            InteractionFn::Inner => "inner",
            InteractionFn::Kernel => "kernel",
            InteractionFn::Outer => "outer",
        }
    }

    /// FLOPs of one edge evaluation at embedding size `d`.
    pub fn edge_flops(self, d: usize) -> u64 {
        let d = d as u64;
        match self {
            InteractionFn::BasicInner => d,
            InteractionFn::Inner => 2 * d,
            InteractionFn::Kernel => 2 * d * d,
            InteractionFn::Outer => 4 * d - 1,
        }
    }

    /// Trainable weights per edge.
    pub fn edge_params(self, d: usize) -> usize {
        match self {
            InteractionFn::BasicInner => 0,
            InteractionFn::Inner => d,
            InteractionFn::Kernel => d * d,
            InteractionFn::Outer => 2 * d,
        }
    }
}

impl fmt::Display for InteractionFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InteractionFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InteractionFn::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| config_err(format!("unknown interaction function `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagfmSpec {
    pub fields: usize,
    pub dim: usize,
    /// Number of propagation layers (`l - 1`).
    pub layers: usize,
    pub function: InteractionFn,
    /// Disabled edges `(from, to)` with `from < to`. Empty means the full DAG.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removed_edges: Vec<(usize, usize)>,
}

impl DagfmSpec {
    pub fn new(fields: usize, dim: usize, layers: usize, function: InteractionFn) -> Self {
        Self {
            fields,
            dim,
            layers,
            function,
            removed_edges: Vec::new(),
        }
    }

    pub fn is_full(&self) -> bool {
        self.removed_edges.is_empty()
    }
}

/// Node states and pooled values of one forward pass.
///
/// `states[t]` holds the `m * d` node states after `t` propagation layers, so
/// `states[0]` is the embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationTrace<S = f64> {
    pub fields: usize,
    pub dim: usize,
    pub states: Vec<Vec<S>>,
    /// `pooled[t * m + i]` is the sum of `states[t]` for node `i`.
    pub pooled: Vec<S>,
}

impl<S: Scalar> PropagationTrace<S> {
    pub fn state(&self, t: usize, i: usize) -> &[S] {
        &self.states[t][i * self.dim..(i + 1) * self.dim]
    }

    pub fn pooled_at(&self, t: usize, i: usize) -> S {
        self.pooled[t * self.fields + i]
    }
}

enum LayerWeights<'a> {
    Basic,
    Inner(&'a [f64]),
    Kernel(&'a [f64]),
    Outer(&'a [f64], &'a [f64]),
}

#[derive(Debug, Clone)]
struct LayerNames {
    first: String,
    second: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Dagfm {
    spec: DagfmSpec,
    edges: Vec<(usize, usize)>,
    node_start: Vec<usize>,
    layer_names: Vec<LayerNames>,
    head_w: String,
    head_b: String,
}

pub const DAGFM_HEAD_W: &str = "dagfm.head.w";
pub const DAGFM_HEAD_B: &str = "dagfm.head.b";

impl Dagfm {
    pub fn new(spec: DagfmSpec) -> Result<Self> {
        let m = spec.fields;
        if m < 2 {
            return Err(config_err(format!("DAGFM needs at least two fields, got {m}")));
        }
        if spec.dim == 0 {
            return Err(config_err("embedding size must be at least 1"));
        }
        if spec.layers == 0 {
            return Err(config_err("DAGFM needs at least one propagation layer"));
        }
        for &(j, i) in &spec.removed_edges {
            if j >= i || i >= m {
                return Err(config_err(format!(
                    "cannot remove edge ({j}, {i}): only forward edges j < i < {m} are removable"
                )));
            }
        }
        let mut edges = Vec::new();
        let mut node_start = Vec::with_capacity(m + 1);
        for i in 0..m {
            node_start.push(edges.len());
            for j in 0..=i {
                if j == i || !spec.removed_edges.contains(&(j, i)) {
                    edges.push((j, i));
                }
            }
        }
        node_start.push(edges.len());

        let layer_names = (0..spec.layers)
            .map(|t| match spec.function {
                InteractionFn::BasicInner => LayerNames {
                    first: String::new(),
                    second: None,
                },
                InteractionFn::Inner => LayerNames {
                    first: format!("dagfm.w.{t}"),
                    second: None,
                },
                InteractionFn::Kernel => LayerNames {
                    first: format!("dagfm.kernel.{t}"),
                    second: None,
                },
                InteractionFn::Outer => LayerNames {
                    first: format!("dagfm.p.{t}"),
                    second: Some(format!("dagfm.q.{t}")),
                },
            })
            .collect();

        Ok(Self {
            spec,
            edges,
            node_start,
            layer_names,
            head_w: DAGFM_HEAD_W.into(),
            head_b: DAGFM_HEAD_B.into(),
        })
    }

    pub fn spec(&self) -> &DagfmSpec {
        &self.spec
    }

    /// Enabled edges `(from, to)`, grouped by target node.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn pooled_len(&self) -> usize {
        self.spec.fields * (self.spec.layers + 1)
    }

    /// Names of the edge-weight tensors of layer `t` (empty for basic inner).
    pub fn layer_param_names(&self, t: usize) -> Vec<&str> {
        let n = &self.layer_names[t];
        match self.spec.function {
            InteractionFn::BasicInner => vec![],
            _ => std::iter::once(n.first.as_str()).chain(n.second.as_deref()).collect(),
        }
    }

    /// Set inner weights to ones and kernel weights to identity matrices: the
    /// setting under which propagation reproduces the plain DP recurrence.
    pub fn set_identity_weights(&self, store: &mut ParamStore) -> Result<()> {
        let (e, d) = (self.edges.len(), self.spec.dim);
        for t in 0..self.spec.layers {
            match self.spec.function {
                InteractionFn::BasicInner => {}
                InteractionFn::Inner => store.set(&self.layer_names[t].first, Tensor::filled(&[e, d], 1.0))?,
                InteractionFn::Kernel => {
                    let mut w = Tensor::zeros(&[e, d, d]);
                    for edge in 0..e {
                        for k in 0..d {
                            w.data_mut()[edge * d * d + k * d + k] = 1.0;
                        }
                    }
                    store.set(&self.layer_names[t].first, w)?;
                }
                InteractionFn::Outer => {
                    return Err(config_err("outer edges are rank one and cannot hold identity weights"))
                }
            }
        }
        Ok(())
    }

    fn layer_weights<'a>(&self, store: &'a ParamStore, t: usize) -> LayerWeights<'a> {
        let n = &self.layer_names[t];
        match self.spec.function {
            InteractionFn::BasicInner => LayerWeights::Basic,
            InteractionFn::Inner => LayerWeights::Inner(store.data(&n.first)),
            InteractionFn::Kernel => LayerWeights::Kernel(store.data(&n.first)),
            InteractionFn::Outer => LayerWeights::Outer(
                store.data(&n.first),
                store.data(n.second.as_ref().expect("outer has q")),
            ),
        }
    }

    #[inline]
    fn edge_term<S: Scalar>(&self, lw: &LayerWeights<'_>, edge: usize, a: &[S], b: &[S], out: &mut [S]) {
        let d = self.spec.dim;
        match *lw {
            LayerWeights::Basic => phi_basic_inner_into(a, b, out),
            LayerWeights::Inner(w) => phi_inner_into(a, b, &w[edge * d..(edge + 1) * d], out),
            LayerWeights::Kernel(w) => phi_kernel_into(a, b, &w[edge * d * d..(edge + 1) * d * d], out),
            LayerWeights::Outer(p, q) => {
                phi_outer_into(a, b, &p[edge * d..(edge + 1) * d], &q[edge * d..(edge + 1) * d], out)
            }
        }
    }

    fn propagate_into<S: Scalar>(
        &self,
        store: &ParamStore,
        t: usize,
        prev: &[S],
        initial: &[S],
        next: &mut [S],
        tmp: &mut [S],
    ) {
        let d = self.spec.dim;
        let lw = self.layer_weights(store, t);
        for i in 0..self.spec.fields {
            let b = &initial[i * d..(i + 1) * d];
            let out = &mut next[i * d..(i + 1) * d];
            for (k, edge) in (self.node_start[i]..self.node_start[i + 1]).enumerate() {
                let j = self.edges[edge].0;
                let a = &prev[j * d..(j + 1) * d];
                if k == 0 {
                    self.edge_term(&lw, edge, a, b, out);
                } else {
                    self.edge_term(&lw, edge, a, b, tmp);
                    for (o, &x) in out.iter_mut().zip(tmp.iter()) {
                        *o = *o + x;
                    }
                }
            }
        }
    }

    /// One propagation step: states after layer `layer + 1` from states after
    /// `layer` (0-based) and the initial states.
    pub fn dag_propagate(&self, store: &ParamStore, prev: &[f64], initial: &[f64], layer: usize) -> Result<Vec<f64>> {
        if layer >= self.spec.layers {
            return Err(config_err(format!(
                "layer {layer} out of range (model has {} propagation layers)",
                self.spec.layers
            )));
        }
        let n = self.spec.fields * self.spec.dim;
        if prev.len() != n || initial.len() != n {
            return Err(shape_err(format!(
                "states must have {n} values, got {} and {}",
                prev.len(),
                initial.len()
            )));
        }
        let mut next = vec![0.0; n];
        let mut tmp = vec![0.0; self.spec.dim];
        self.propagate_into(store, layer, prev, initial, &mut next, &mut tmp);
        Ok(next)
    }

    /// Forward pass returning the logit and the full propagation trace.
    pub fn propagate<S: Scalar>(&self, store: &ParamStore, emb: &[S]) -> (S, PropagationTrace<S>) {
        let (m, d, layers) = (self.spec.fields, self.spec.dim, self.spec.layers);
        let mut states: Vec<Vec<S>> = Vec::with_capacity(layers + 1);
        states.push(emb.to_vec());
        let mut tmp = emb[..d].to_vec();
        for t in 0..layers {
            let mut next = emb.to_vec();
            self.propagate_into(store, t, &states[t], emb, &mut next, &mut tmp);
            states.push(next);
        }
        let pooled: Vec<S> = states.iter().flat_map(|s| s.chunks_exact(d).map(sum)).collect();
        debug_assert_eq!(pooled.len(), m * (layers + 1));
        let logit = dot_w(&pooled, store.data(&self.head_w)) + S::from_f64(store.data(&self.head_b)[0]);
        (
            logit,
            PropagationTrace {
                fields: m,
                dim: d,
                states,
                pooled,
            },
        )
    }

    /// Backward pass with extra upstream gradients on the node states
    /// (`dstates[t]` has `m * d` entries), used by the MLP-augmented variant.
    pub(crate) fn backward_with_states(
        &self,
        store: &ParamStore,
        trace: &PropagationTrace<f64>,
        dlogit: f64,
        mut dstates: Vec<Vec<f64>>,
        grads: &mut Grads,
        demb: &mut [f64],
    ) {
        let (m, d, layers) = (self.spec.fields, self.spec.dim, self.spec.layers);
        let head_w = store.data(&self.head_w);
        {
            let gw = grads.buf(&self.head_w);
            for (g, &p) in gw.iter_mut().zip(&trace.pooled) {
                *g += dlogit * p;
            }
        }
        grads.buf(&self.head_b)[0] += dlogit;
        for t in 0..=layers {
            for i in 0..m {
                let g = dlogit * head_w[t * m + i];
                for x in &mut dstates[t][i * d..(i + 1) * d] {
                    *x += g;
                }
            }
        }

        let emb = &trace.states[0];
        let mut dinit = vec![0.0; m * d];
        let mut u = vec![0.0; d];
        let mut du = vec![0.0; d];
        for t in (0..layers).rev() {
            let (lower, upper) = dstates.split_at_mut(t + 1);
            let dnext = &upper[0];
            let dprev = &mut lower[t];
            let prev = &trace.states[t];
            let names = &self.layer_names[t];
            match self.spec.function {
                InteractionFn::BasicInner => {
                    for &(j, i) in &self.edges {
                        let dh = &dnext[i * d..(i + 1) * d];
                        let a = &prev[j * d..(j + 1) * d];
                        let b = &emb[i * d..(i + 1) * d];
                        for k in 0..d {
                            dprev[j * d + k] += dh[k] * b[k];
                            dinit[i * d + k] += dh[k] * a[k];
                        }
                    }
                }
                InteractionFn::Inner => {
                    let w = store.data(&names.first);
                    let gw = grads.buf(&names.first);
                    for (edge, &(j, i)) in self.edges.iter().enumerate() {
                        let dh = &dnext[i * d..(i + 1) * d];
                        let a = &prev[j * d..(j + 1) * d];
                        let b = &emb[i * d..(i + 1) * d];
                        let we = &w[edge * d..(edge + 1) * d];
                        let ge = &mut gw[edge * d..(edge + 1) * d];
                        for k in 0..d {
                            ge[k] += dh[k] * a[k] * b[k];
                            dprev[j * d + k] += dh[k] * we[k] * b[k];
                            dinit[i * d + k] += dh[k] * we[k] * a[k];
                        }
                    }
                }
                InteractionFn::Kernel => {
                    let w = store.data(&names.first);
                    let gw = grads.buf(&names.first);
                    for (edge, &(j, i)) in self.edges.iter().enumerate() {
                        let dh = &dnext[i * d..(i + 1) * d];
                        let a = &prev[j * d..(j + 1) * d];
                        let b = &emb[i * d..(i + 1) * d];
                        let we = &w[edge * d * d..(edge + 1) * d * d];
                        let ge = &mut gw[edge * d * d..(edge + 1) * d * d];
                        crate::numcore::vec_mat(a, we, d, &mut u);
                        for k in 0..d {
                            du[k] = dh[k] * b[k];
                            dinit[i * d + k] += dh[k] * u[k];
                        }
                        for r in 0..d {
                            let row = &mut ge[r * d..(r + 1) * d];
                            for c in 0..d {
                                row[c] += a[r] * du[c];
                            }
                            dprev[j * d + r] += dot(&we[r * d..(r + 1) * d], &du);
                        }
                    }
                }
                InteractionFn::Outer => {
                    let p = store.data(&names.first);
                    let q = store.data(names.second.as_ref().expect("outer has q"));
                    let (gp, gq) = grads.pair_mut(&names.first, names.second.as_ref().expect("outer has q"));
                    for (edge, &(j, i)) in self.edges.iter().enumerate() {
                        let dh = &dnext[i * d..(i + 1) * d];
                        let a = &prev[j * d..(j + 1) * d];
                        let b = &emb[i * d..(i + 1) * d];
                        let pe = &p[edge * d..(edge + 1) * d];
                        let qe = &q[edge * d..(edge + 1) * d];
                        let s = dot(a, pe);
                        let mut ds = 0.0;
                        for k in 0..d {
                            ds += dh[k] * qe[k] * b[k];
                        }
                        let gpe = &mut gp[edge * d..(edge + 1) * d];
                        let gqe = &mut gq[edge * d..(edge + 1) * d];
                        for k in 0..d {
                            gpe[k] += ds * a[k];
                            dprev[j * d + k] += ds * pe[k];
                            let dv = s * dh[k];
                            gqe[k] += dv * b[k];
                            dinit[i * d + k] += dv * qe[k];
                        }
                    }
                }
            }
        }
        for ((g, &x), &y) in demb.iter_mut().zip(&dstates[0]).zip(&dinit) {
            *g += x + y;
        }
    }
}

impl Network for Dagfm {
    type Cache<S: Scalar> = PropagationTrace<S>;

    fn num_fields(&self) -> usize {
        self.spec.fields
    }

    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn register(&self, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<()> {
        let (e, d) = (self.edges.len(), self.spec.dim);
        for t in 0..self.spec.layers {
            let names = &self.layer_names[t];
            match self.spec.function {
                InteractionFn::BasicInner => {}
                InteractionFn::Inner => store.insert(names.first.clone(), Tensor::zeros(&[e, d]))?,
                InteractionFn::Kernel => store.insert(names.first.clone(), Tensor::zeros(&[e, d, d]))?,
                InteractionFn::Outer => {
                    let normal = Normal::new(0.0, 1.0 / (d as f64).sqrt()).expect("valid std");
                    for name in [&names.first, names.second.as_ref().expect("outer has q")] {
                        let data = (0..e * d).map(|_| normal.sample(rng)).collect();
                        store.insert(name.clone(), Tensor::new(vec![e, d], data)?)?;
                    }
                }
            }
        }
        if self.spec.function != InteractionFn::Outer {
            self.set_identity_weights(store)?;
        }
        store.insert(self.head_w.clone(), Tensor::zeros(&[self.pooled_len()]))?;
        store.insert(self.head_b.clone(), Tensor::zeros(&[1]))?;
        Ok(())
    }

    fn forward<S: Scalar>(&self, store: &ParamStore, emb: &[S]) -> (S, PropagationTrace<S>) {
        self.propagate(store, emb)
    }

    fn backward(
        &self,
        store: &ParamStore,
        _emb: &[f64],
        cache: &PropagationTrace<f64>,
        dlogit: f64,
        grads: &mut Grads,
        demb: &mut [f64],
    ) {
        let n = self.spec.fields * self.spec.dim;
        let dstates = vec![vec![0.0; n]; self.spec.layers + 1];
        self.backward_with_states(store, cache, dlogit, dstates, grads, demb);
    }

    fn param_count(&self) -> usize {
        self.spec.layers * self.edges.len() * self.spec.function.edge_params(self.spec.dim) + self.pooled_len() + 1
    }

    fn flops(&self) -> u64 {
        let (m, d, layers) = (self.spec.fields as u64, self.spec.dim as u64, self.spec.layers as u64);
        let e = self.edges.len() as u64;
        let per_layer = e * self.spec.function.edge_flops(self.spec.dim) + (e - m) * d;
        let pooling = (layers + 1) * m * (d - 1);
        let head = 2 * m * (layers + 1);
        layers * per_layer + pooling + head
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn build(spec: DagfmSpec) -> (Dagfm, ParamStore) {
        let net = Dagfm::new(spec).unwrap();
        let mut store = ParamStore::new();
        net.register(&mut store, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        (net, store)
    }

    #[test]
    fn basic_inner_propagation_examples() {
        let (net, store) = build(DagfmSpec::new(3, 1, 2, InteractionFn::BasicInner));
        let e = [1.0, 2.0, 3.0];
        let h2 = net.dag_propagate(&store, &e, &e, 0).unwrap();
        assert_eq!(h2, vec![1.0, 6.0, 18.0]);
        let h3 = net.dag_propagate(&store, &h2, &e, 1).unwrap();
        assert_eq!(h3, vec![1.0, 14.0, 75.0]);
        assert!(net.dag_propagate(&store, &h3, &e, 2).is_err());
    }

    #[test]
    fn removed_edge_drops_its_term() {
        let mut spec = DagfmSpec::new(3, 1, 1, InteractionFn::BasicInner);
        spec.removed_edges.push((0, 2));
        let (net, store) = build(spec);
        let e = [1.0, 2.0, 3.0];
        assert_eq!(net.dag_propagate(&store, &e, &e, 0).unwrap()[2], 15.0);
    }

    #[test]
    fn self_edges_cannot_be_removed() {
        let mut spec = DagfmSpec::new(3, 1, 1, InteractionFn::BasicInner);
        spec.removed_edges.push((1, 1));
        assert!(Dagfm::new(spec).is_err());
    }

    #[test]
    fn logit_sums_pooled_states() {
        let (net, mut store) = build(DagfmSpec::new(3, 1, 2, InteractionFn::BasicInner));
        let (zero, _) = net.forward(&store, &[1.0, 2.0, 3.0]);
        assert_eq!(zero, 0.0);
        store.set(DAGFM_HEAD_W, Tensor::filled(&[9], 1.0)).unwrap();
        let (logit, trace) = net.forward(&store, &[1.0, 2.0, 3.0]);
        assert_eq!(logit, 121.0);
        assert_eq!(trace.pooled.len(), 9);
        assert_eq!(trace.pooled_at(2, 2), 75.0);
    }

    #[test]
    fn ones_inner_is_bitwise_basic_inner() {
        let (basic, bs) = build(DagfmSpec::new(4, 3, 3, InteractionFn::BasicInner));
        let (inner, is) = build(DagfmSpec::new(4, 3, 3, InteractionFn::Inner));
        let (kernel, ks) = build(DagfmSpec::new(4, 3, 3, InteractionFn::Kernel));
        let emb: Vec<f64> = (0..12).map(|k| (k as f64 * 0.71).cos()).collect();
        let (_, a) = basic.forward(&bs, &emb);
        let (_, b) = inner.forward(&is, &emb);
        let (_, c) = kernel.forward(&ks, &emb);
        for t in 0..4 {
            for (x, (y, z)) in a.states[t].iter().zip(b.states[t].iter().zip(&c.states[t])) {
                assert_eq!(x.to_bits(), y.to_bits());
                assert_eq!(x.to_bits(), z.to_bits());
            }
        }
    }

    #[test]
    fn closed_form_counts() {
        let inner = Dagfm::new(DagfmSpec::new(3, 2, 2, InteractionFn::Inner)).unwrap();
        assert_eq!(inner.param_count(), 34);
        let kernel = Dagfm::new(DagfmSpec::new(3, 2, 2, InteractionFn::Kernel)).unwrap();
        assert_eq!(kernel.param_count(), 58);
        let one = Dagfm::new(DagfmSpec::new(3, 2, 1, InteractionFn::Inner)).unwrap();
        // 24 edge mults, 6 aggregation adds, 6 pooling adds, 12 head ops.
        assert_eq!(one.flops(), 48);
    }

    #[test]
    fn interaction_names_round_trip() {
        for f in InteractionFn::ALL {
            assert_eq!(f.as_str().parse::<InteractionFn>().unwrap(), f);
        }
        assert!("dot".parse::<InteractionFn>().is_err());
    }

    #[test]
    fn zero_layers_are_rejected() {
        assert!(Dagfm::new(DagfmSpec::new(3, 2, 0, InteractionFn::Inner)).is_err());
    }
}
