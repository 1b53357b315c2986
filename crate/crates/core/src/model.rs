//! Model specifications and the embedding + network wrapper used by every
//! training stage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Instance;
use crate::error::{shape_err, Result};
use crate::interactions::{Dagfm, DagfmPlus, DagfmPlusSpec, DagfmSpec, EmbeddingTable, InteractionFn};
use crate::network::Network;
use crate::numcore::{Grads, ParamStore, Scalar, Tensor};
use crate::teachers::{
    Cin, CinSpec, CrossNet, CrossNetSpec, Pairwise, PairwiseKind, PairwiseSpec, TinyMlp, TinyMlpSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelSpec {
    Dagfm(DagfmSpec),
    DagfmPlus(DagfmPlusSpec),
    Cin(CinSpec),
    CrossNet(CrossNetSpec),
    Pairwise(PairwiseSpec),
    TinyMlp(TinyMlpSpec),
}

impl ModelSpec {
    pub fn fields(&self) -> usize {
        match self {
            ModelSpec::Dagfm(s) => s.fields,
            ModelSpec::DagfmPlus(s) => s.dag.fields,
            ModelSpec::Cin(s) => s.fields,
            ModelSpec::CrossNet(s) => s.fields,
            ModelSpec::Pairwise(s) => s.fields,
            ModelSpec::TinyMlp(s) => s.fields,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Dagfm(s) => s.dim,
            ModelSpec::DagfmPlus(s) => s.dag.dim,
            ModelSpec::Cin(s) => s.dim,
            ModelSpec::CrossNet(s) => s.dim,
            ModelSpec::Pairwise(s) => s.dim,
            ModelSpec::TinyMlp(s) => s.dim,
        }
    }

    /// Short human-readable name such as `dagfm-outer` or `crossnet`.
    pub fn kind_name(&self) -> String {
        match self {
            ModelSpec::Dagfm(s) => format!("dagfm-{}", s.function),
            ModelSpec::DagfmPlus(s) => format!("dagfm-plus-{}", s.dag.function),
            ModelSpec::Cin(_) => "cin".into(),
            ModelSpec::CrossNet(_) => "crossnet".into(),
            ModelSpec::Pairwise(s) => match s.kind {
                PairwiseKind::Fwfm => "fwfm".into(),
                PairwiseKind::Fmfm => "fmfm".into(),
            },
            ModelSpec::TinyMlp(_) => "tiny-mlp".into(),
        }
    }

    pub fn dagfm(fields: usize, dim: usize, layers: usize, function: InteractionFn) -> Self {
        ModelSpec::Dagfm(DagfmSpec::new(fields, dim, layers, function))
    }

    pub fn build(&self) -> Result<Net> {
        Ok(match self {
            ModelSpec::Dagfm(s) => Net::Dagfm(Dagfm::new(s.clone())?),
            ModelSpec::DagfmPlus(s) => Net::DagfmPlus(DagfmPlus::new(s.clone())?),
            ModelSpec::Cin(s) => Net::Cin(Cin::new(s.clone())?),
            ModelSpec::CrossNet(s) => Net::CrossNet(CrossNet::new(s.clone())?),
            ModelSpec::Pairwise(s) => Net::Pairwise(Pairwise::new(s.clone())?),
            ModelSpec::TinyMlp(s) => Net::TinyMlp(TinyMlp::new(s.clone())?),
        })
    }
}

/// A built network of any supported kind.
#[derive(Debug, Clone)]
pub enum Net {
    Dagfm(Dagfm),
    DagfmPlus(DagfmPlus),
    Cin(Cin),
    CrossNet(CrossNet),
    Pairwise(Pairwise),
    TinyMlp(TinyMlp),
}

macro_rules! dispatch {
    ($net:expr, $n:ident => $body:expr) => {
        match $net {
            Net::Dagfm($n) => $body,
            Net::DagfmPlus($n) => $body,
            Net::Cin($n) => $body,
            Net::CrossNet($n) => $body,
            Net::Pairwise($n) => $body,
            Net::TinyMlp($n) => $body,
        }
    };
}

fn forward_backward<N: Network>(
    net: &N,
    store: &ParamStore,
    emb: &[f64],
    dloss: impl FnOnce(f64) -> f64,
    grads: &mut Grads,
    demb: &mut [f64],
) -> f64 {
    let (logit, cache) = net.forward(store, emb);
    let dlogit = dloss(logit);
    net.backward(store, emb, &cache, dlogit, grads, demb);
    logit
}

impl Net {
    pub fn param_count(&self) -> usize {
        dispatch!(self, n => n.param_count())
    }

    pub fn flops(&self) -> u64 {
        dispatch!(self, n => n.flops())
    }

    pub fn forward<S: Scalar>(&self, store: &ParamStore, emb: &[S]) -> S {
        dispatch!(self, n => n.forward(store, emb).0)
    }

    fn register(&self, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<()> {
        dispatch!(self, n => n.register(store, rng))
    }

    /// Forward and backward for one instance; `dloss` maps the logit to the
    /// gradient of the loss with respect to it. Returns the logit.
    pub fn forward_backward(
        &self,
        store: &ParamStore,
        emb: &[f64],
        dloss: impl FnOnce(f64) -> f64,
        grads: &mut Grads,
        demb: &mut [f64],
    ) -> f64 {
        dispatch!(self, n => forward_backward(n, store, emb, dloss, grads, demb))
    }
}

/// Embedding tables plus an interaction network and all their parameters.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    embeddings: EmbeddingTable,
    net: Net,
    pub params: ParamStore,
}

impl Model {
    /// Fresh model with seeded initialization. `field_rows[i]` is the number
    /// of embedding rows (vocabulary plus OOV) of field `i`.
    pub fn new(spec: ModelSpec, field_rows: Vec<usize>, seed: u64) -> Result<Self> {
        if field_rows.len() != spec.fields() {
            return Err(shape_err(format!(
                "model has {} fields but the schema has {}",
                spec.fields(),
                field_rows.len()
            )));
        }
        let embeddings = EmbeddingTable::new(field_rows, spec.dim())?;
        let net = spec.build()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        embeddings.register(&mut params, &mut rng)?;
        net.register(&mut params, &mut rng)?;
        let model = Self {
            spec,
            embeddings,
            net,
            params,
        };
        model.check_params()?;
        Ok(model)
    }

    /// Rebuild a model around existing parameters (for example a checkpoint).
    /// Every expected tensor must be present with the expected shape.
    pub fn from_params(spec: ModelSpec, field_rows: Vec<usize>, params: ParamStore) -> Result<Self> {
        let fresh = Self::new(spec, field_rows, 0)?;
        let expected: Vec<(&str, &[usize])> = fresh
            .params
            .iter()
            .map(|p| (p.name.as_str(), p.value.shape()))
            .collect();
        let found: Vec<(&str, &[usize])> = params.iter().map(|p| (p.name.as_str(), p.value.shape())).collect();
        if expected != found {
            let first = expected
                .iter()
                .zip(&found)
                .find(|(a, b)| a != b)
                .map(|(a, b)| format!("expected {} {:?}, found {} {:?}", a.0, a.1, b.0, b.1))
                .unwrap_or_else(|| format!("expected {} tensors, found {}", expected.len(), found.len()));
            return Err(shape_err(format!("parameters do not match the model: {first}")));
        }
        let model = Self { params, ..fresh };
        model.check_params()?;
        Ok(model)
    }

    fn check_params(&self) -> Result<()> {
        if let Net::DagfmPlus(n) = &self.net {
            n.check_store(&self.params)?;
        }
        Ok(())
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn net(&self) -> &Net {
        &self.net
    }

    pub fn embeddings(&self) -> &EmbeddingTable {
        &self.embeddings
    }

    pub fn field_rows(&self) -> &[usize] {
        self.embeddings.rows()
    }

    pub fn num_fields(&self) -> usize {
        self.spec.fields()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Closed-form count of non-embedding parameters.
    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    pub fn embedding_param_count(&self) -> usize {
        self.embeddings.param_count()
    }

    /// Closed-form FLOPs of one single-instance forward pass.
    pub fn flops(&self) -> u64 {
        self.net.flops()
    }

    pub fn embed(&self, indices: &[u32]) -> Result<Vec<f64>> {
        self.embeddings.lookup(&self.params, indices)
    }

    pub fn logit(&self, indices: &[u32]) -> Result<f64> {
        let emb = self.embed(indices)?;
        Ok(self.net.forward(&self.params, &emb))
    }

    /// Logits for a slice of instances, in order.
    pub fn logits(&self, instances: &[Instance]) -> Result<Vec<f64>> {
        let mut emb = Vec::with_capacity(self.num_fields() * self.dim());
        instances
            .iter()
            .map(|inst| {
                self.embeddings.lookup_into(&self.params, &inst.indices, &mut emb)?;
                Ok(self.net.forward(&self.params, &emb))
            })
            .collect()
    }

    /// Logits computed on up to `threads` workers over contiguous shards;
    /// results are identical to [`Model::logits`].
    pub fn logits_sharded(&self, instances: &[Instance], threads: usize) -> Result<Vec<f64>> {
        let threads = threads.max(1).min(instances.len().max(1));
        if threads == 1 {
            return self.logits(instances);
        }
        let chunk = instances.len().div_ceil(threads);
        let parts: Vec<Result<Vec<f64>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = instances
                .chunks(chunk)
                .map(|part| scope.spawn(move || self.logits(part)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("evaluation worker panicked"))
                .collect()
        });
        let mut out = Vec::with_capacity(instances.len());
        for part in parts {
            out.extend(part?);
        }
        Ok(out)
    }

    /// Forward pass with an arbitrary scalar type on precomputed embeddings.
    pub fn forward_scalar<S: Scalar>(&self, emb: &[S]) -> S {
        self.net.forward(&self.params, emb)
    }

    /// Forward and backward for one instance, accumulating parameter and
    /// embedding gradients. Returns the logit.
    pub fn accumulate(
        &self,
        indices: &[u32],
        dloss: impl FnOnce(f64) -> f64,
        grads: &mut Grads,
        emb: &mut Vec<f64>,
        demb: &mut Vec<f64>,
    ) -> Result<f64> {
        self.embeddings.lookup_into(&self.params, indices, emb)?;
        demb.clear();
        demb.resize(emb.len(), 0.0);
        let logit = self.net.forward_backward(&self.params, emb, dloss, grads, demb);
        self.embeddings.scatter_grad(grads, indices, demb);
        Ok(logit)
    }

    /// Embedding tensors in field order.
    pub fn embedding_tensors(&self) -> Vec<(&str, &Tensor)> {
        self.embeddings
            .names()
            .iter()
            .map(|n| (n.as_str(), self.params.get(n).expect("embedding registered")))
            .collect()
    }

    pub fn set_embeddings_trainable(&mut self, trainable: bool) {
        for name in self.embeddings.names() {
            self.params
                .set_trainable(name, trainable)
                .expect("embedding registered");
        }
    }
}

/// A frozen model that produces logits and exposes embedding tables for
/// sharing with a student.
pub trait Teacher {
    fn teacher_logits(&self, instances: &[Instance]) -> Result<Vec<f64>>;
    fn embedding_dim(&self) -> usize;
    /// Embedding tensors in field order.
    fn shared_embeddings(&self) -> Vec<(&str, &Tensor)>;
}

impl Teacher for Model {
    fn teacher_logits(&self, instances: &[Instance]) -> Result<Vec<f64>> {
        self.logits(instances)
    }

    fn embedding_dim(&self) -> usize {
        self.dim()
    }

    fn shared_embeddings(&self) -> Vec<(&str, &Tensor)> {
        self.embedding_tensors()
    }
}
