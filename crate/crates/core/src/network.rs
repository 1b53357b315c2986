use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::numcore::{Grads, ParamStore, Scalar};

/// An interaction network that maps concatenated field embeddings to a logit.
///
/// `forward` is the single forward implementation: it runs with `f64` for
/// training and inference and with an instrumented scalar for FLOP counting.
/// `backward` consumes the `f64` cache and accumulates parameter gradients into
/// `grads` and embedding gradients into `demb`.
pub trait Network {
    type Cache<S: Scalar>;

    fn num_fields(&self) -> usize;
    fn dim(&self) -> usize;

    /// Register and initialize the network's (non-embedding) parameters.
    fn register(&self, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<()>;

    fn forward<S: Scalar>(&self, store: &ParamStore, emb: &[S]) -> (S, Self::Cache<S>);

    fn backward(
        &self,
        store: &ParamStore,
        emb: &[f64],
        cache: &Self::Cache<f64>,
        dlogit: f64,
        grads: &mut Grads,
        demb: &mut [f64],
    );

    /// Closed-form count of non-embedding parameters.
    fn param_count(&self) -> usize;

    /// Closed-form FLOPs of one forward pass (mult = 1, add = 1; lookups free).
    fn flops(&self) -> u64;
}
