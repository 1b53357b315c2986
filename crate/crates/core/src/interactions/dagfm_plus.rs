//! DAGFM with an MLP tower over the node states.
//!
//! The final logit is the DAGFM head logit plus the tower output. The tower
//! reads either every layer's node states (`m (L + 1) d` inputs) or only the
//! last layer's (`m d` inputs).

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::interactions::dagfm::{Dagfm, DagfmSpec, PropagationTrace};
use crate::interactions::mlp::{Mlp, MlpCache};
use crate::network::Network;
use crate::numcore::{Grads, ParamStore, Scalar};

pub const DAGFM_PLUS_MLP_PREFIX: &str = "mlp";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MlpInput {
    #[default]
    AllLayers,
    FinalLayer,
}

impl std::str::FromStr for MlpInput {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-layers" => Ok(MlpInput::AllLayers),
            "final-layer" => Ok(MlpInput::FinalLayer),
            _ => Err(config_err(format!(
                "unknown MLP input `{s}` (all-layers | final-layer)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagfmPlusSpec {
    pub dag: DagfmSpec,
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub mlp_input: MlpInput,
}

#[derive(Debug, Clone)]
pub struct DagfmPlus {
    dag: Dagfm,
    mlp: Mlp,
    input: MlpInput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DagfmPlusCache<S = f64> {
    pub trace: PropagationTrace<S>,
    pub mlp: MlpCache<S>,
}

impl DagfmPlus {
    pub fn new(spec: DagfmPlusSpec) -> Result<Self> {
        let input = spec.mlp_input;
        let dag = Dagfm::new(spec.dag)?;
        let width = Self::input_width_for(dag.spec(), input);
        let mlp = Mlp::new(DAGFM_PLUS_MLP_PREFIX, width, &spec.hidden)?;
        Ok(Self { dag, mlp, input })
    }

    fn input_width_for(spec: &DagfmSpec, input: MlpInput) -> usize {
        let layers = match input {
            MlpInput::AllLayers => spec.layers + 1,
            MlpInput::FinalLayer => 1,
        };
        spec.fields * spec.dim * layers
    }

    pub fn dag(&self) -> &Dagfm {
        &self.dag
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    /// Configuration error when the stored tower does not fit the node states.
    pub fn check_store(&self, store: &ParamStore) -> Result<()> {
        self.mlp.check_store(store)
    }

    fn first_state(&self) -> usize {
        match self.input {
            MlpInput::AllLayers => 0,
            MlpInput::FinalLayer => self.dag.spec().layers,
        }
    }
}

impl Network for DagfmPlus {
    type Cache<S: Scalar> = DagfmPlusCache<S>;

    fn num_fields(&self) -> usize {
        self.dag.num_fields()
    }

    fn dim(&self) -> usize {
        self.dag.dim()
    }

    fn register(&self, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<()> {
        self.dag.register(store, rng)?;
        self.mlp.register(store, rng)
    }

    fn forward<S: Scalar>(&self, store: &ParamStore, emb: &[S]) -> (S, DagfmPlusCache<S>) {
        let (head, trace) = self.dag.propagate(store, emb);
        let x: Vec<S> = trace.states[self.first_state()..].concat();
        let (tower, mlp) = self.mlp.forward(store, &x);
        (head + tower, DagfmPlusCache { trace, mlp })
    }

    fn backward(
        &self,
        store: &ParamStore,
        _emb: &[f64],
        cache: &DagfmPlusCache<f64>,
        dlogit: f64,
        grads: &mut Grads,
        demb: &mut [f64],
    ) {
        let spec = self.dag.spec();
        let n = spec.fields * spec.dim;
        let mut dx = vec![0.0; self.mlp.input_width()];
        self.mlp.backward(store, &cache.mlp, dlogit, grads, &mut dx);
        let mut dstates = vec![vec![0.0; n]; spec.layers + 1];
        for (t, chunk) in (self.first_state()..).zip(dx.chunks_exact(n)) {
            dstates[t].copy_from_slice(chunk);
        }
        self.dag
            .backward_with_states(store, &cache.trace, dlogit, dstates, grads, demb);
    }

    fn param_count(&self) -> usize {
        self.dag.param_count() + self.mlp.param_count()
    }

    fn flops(&self) -> u64 {
        self.dag.flops() + self.mlp.flops() + 1
    }
}
