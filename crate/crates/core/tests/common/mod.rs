#![allow(dead_code)]

use dagfm_core::data::Instance;
use dagfm_core::interactions::{DagfmPlusSpec, DagfmSpec, InteractionFn, MlpInput};
use dagfm_core::teachers::{CinSpec, CrossNetSpec, PairwiseKind, PairwiseSpec, TinyMlpSpec};
use dagfm_core::{Model, ModelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Every model family at small random sizes.
pub fn small_specs(rng: &mut ChaCha8Rng, m: usize, d: usize) -> Vec<ModelSpec> {
    let layers = rng.random_range(1..=3);
    let mut specs: Vec<ModelSpec> = [
        InteractionFn::BasicInner,
        InteractionFn::Inner,
        InteractionFn::Kernel,
        InteractionFn::Outer,
    ]
    .into_iter()
    .map(|f| ModelSpec::Dagfm(DagfmSpec::new(m, d, layers, f)))
    .collect();
    for (f, input) in [
        (InteractionFn::Inner, MlpInput::AllLayers),
        (InteractionFn::Outer, MlpInput::FinalLayer),
    ] {
        specs.push(ModelSpec::DagfmPlus(DagfmPlusSpec {
            dag: DagfmSpec::new(m, d, layers, f),
            hidden: vec![rng.random_range(2..6), rng.random_range(2..4)],
            mlp_input: input,
        }));
    }
    specs.push(ModelSpec::Cin(CinSpec {
        fields: m,
        dim: d,
        layer_sizes: (0..layers).map(|_| rng.random_range(1..4)).collect(),
    }));
    specs.push(ModelSpec::CrossNet(CrossNetSpec {
        fields: m,
        dim: d,
        depth: layers,
    }));
    for kind in [PairwiseKind::Fwfm, PairwiseKind::Fmfm] {
        specs.push(ModelSpec::Pairwise(PairwiseSpec {
            fields: m,
            dim: d,
            kind,
        }));
    }
    specs.push(ModelSpec::TinyMlp(TinyMlpSpec {
        fields: m,
        dim: d,
        hidden: vec![rng.random_range(2..6), rng.random_range(2..6)],
    }));
    specs
}

/// Model with every parameter redrawn from `N(0, std²)` so that no gradient
/// is trivially zero.
pub fn randomized_model(spec: ModelSpec, rows: usize, seed: u64, std: f64) -> Model {
    let m = spec.fields();
    let mut model = Model::new(spec, vec![rows; m], seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let normal = Normal::new(0.0, std).unwrap();
    for p in model.params.iter_mut() {
        for v in p.value.data_mut() {
            *v = normal.sample(&mut rng);
        }
    }
    model
}

pub fn random_instances(rng: &mut ChaCha8Rng, n: usize, m: usize, rows: usize) -> Vec<Instance> {
    (0..n)
        .map(|_| Instance {
            label: rng.random_range(0..2),
            indices: (0..m).map(|_| rng.random_range(0..rows as u32)).collect(),
        })
        .collect()
}
