//! Synthetic CTR data with a planted multiplicative interaction.
//!
//! Every value of the first `order` fields gets a latent score `z ~ N(0, 1)`.
//! An instance is positive when `strength * Π z + bias + noise > 0`, with
//! `noise ~ N(0, noise_std²)`. The remaining fields are uniform distractors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{FieldSchema, FieldVocab, Instance};
use crate::error::{config_err, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub instances: usize,
    pub fields: usize,
    pub vocab_per_field: usize,
    pub order: usize,
    pub strength: f64,
    pub bias: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            instances: 200_000,
            fields: 8,
            vocab_per_field: 50,
            order: 3,
            strength: 1.0,
            bias: 0.0,
            noise_std: 0.25,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedData {
    pub schema: FieldSchema,
    pub instances: Vec<Instance>,
    /// Latent scores, `[order][vocab_per_field]`.
    pub latent: Vec<Vec<f64>>,
}

impl PlantedData {
    /// Noise-free planted logit of an instance.
    pub fn planted_logit(&self, cfg: &PlantedConfig, inst: &Instance) -> f64 {
        let prod: f64 = self
            .latent
            .iter()
            .zip(&inst.indices)
            .map(|(z, &i)| z[i as usize])
            .product();
        cfg.strength * prod + cfg.bias
    }
}

pub fn generate_planted(cfg: &PlantedConfig) -> Result<PlantedData> {
    if cfg.fields < 2 || cfg.order < 1 || cfg.order > cfg.fields || cfg.vocab_per_field < 1 {
        return Err(config_err(format!("invalid planted-data config {cfg:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let latent: Vec<Vec<f64>> = (0..cfg.order)
        .map(|_| {
            (0..cfg.vocab_per_field)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect()
        })
        .collect();

    let fields = (0..cfg.fields)
        .map(|f| {
            FieldVocab::new(
                format!("f{f}"),
                (0..cfg.vocab_per_field).map(|v| format!("f{f}v{v}")).collect(),
            )
        })
        .collect();
    let schema = FieldSchema::new(fields, 0)?;

    let mut instances = Vec::with_capacity(cfg.instances);
    for _ in 0..cfg.instances {
        let indices: Vec<u32> = (0..cfg.fields)
            .map(|_| rng.random_range(0..cfg.vocab_per_field) as u32)
            .collect();
        let prod: f64 = latent.iter().zip(&indices).map(|(z, &i)| z[i as usize]).product();
        let noise: f64 = StandardNormal.sample(&mut rng);
        let score = cfg.strength * prod + cfg.bias + cfg.noise_std * noise;
        instances.push(Instance {
            label: u8::from(score > 0.0),
            indices,
        });
    }
    Ok(PlantedData {
        schema,
        instances,
        latent,
    })
}
