use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Instance;
use crate::error::{config_err, Error, Result};

pub const DEFAULT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];
pub const DEFAULT_SPLIT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<Instance>,
    pub validation: Vec<Instance>,
    pub test: Vec<Instance>,
    pub seed: u64,
    pub ratios: [f64; 3],
}

/// Shuffle with `seed`, then cut into contiguous train/validation/test slices.
pub fn split_dataset(instances: Vec<Instance>, ratios: [f64; 3], seed: u64) -> Result<DatasetSplit> {
    if instances.is_empty() {
        return Err(Error::Evaluation("cannot split an empty dataset".into()));
    }
    if ratios.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(config_err(format!("split ratios must be positive, got {ratios:?}")));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(config_err(format!("split ratios must sum to 1, got {total}")));
    }

    let n = instances.len();
    let n_train = ((n as f64) * ratios[0]).round() as usize;
    let n_train = n_train.min(n);
    let n_val = (((n as f64) * ratios[1]).round() as usize).min(n - n_train);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut slots: Vec<Option<Instance>> = instances.into_iter().map(Some).collect();
    let mut take = |range: std::ops::Range<usize>| -> Vec<Instance> {
        order[range]
            .iter()
            .map(|&i| slots[i].take().expect("each index taken once"))
            .collect()
    };
    let train = take(0..n_train);
    let validation = take(n_train..n_train + n_val);
    let test = take(n_train + n_val..n);

    Ok(DatasetSplit {
        train,
        validation,
        test,
        seed,
        ratios,
    })
}

/// Parse `"0.8,0.1,0.1"` style ratio lists.
pub fn parse_ratios(text: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| config_err(format!("bad split `{text}`: {e}")))?;
    match parts.as_slice() {
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(config_err(format!("split needs three ratios, got `{text}`"))),
    }
}
