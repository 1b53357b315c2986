use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::model::Model;

/// Single-instance forward latency in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean: f64,
    pub median: f64,
    pub p99: f64,
}

pub const DEFAULT_BENCH_ITERATIONS: usize = 1000;

/// Time `iterations` single-instance forward passes (embedding lookup
/// included) on the calling thread after an equal-length warm-up.
pub fn bench_latency(model: &Model, iterations: usize) -> Result<LatencyStats> {
    if iterations == 0 {
        return Err(config_err("latency benchmark needs at least one iteration"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let inputs: Vec<Vec<u32>> = (0..64)
        .map(|_| {
            model
                .field_rows()
                .iter()
                .map(|&r| rng.random_range(0..r as u32))
                .collect()
        })
        .collect();
    for k in 0..iterations {
        black_box(model.logit(black_box(&inputs[k % inputs.len()]))?);
    }
    let mut samples = Vec::with_capacity(iterations);
    for k in 0..iterations {
        let input = &inputs[k % inputs.len()];
        let start = Instant::now();
        black_box(model.logit(black_box(input))?);
        samples.push(start.elapsed().as_secs_f64() * 1e6);
    }
    Ok(summarize(&mut samples))
}

fn summarize(samples: &mut [f64]) -> LatencyStats {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    };
    let p99 = samples[((n as f64 * 0.99).ceil() as usize).clamp(1, n) - 1];
    LatencyStats { mean, median, p99 }
}
