use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{config_err, Result};
use crate::numcore::{dot, vec_mat, Grads, ParamStore, Scalar, Tensor};

/// Fully connected ReLU tower with a scalar output.
///
/// Weights `{prefix}.w.{k}` have shape `[in, out]` and act on row vectors;
/// biases are `{prefix}.b.{k}`. Hidden layers use He initialization and the
/// output layer starts at zero, so a fresh tower contributes nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    sizes: Vec<usize>,
    weights: Vec<String>,
    biases: Vec<String>,
}

/// Layer inputs of one forward pass: `acts[0]` is the tower input and
/// `acts[k]` the post-ReLU output of hidden layer `k - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpCache<S = f64> {
    pub acts: Vec<Vec<S>>,
}

impl Mlp {
    pub fn new(prefix: &str, input: usize, hidden: &[usize]) -> Result<Self> {
        if input == 0 || hidden.contains(&0) {
            return Err(config_err(format!(
                "MLP layer widths must be positive (input {input}, hidden {hidden:?})"
            )));
        }
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes.len() - 1;
        Ok(Self {
            sizes,
            weights: (0..layers).map(|k| format!("{prefix}.w.{k}")).collect(),
            biases: (0..layers).map(|k| format!("{prefix}.b.{k}")).collect(),
        })
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    /// Layer widths including the input and the scalar output.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn weight_name(&self, k: usize) -> &str {
        &self.weights[k]
    }

    pub fn bias_name(&self, k: usize) -> &str {
        &self.biases[k]
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn register<R: Rng>(&self, store: &mut ParamStore, rng: &mut R) -> Result<()> {
        let last = self.num_layers() - 1;
        for k in 0..self.num_layers() {
            let (n_in, n_out) = (self.sizes[k], self.sizes[k + 1]);
            let w = if k == last {
                Tensor::zeros(&[n_in, n_out])
            } else {
                let normal = Normal::new(0.0, (2.0 / n_in as f64).sqrt()).expect("valid std");
                Tensor::new(
                    vec![n_in, n_out],
                    (0..n_in * n_out).map(|_| normal.sample(rng)).collect(),
                )?
            };
            store.insert(self.weights[k].clone(), w)?;
            store.insert(self.biases[k].clone(), Tensor::zeros(&[n_out]))?;
        }
        Ok(())
    }

    /// Check that stored weights match the tower's widths.
    pub fn check_store(&self, store: &ParamStore) -> Result<()> {
        for k in 0..self.num_layers() {
            let want = [self.sizes[k], self.sizes[k + 1]];
            let got = store.get(&self.weights[k])?.shape();
            if got != want {
                return Err(config_err(format!(
                    "MLP weight `{}` has shape {got:?}, expected {want:?}",
                    self.weights[k]
                )));
            }
        }
        Ok(())
    }

    pub fn forward<S: Scalar>(&self, store: &ParamStore, x: &[S]) -> (S, MlpCache<S>) {
        let mut acts = Vec::with_capacity(self.num_layers());
        acts.push(x.to_vec());
        let last = self.num_layers() - 1;
        for k in 0..=last {
            let n_out = self.sizes[k + 1];
            let input = &acts[k];
            let mut z = vec![input[0]; n_out];
            vec_mat(input, store.data(&self.weights[k]), n_out, &mut z);
            for (o, &b) in z.iter_mut().zip(store.data(&self.biases[k])) {
                *o = *o + S::from_f64(b);
            }
            if k == last {
                return (z[0], MlpCache { acts });
            }
            for o in &mut z {
                *o = o.relu();
            }
            acts.push(z);
        }
        unreachable!("an MLP has at least one layer")
    }

    /// Accumulate parameter gradients and add the input gradient into `dx`.
    pub fn backward(&self, store: &ParamStore, cache: &MlpCache<f64>, dout: f64, grads: &mut Grads, dx: &mut [f64]) {
        let mut dz = vec![dout];
        for k in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.sizes[k], self.sizes[k + 1]);
            let a = &cache.acts[k];
            let w = store.data(&self.weights[k]);
            {
                let gw = grads.buf(&self.weights[k]);
                for r in 0..n_in {
                    if a[r] != 0.0 {
                        let row = &mut gw[r * n_out..(r + 1) * n_out];
                        for (g, &d) in row.iter_mut().zip(&dz) {
                            *g += a[r] * d;
                        }
                    }
                }
            }
            for (g, &d) in grads.buf(&self.biases[k]).iter_mut().zip(&dz) {
                *g += d;
            }
            if k == 0 {
                for r in 0..n_in {
                    dx[r] += dot(&w[r * n_out..(r + 1) * n_out], &dz);
                }
            } else {
                dz = (0..n_in)
                    .map(|r| {
                        if a[r] > 0.0 {
                            dot(&w[r * n_out..(r + 1) * n_out], &dz)
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// `Σ 2 · in · out`: the matrix product plus the bias add. ReLU is free.
    pub fn flops(&self) -> u64 {
        self.sizes.windows(2).map(|w| 2 * (w[0] * w[1]) as u64).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fresh_tower_outputs_zero() {
        let mlp = Mlp::new("t", 4, &[3, 2]).unwrap();
        let mut store = ParamStore::new();
        mlp.register(&mut store, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let (out, cache) = mlp.forward(&store, &[1.0, -2.0, 0.5, 3.0]);
        assert_eq!(out, 0.0);
        assert_eq!(cache.acts.len(), 3);
        assert_eq!(mlp.param_count(), 4 * 3 + 3 + 3 * 2 + 2 + 2 + 1);
        assert_eq!(mlp.flops(), 2 * (12 + 6 + 2));
    }

    #[test]
    fn hand_set_single_layer() {
        let mlp = Mlp::new("t", 2, &[]).unwrap();
        let mut store = ParamStore::new();
        mlp.register(&mut store, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        store
            .set("t.w.0", Tensor::new(vec![2, 1], vec![2.0, -1.0]).unwrap())
            .unwrap();
        store.set("t.b.0", Tensor::new(vec![1], vec![0.5]).unwrap()).unwrap();
        let (out, _) = mlp.forward(&store, &[3.0, 4.0]);
        assert_eq!(out, 2.5);
    }

    #[test]
    fn zero_width_is_rejected() {
        assert!(Mlp::new("t", 0, &[2]).is_err());
        assert!(Mlp::new("t", 2, &[0]).is_err());
    }
}
