use rand_distr::{Distribution, Normal};

use crate::error::{shape_err, Error, Result};
use crate::numcore::{Grads, ParamStore, Tensor};

pub const EMBEDDING_PREFIX: &str = "emb.";
pub const EMBEDDING_INIT_STD: f64 = 0.01;

/// Per-field embedding matrices stored as `emb.{field}` with shape `[rows, d]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingTable {
    rows: Vec<usize>,
    dim: usize,
    names: Vec<String>,
}

pub fn embedding_name(field: usize) -> String {
    format!("{EMBEDDING_PREFIX}{field}")
}

pub fn is_embedding(name: &str) -> bool {
    name.starts_with(EMBEDDING_PREFIX)
}

impl EmbeddingTable {
    pub fn new(rows: Vec<usize>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(shape_err("embedding size must be at least 1"));
        }
        if rows.contains(&0) {
            return Err(shape_err("every field needs at least one embedding row"));
        }
        let names = (0..rows.len()).map(embedding_name).collect();
        Ok(Self { rows, dim, names })
    }

    pub fn num_fields(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn param_count(&self) -> usize {
        self.rows.iter().sum::<usize>() * self.dim
    }

    pub fn register<R: rand::Rng>(&self, store: &mut ParamStore, rng: &mut R) -> Result<()> {
        let normal = Normal::new(0.0, EMBEDDING_INIT_STD).expect("valid std");
        for (name, &r) in self.names.iter().zip(&self.rows) {
            let data = (0..r * self.dim).map(|_| normal.sample(rng)).collect();
            store.insert(name.clone(), Tensor::new(vec![r, self.dim], data)?)?;
        }
        Ok(())
    }

    /// Concatenated `[m * d]` embeddings of one instance.
    pub fn lookup_into(&self, store: &ParamStore, indices: &[u32], out: &mut Vec<f64>) -> Result<()> {
        if indices.len() != self.rows.len() {
            return Err(shape_err(format!(
                "instance has {} indices, model has {} fields",
                indices.len(),
                self.rows.len()
            )));
        }
        out.clear();
        for (field, (&idx, name)) in indices.iter().zip(&self.names).enumerate() {
            let rows = self.rows[field];
            if idx as usize >= rows {
                return Err(Error::Lookup {
                    field,
                    index: idx,
                    rows,
                });
            }
            let table = store.data(name);
            let start = idx as usize * self.dim;
            out.extend_from_slice(&table[start..start + self.dim]);
        }
        Ok(())
    }

    pub fn lookup(&self, store: &ParamStore, indices: &[u32]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.rows.len() * self.dim);
        self.lookup_into(store, indices, &mut out)?;
        Ok(out)
    }

    /// Add `[m * d]` embedding gradients into the looked-up rows.
    pub fn scatter_grad(&self, grads: &mut Grads, indices: &[u32], demb: &[f64]) {
        for (field, (&idx, name)) in indices.iter().zip(&self.names).enumerate() {
            let g = grads.buf(name);
            let start = idx as usize * self.dim;
            for (gi, &v) in g[start..start + self.dim]
                .iter_mut()
                .zip(&demb[field * self.dim..(field + 1) * self.dim])
            {
                *gi += v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lookup_returns_rows() {
        let table = EmbeddingTable::new(vec![3, 2], 2).unwrap();
        let mut store = ParamStore::new();
        table.register(&mut store, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        store
            .set(
                "emb.0",
                Tensor::new(vec![3, 2], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(),
            )
            .unwrap();
        let e = table.lookup(&store, &[2, 0]).unwrap();
        assert_eq!(&e[..2], &[4.0, 5.0]);
        assert_eq!(&e[2..], store.get("emb.1").unwrap().row(0));
    }

    #[test]
    fn out_of_range_index_is_a_lookup_error() {
        let table = EmbeddingTable::new(vec![3, 2], 2).unwrap();
        let mut store = ParamStore::new();
        table.register(&mut store, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(matches!(
            table.lookup(&store, &[0, 2]),
            Err(Error::Lookup {
                field: 1,
                index: 2,
                rows: 2
            })
        ));
    }

    #[test]
    fn zero_dim_is_rejected() {
        assert!(EmbeddingTable::new(vec![3], 0).is_err());
    }
}
