use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Instance;

/// A mini-batch in matrix form.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub num_fields: usize,
    /// Row-major `[len, num_fields]` field indices.
    pub indices: Vec<u32>,
    pub labels: Vec<f64>,
    /// Position of each row within the source slice.
    pub positions: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.indices[r * self.num_fields..(r + 1) * self.num_fields]
    }

    pub fn from_instances(instances: &[Instance]) -> Self {
        let positions: Vec<usize> = (0..instances.len()).collect();
        gather(instances, &positions)
    }
}

fn gather(part: &[Instance], positions: &[usize]) -> Batch {
    let num_fields = part.first().map_or(0, |i| i.indices.len());
    let mut indices = Vec::with_capacity(positions.len() * num_fields);
    let mut labels = Vec::with_capacity(positions.len());
    for &p in positions {
        indices.extend_from_slice(&part[p].indices);
        labels.push(f64::from(part[p].label));
    }
    Batch {
        num_fields,
        indices,
        labels,
        positions: positions.to_vec(),
    }
}

/// Iterator over mini-batches of a dataset part.
pub struct Batches<'a> {
    part: &'a [Instance],
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
}

impl Iterator for Batches<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let batch = gather(self.part, &self.order[self.cursor..end]);
        self.cursor = end;
        Some(batch)
    }
}

/// Batches of `batch_size` rows (the last may be short). With a seed the
/// epoch order is a seeded permutation; without one it is the input order.
///
/// Panics if `batch_size` is zero.
pub fn iterate_batches(part: &[Instance], batch_size: usize, shuffle_seed: Option<u64>) -> Batches<'_> {
    assert!(batch_size >= 1, "batch size must be at least 1");
    let mut order: Vec<usize> = (0..part.len()).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Batches {
        part,
        order,
        batch_size,
        cursor: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numbered(n: usize) -> Vec<Instance> {
        (0..n)
            .map(|i| Instance {
                label: (i % 2) as u8,
                indices: vec![i as u32, 1],
            })
            .collect()
    }

    #[test]
    fn five_by_two() {
        let sizes: Vec<usize> = iterate_batches(&numbered(5), 2, Some(1)).map(|b| b.len()).collect();
        assert_eq!(sizes, [2, 2, 1]);
    }

    #[test]
    fn oversized_batch_is_single() {
        let sizes: Vec<usize> = iterate_batches(&numbered(5), 9, None).map(|b| b.len()).collect();
        assert_eq!(sizes, [5]);
    }

    #[test]
    fn concatenation_is_a_seeded_permutation() {
        let data = numbered(23);
        let run = |seed| -> Vec<usize> {
            iterate_batches(&data, 4, Some(seed))
                .flat_map(|b| b.positions)
                .collect()
        };
        let a = run(5);
        assert_eq!(a, run(5));
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..23).collect::<Vec<_>>());
        assert_ne!(a, (0..23).collect::<Vec<_>>());
    }

    #[test]
    fn rows_carry_indices_and_labels() {
        let data = numbered(3);
        let b = iterate_batches(&data, 3, None).next().unwrap();
        assert_eq!(b.row(2), &[2, 1]);
        assert_eq!(b.labels, [0.0, 1.0, 0.0]);
    }
}
