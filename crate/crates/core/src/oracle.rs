//! Brute-force oracles for DAG propagation.
//!
//! `S_i^t` is the set of order-`t` interactions whose largest field index
//! (the suffix) is `i`: every non-decreasing index tuple of length `t` ending
//! in `i`. Field indices here are 0-based, so the textbook set
//! `{e1 e3, e2 e3, e3 e3}` is written `{(0, 2), (1, 2), (2, 2)}`.
//!
//! On the full DAG every tuple is exactly one propagation path, so node state
//! `h_i^t` (after `t - 1` propagation layers) is the sum over `S_i^t` of the
//! path products. At identity weights the path product is the plain
//! elementwise product of the member embeddings.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::interactions::phi::{phi_basic_inner_into, phi_inner_into, phi_kernel_into, phi_outer_into};
use crate::interactions::{outer_as_kernel, Dagfm, DagfmSpec, InteractionFn};
use crate::network::Network;
use crate::numcore::{ParamStore, Tensor};

pub const MAX_ORACLE_FIELDS: usize = 6;
pub const MAX_ORACLE_ORDER: usize = 5;
pub const DEVIATION_FLOOR: f64 = 1e-12;
pub const DP_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffixSet {
    pub order: usize,
    pub suffix: usize,
    /// Non-decreasing tuples of length `order` ending in `suffix`, in
    /// lexicographic order.
    pub members: Vec<Vec<usize>>,
}

fn oracle_err(msg: impl Into<String>) -> Error {
    Error::Oracle(msg.into())
}

fn check_caps(m: usize, t: usize) -> Result<()> {
    if m > MAX_ORACLE_FIELDS || t > MAX_ORACLE_ORDER {
        return Err(oracle_err(format!(
            "oracle limited to m <= {MAX_ORACLE_FIELDS}, t <= {MAX_ORACLE_ORDER} (got m = {m}, t = {t})"
        )));
    }
    Ok(())
}

/// Binomial coefficient `C(n, k)`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, j| acc * (n - j) as u64 / (j + 1) as u64)
}

/// `|S_i^t|` for 0-based suffix `i`: `C(i + t - 1, t - 1)`.
pub fn suffix_set_size(t: usize, i: usize) -> u64 {
    binomial(i + t - 1, t - 1)
}

pub fn enumerate_suffix_set(m: usize, t: usize, i: usize) -> Result<SuffixSet> {
    if t == 0 || i >= m {
        return Err(oracle_err(format!(
            "suffix set needs t >= 1 and i < m (m = {m}, t = {t}, i = {i})"
        )));
    }
    check_caps(m, t)?;
    let mut members = Vec::new();
    let mut prefix = Vec::with_capacity(t);
    fill(&mut prefix, t - 1, 0, i, &mut members);
    Ok(SuffixSet {
        order: t,
        suffix: i,
        members,
    })
}

fn fill(prefix: &mut Vec<usize>, remaining: usize, low: usize, suffix: usize, out: &mut Vec<Vec<usize>>) {
    if remaining == 0 {
        let mut tuple = prefix.clone();
        tuple.push(suffix);
        out.push(tuple);
        return;
    }
    for k in low..=suffix {
        prefix.push(k);
        fill(prefix, remaining - 1, k, suffix, out);
        prefix.pop();
    }
}

/// `Σ_{tuple ∈ S_i^t} ⊙_{k ∈ tuple} e_k` for embeddings `emb` (`m * d` values).
pub fn oracle_node_state(emb: &[f64], d: usize, t: usize, i: usize) -> Result<Vec<f64>> {
    let m = emb.len() / d;
    let set = enumerate_suffix_set(m, t, i)?;
    let mut out = vec![0.0; d];
    for tuple in &set.members {
        for (k, o) in out.iter_mut().enumerate() {
            *o += tuple.iter().map(|&f| emb[f * d + k]).product::<f64>();
        }
    }
    Ok(out)
}

/// Sum over `S_i^t` of each tuple's path value: starting from `e_{j_1}`, apply
/// the layer-`s` interaction of edge `(j_{s+1}, j_{s+2})` in turn.
pub fn oracle_path_state(dag: &Dagfm, store: &ParamStore, emb: &[f64], t: usize, i: usize) -> Result<Vec<f64>> {
    let spec = dag.spec();
    let d = spec.dim;
    if t > spec.layers + 1 {
        return Err(oracle_err(format!(
            "order {t} exceeds {} propagation layers",
            spec.layers
        )));
    }
    let set = enumerate_suffix_set(spec.fields, t, i)?;
    let edge_index = |from: usize, to: usize| -> Result<usize> {
        dag.edges()
            .iter()
            .position(|&e| e == (from, to))
            .ok_or_else(|| oracle_err(format!("edge ({from}, {to}) is not in the DAG")))
    };
    let mut out = vec![0.0; d];
    let mut next = vec![0.0; d];
    for tuple in &set.members {
        let mut v = emb[tuple[0] * d..(tuple[0] + 1) * d].to_vec();
        for s in 0..t - 1 {
            let (from, to) = (tuple[s], tuple[s + 1]);
            let e = edge_index(from, to)?;
            let b = &emb[to * d..(to + 1) * d];
            let names = dag.layer_param_names(s);
            match spec.function {
                InteractionFn::BasicInner => phi_basic_inner_into(&v, b, &mut next),
                InteractionFn::Inner => {
                    phi_inner_into(&v, b, &store.get(names[0])?.data()[e * d..(e + 1) * d], &mut next)
                }
                InteractionFn::Kernel => phi_kernel_into(
                    &v,
                    b,
                    &store.get(names[0])?.data()[e * d * d..(e + 1) * d * d],
                    &mut next,
                ),
                InteractionFn::Outer => phi_outer_into(
                    &v,
                    b,
                    &store.get(names[0])?.data()[e * d..(e + 1) * d],
                    &store.get(names[1])?.data()[e * d..(e + 1) * d],
                    &mut next,
                ),
            }
            std::mem::swap(&mut v, &mut next);
        }
        for (o, x) in out.iter_mut().zip(&v) {
            *o += x;
        }
    }
    Ok(out)
}

/// Largest `|a - b| / (|b| + 1e-12)` over paired entries.
pub fn max_relative_deviation(actual: &[f64], oracle: &[f64]) -> f64 {
    actual
        .iter()
        .zip(oracle)
        .map(|(a, o)| (a - o).abs() / (o.abs() + DEVIATION_FLOOR))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpReport {
    pub function: InteractionFn,
    pub fields: usize,
    pub dim: usize,
    pub layers: usize,
    /// True when compared against the path-weighted oracle instead of the
    /// identity-weight oracle.
    pub path_weighted: bool,
    /// `deviations[t][i]` for node `i` after `t` propagation layers.
    pub deviations: Vec<Vec<f64>>,
    pub max_deviation: f64,
}

impl DpReport {
    pub fn passed(&self) -> bool {
        self.max_deviation < DP_TOLERANCE
    }

    /// Text table of per-node, per-layer deviations.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let oracle = if self.path_weighted {
            "path-weighted"
        } else {
            "identity"
        };
        let _ = writeln!(
            s,
            "function={} m={} d={} layers={} oracle={oracle}",
            self.function, self.fields, self.dim, self.layers
        );
        let _ = write!(s, "{:>6}", "node");
        for t in 0..self.deviations.len() {
            let _ = write!(s, " {:>12}", format!("h^{}", t + 1));
        }
        s.push('\n');
        for i in 0..self.fields {
            let _ = write!(s, "{i:>6}");
            for row in &self.deviations {
                let _ = write!(s, " {:>12.3e}", row[i]);
            }
            s.push('\n');
        }
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(
            s,
            "max deviation {:.3e} (tolerance {DP_TOLERANCE:.0e}): {verdict}",
            self.max_deviation
        );
        s
    }
}

fn random_embeddings(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Compare every node state of a DAG with identity weights against the
/// brute-force suffix-set sums.
///
/// Basic-inner, inner and kernel run at their identity weights. A rank-one
/// outer edge cannot hold the identity for `d > 1`, so outer runs at its
/// seeded initial weights and is compared with the path-weighted oracle.
pub fn assert_dp_equivalence(spec: &DagfmSpec, seed: u64) -> Result<DpReport> {
    if !spec.is_full() {
        return Err(oracle_err(
            "DP equivalence holds only for the full DAG; remove the edge mask",
        ));
    }
    check_caps(spec.fields, spec.layers + 1)?;
    let dag = Dagfm::new(spec.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    dag.register(&mut store, &mut rng)?;
    let path_weighted = spec.function == InteractionFn::Outer;
    if !path_weighted {
        dag.set_identity_weights(&mut store)?;
    }
    let (m, d) = (spec.fields, spec.dim);
    let emb = random_embeddings(m * d, &mut rng);
    let (_, trace) = dag.propagate(&store, &emb);
    let mut deviations = Vec::with_capacity(spec.layers + 1);
    for t in 0..=spec.layers {
        let mut row = Vec::with_capacity(m);
        for i in 0..m {
            let oracle = if path_weighted {
                oracle_path_state(&dag, &store, &emb, t + 1, i)?
            } else {
                oracle_node_state(&emb, d, t + 1, i)?
            };
            row.push(max_relative_deviation(trace.state(t, i), &oracle));
        }
        deviations.push(row);
    }
    let max_deviation = deviations.iter().flatten().copied().fold(0.0, f64::max);
    Ok(DpReport {
        function: spec.function,
        fields: m,
        dim: d,
        layers: spec.layers,
        path_weighted,
        deviations,
        max_deviation,
    })
}

/// Propagate with seeded outer weights and with kernel weights `pᵀ q` on
/// the same edges; return the largest relative deviation over all states.
pub fn outer_kernel_deviation(fields: usize, dim: usize, layers: usize, seed: u64) -> Result<f64> {
    let outer = Dagfm::new(DagfmSpec::new(fields, dim, layers, InteractionFn::Outer))?;
    let kernel = Dagfm::new(DagfmSpec::new(fields, dim, layers, InteractionFn::Kernel))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outer_store = ParamStore::new();
    outer.register(&mut outer_store, &mut rng)?;
    let mut kernel_store = ParamStore::new();
    kernel.register(&mut kernel_store, &mut rng)?;
    let edges = outer.edges().len();
    for t in 0..layers {
        let names = outer.layer_param_names(t);
        let p = outer_store.get(names[0])?.data();
        let q = outer_store.get(names[1])?.data();
        let mut w = Vec::with_capacity(edges * dim * dim);
        for e in 0..edges {
            w.extend(outer_as_kernel(&p[e * dim..(e + 1) * dim], &q[e * dim..(e + 1) * dim]));
        }
        kernel_store.set(kernel.layer_param_names(t)[0], Tensor::new(vec![edges, dim, dim], w)?)?;
    }
    let emb = random_embeddings(fields * dim, &mut rng);
    let (_, a) = outer.propagate(&outer_store, &emb);
    let (_, b) = kernel.propagate(&kernel_store, &emb);
    Ok(a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| max_relative_deviation(x, y))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_suffix_set() {
        let s = enumerate_suffix_set(3, 2, 2).unwrap();
        assert_eq!(s.members, vec![vec![0, 2], vec![1, 2], vec![2, 2]]);
        assert_eq!(enumerate_suffix_set(3, 1, 1).unwrap().members, vec![vec![1]]);
        let s3 = enumerate_suffix_set(3, 3, 2).unwrap();
        assert_eq!(
            s3.members,
            vec![
                vec![0, 0, 2],
                vec![0, 1, 2],
                vec![0, 2, 2],
                vec![1, 1, 2],
                vec![1, 2, 2],
                vec![2, 2, 2]
            ]
        );
    }

    #[test]
    fn out_of_range_is_an_error() {
        assert!(enumerate_suffix_set(3, 2, 3).is_err());
        assert!(enumerate_suffix_set(3, 0, 1).is_err());
        assert!(enumerate_suffix_set(7, 2, 1).is_err());
    }

    #[test]
    fn set_sizes_are_stars_and_bars() {
        for m in 1..=MAX_ORACLE_FIELDS {
            for t in 1..=MAX_ORACLE_ORDER {
                for i in 0..m {
                    let s = enumerate_suffix_set(m, t, i).unwrap();
                    assert_eq!(s.members.len() as u64, suffix_set_size(t, i));
                    assert!(s
                        .members
                        .iter()
                        .all(|tu| tu.len() == t && tu.windows(2).all(|w| w[0] <= w[1])));
                }
            }
        }
    }

    #[test]
    fn oracle_node_state_examples() {
        let e = [1.0, 2.0, 3.0];
        assert_eq!(oracle_node_state(&e, 1, 2, 2).unwrap(), vec![18.0]);
        assert_eq!(oracle_node_state(&e, 1, 3, 2).unwrap(), vec![75.0]);
        assert_eq!(oracle_node_state(&e, 1, 1, 1).unwrap(), vec![2.0]);
    }

    #[test]
    fn masked_dag_is_refused() {
        let mut spec = DagfmSpec::new(3, 2, 2, InteractionFn::Inner);
        spec.removed_edges.push((0, 2));
        assert!(matches!(assert_dp_equivalence(&spec, 0), Err(Error::Oracle(_))));
    }

    #[test]
    fn identity_functions_match_dp() {
        for f in [InteractionFn::BasicInner, InteractionFn::Inner, InteractionFn::Kernel] {
            let r = assert_dp_equivalence(&DagfmSpec::new(4, 3, 3, f), 11).unwrap();
            assert!(r.passed(), "{}", r.table());
            assert!(!r.path_weighted);
        }
    }

    #[test]
    fn learned_inner_weights_follow_paths() {
        for m in 1..=3 {
            for layers in 1..=2 {
                let spec = DagfmSpec::new(m.max(2), 2, layers, InteractionFn::Inner);
                let dag = Dagfm::new(spec.clone()).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(m as u64 * 10 + layers as u64);
                let mut store = ParamStore::new();
                dag.register(&mut store, &mut rng).unwrap();
                for t in 0..layers {
                    let name = dag.layer_param_names(t)[0].to_owned();
                    let shape = store.get(&name).unwrap().shape().to_vec();
                    let n = shape.iter().product();
                    store
                        .set(&name, Tensor::new(shape, random_embeddings(n, &mut rng)).unwrap())
                        .unwrap();
                }
                let emb = random_embeddings(spec.fields * 2, &mut rng);
                let (_, trace) = dag.propagate(&store, &emb);
                for t in 0..=layers {
                    for i in 0..spec.fields {
                        let want = oracle_path_state(&dag, &store, &emb, t + 1, i).unwrap();
                        assert!(max_relative_deviation(trace.state(t, i), &want) < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn outer_matches_rank_one_kernel() {
        assert!(outer_kernel_deviation(4, 3, 3, 5).unwrap() < 1e-10);
    }

    #[test]
    fn report_table_mentions_every_node() {
        let r = assert_dp_equivalence(&DagfmSpec::new(3, 1, 2, InteractionFn::Outer), 2).unwrap();
        assert!(r.path_weighted && r.passed());
        let table = r.table();
        assert_eq!(table.lines().count(), 2 + 3 + 1);
        assert!(table.contains("PASS"));
    }
}
