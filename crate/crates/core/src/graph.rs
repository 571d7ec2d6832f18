//! The computation list as a bipartite graph, its random ensembles, and the
//! recovery thresholds of the baseline schemes.
//!
//! Indices are 0-based in memory. File formats use 1-based pairs and convert
//! at the boundary (see [`crate::io`]).

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};

/// Bipartite graph whose edge `(i, j)` requests the product `A_i B_j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ComputationGraph {
    left: usize,
    right: usize,
    edges: BTreeSet<(usize, usize)>,
}

/// Result of [`ComputationGraph::prune_isolated`]: the compacted graph plus
/// the original index of every surviving vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pruned {
    pub graph: ComputationGraph,
    pub left_origin: Vec<usize>,
    pub right_origin: Vec<usize>,
}

impl ComputationGraph {
    pub fn new(left: usize, right: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let edges: BTreeSet<_> = edges.into_iter().collect();
        if let Some(&(i, j)) = edges.iter().find(|&&(i, j)| i >= left || j >= right) {
            return Err(Error::EdgeOutOfRange(i, j));
        }
        Ok(ComputationGraph { left, right, edges })
    }

    /// Builds a graph from 1-based pairs; duplicates are rejected.
    pub fn from_one_based(left: usize, right: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut edges = BTreeSet::new();
        for &(i, j) in pairs {
            if i == 0 || j == 0 || i > left || j > right {
                return Err(Error::EdgeOutOfRange(i, j));
            }
            if !edges.insert((i - 1, j - 1)) {
                return Err(Error::InvalidParams(format!("duplicate edge ({i}, {j})")));
            }
        }
        Ok(ComputationGraph { left, right, edges })
    }

    /// L_A.
    pub fn left_count(&self) -> usize {
        self.left
    }

    /// L_B.
    pub fn right_count(&self) -> usize {
        self.right
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i, j))
    }

    pub fn left_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.left];
        for &(i, _) in &self.edges {
            d[i] += 1;
        }
        d
    }

    pub fn right_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.right];
        for &(_, j) in &self.edges {
            d[j] += 1;
        }
        d
    }

    /// Right neighbours of left vertex `i`, ascending.
    pub fn left_neighbors(&self, i: usize) -> Vec<usize> {
        self.edges.range((i, 0)..(i + 1, 0)).map(|&(_, j)| j).collect()
    }

    /// Left neighbours of right vertex `j`, ascending.
    pub fn right_neighbors(&self, j: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.1 == j).map(|e| e.0).collect()
    }

    pub fn has_isolated(&self) -> bool {
        self.left_degrees().contains(&0) || self.right_degrees().contains(&0)
    }

    /// The same computation list with left and right roles exchanged.
    pub fn transposed(&self) -> ComputationGraph {
        ComputationGraph {
            left: self.right,
            right: self.left,
            edges: self.edges.iter().map(|&(i, j)| (j, i)).collect(),
        }
    }

    /// Drops degree-0 vertices and reindexes the rest compactly.
    pub fn prune_isolated(&self) -> Result<Pruned> {
        if self.edges.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let ld = self.left_degrees();
        let rd = self.right_degrees();
        let left_origin: Vec<usize> = (0..self.left).filter(|&i| ld[i] > 0).collect();
        let right_origin: Vec<usize> = (0..self.right).filter(|&j| rd[j] > 0).collect();
        let remap = |origin: &[usize], n: usize| {
            let mut map = vec![usize::MAX; n];
            for (new, &old) in origin.iter().enumerate() {
                map[old] = new;
            }
            map
        };
        let lmap = remap(&left_origin, self.left);
        let rmap = remap(&right_origin, self.right);
        let graph = ComputationGraph {
            left: left_origin.len(),
            right: right_origin.len(),
            edges: self.edges.iter().map(|&(i, j)| (lmap[i], rmap[j])).collect(),
        };
        Ok(Pruned {
            graph,
            left_origin,
            right_origin,
        })
    }

    /// Recovery thresholds of the baseline schemes.
    pub fn baseline_thresholds(&self) -> BaselineThresholds {
        let poly = self.left * self.right;
        let batch = (2 * self.edges.len()).saturating_sub(1);
        BaselineThresholds {
            poly,
            batch,
            combined: poly.min(batch),
        }
    }
}

/// Thresholds of the schemes that ignore matrix reuse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineThresholds {
    /// Polynomial codes over all `L_A * L_B` pairs.
    pub poly: usize,
    /// LCC / CSA on the duplicated lists: `2|S| - 1`.
    pub batch: usize,
    pub combined: usize,
}

/// Resamples this many times before giving up on drawing a nonempty graph.
pub const MAX_EMPTY_RESAMPLES: usize = 100;

/// Draws from `V_lambda(L_A, L_B)`: each of the `L_A * L_B` edges is present
/// independently with probability `lambda`. Empty draws are redrawn; the
/// result is pruned.
pub fn sample_erdos_renyi<R: Rng + ?Sized>(left: usize, right: usize, lambda: f64, rng: &mut R) -> Result<Pruned> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParams(format!("lambda={lambda} must lie in (0, 1)")));
    }
    if left == 0 || right == 0 {
        return Err(Error::InvalidParams("L_A and L_B must be positive".into()));
    }
    for _ in 0..=MAX_EMPTY_RESAMPLES {
        let mut edges = BTreeSet::new();
        for i in 0..left {
            for j in 0..right {
                if rng.gen_bool(lambda) {
                    edges.insert((i, j));
                }
            }
        }
        if !edges.is_empty() {
            return ComputationGraph { left, right, edges }.prune_isolated();
        }
    }
    Err(Error::EmptyGraph)
}

/// Draws from `V_k(L_A, L_B)`: every left vertex takes a degree uniform on
/// `1..=k` and that many distinct right neighbours uniformly at random. The
/// result is pruned (right vertices may end up isolated).
pub fn sample_bounded_degree<R: Rng + ?Sized>(left: usize, right: usize, k: usize, rng: &mut R) -> Result<Pruned> {
    if k == 0 || k > right {
        return Err(Error::InvalidDegree { k, lb: right });
    }
    if left == 0 {
        return Err(Error::InvalidParams("L_A must be positive".into()));
    }
    let mut edges = BTreeSet::new();
    for i in 0..left {
        let degree = rng.gen_range(1..=k);
        for j in sample(rng, right, degree) {
            edges.insert((i, j));
        }
    }
    ComputationGraph { left, right, edges }.prune_isolated()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::seed::stream_rng;

    /// S = {(1,1),(1,2),(2,2),(2,3)} from the worked example.
    pub(crate) fn worked_example() -> ComputationGraph {
        ComputationGraph::from_one_based(2, 3, &[(1, 1), (1, 2), (2, 2), (2, 3)]).unwrap()
    }

    #[test]
    fn prune_drops_isolated_vertices() {
        let g = ComputationGraph::from_one_based(2, 3, &[(1, 1)]).unwrap();
        let p = g.prune_isolated().unwrap();
        assert_eq!(p.graph.left_count(), 1);
        assert_eq!(p.graph.right_count(), 1);
        assert_eq!(p.graph.edges().iter().copied().collect::<Vec<_>>(), vec![(0, 0)]);
        assert_eq!(p.left_origin, vec![0]);
        assert_eq!(p.right_origin, vec![0]);
    }

    #[test]
    fn prune_keeps_connected_graph() {
        let g = worked_example();
        let p = g.prune_isolated().unwrap();
        assert_eq!(p.graph, g);
        assert_eq!(p.right_origin, vec![0, 1, 2]);
    }

    #[test]
    fn prune_reindexes_middle_vertex() {
        let g = ComputationGraph::from_one_based(3, 3, &[(1, 1), (3, 3)]).unwrap();
        let p = g.prune_isolated().unwrap();
        assert_eq!(
            p.graph.edges().iter().copied().collect::<Vec<_>>(),
            vec![(0, 0), (1, 1)]
        );
        assert_eq!(p.left_origin, vec![0, 2]);
        assert_eq!(p.right_origin, vec![0, 2]);
    }

    #[test]
    fn prune_empty_graph_errors() {
        let g = ComputationGraph::new(2, 2, []).unwrap();
        assert_eq!(g.prune_isolated(), Err(Error::EmptyGraph));
    }

    #[test]
    fn construction_rejects_bad_edges() {
        assert_eq!(
            ComputationGraph::from_one_based(2, 2, &[(3, 1)]),
            Err(Error::EdgeOutOfRange(3, 1))
        );
        assert!(ComputationGraph::from_one_based(2, 2, &[(1, 1), (1, 1)]).is_err());
        assert_eq!(ComputationGraph::new(1, 1, [(0, 1)]), Err(Error::EdgeOutOfRange(0, 1)));
    }

    #[test]
    fn baselines() {
        let g = worked_example();
        let b = g.baseline_thresholds();
        assert_eq!((b.poly, b.batch, b.combined), (6, 7, 6));
        let one = ComputationGraph::from_one_based(1, 1, &[(1, 1)]).unwrap();
        let b = one.baseline_thresholds();
        assert_eq!((b.poly, b.batch, b.combined), (1, 1, 1));
    }

    #[test]
    fn neighbours_and_degrees() {
        let g = worked_example();
        assert_eq!(g.left_degrees(), vec![2, 2]);
        assert_eq!(g.right_degrees(), vec![1, 2, 1]);
        assert_eq!(g.left_neighbors(1), vec![1, 2]);
        assert_eq!(g.right_neighbors(1), vec![0, 1]);
        assert_eq!(g.transposed().transposed(), g);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_erdos_renyi(5, 5, 0.4, &mut stream_rng(1, 0)).unwrap();
        let b = sample_erdos_renyi(5, 5, 0.4, &mut stream_rng(1, 0)).unwrap();
        assert_eq!(a, b);
        let a = sample_bounded_degree(5, 5, 3, &mut stream_rng(9, 4)).unwrap();
        let b = sample_bounded_degree(5, 5, 3, &mut stream_rng(9, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampled_graphs_have_no_isolated_vertices() {
        for t in 0..500 {
            let p = sample_erdos_renyi(6, 4, 0.2, &mut stream_rng(2, t)).unwrap();
            let g = &p.graph;
            assert!(!g.has_isolated());
            assert_eq!(g.left_degrees().iter().sum::<usize>(), g.edge_count());
            assert_eq!(g.right_degrees().iter().sum::<usize>(), g.edge_count());
            let q = sample_bounded_degree(6, 4, 2, &mut stream_rng(3, t)).unwrap();
            assert!(!q.graph.has_isolated());
        }
    }

    #[test]
    fn bounded_degree_k1_gives_single_edges() {
        for t in 0..200 {
            let p = sample_bounded_degree(5, 5, 1, &mut stream_rng(4, t)).unwrap();
            assert_eq!(p.graph.left_count(), 5);
            assert_eq!(p.graph.edge_count(), 5);
            assert!(p.graph.left_degrees().iter().all(|&d| d == 1));
        }
    }

    #[test]
    fn invalid_parameters() {
        let mut rng = stream_rng(0, 0);
        assert_eq!(
            sample_bounded_degree(3, 2, 3, &mut rng),
            Err(Error::InvalidDegree { k: 3, lb: 2 })
        );
        assert!(sample_bounded_degree(3, 2, 0, &mut rng).is_err());
        assert!(sample_erdos_renyi(3, 3, 0.0, &mut rng).is_err());
        assert!(sample_erdos_renyi(3, 3, 1.0, &mut rng).is_err());
    }

    /// Empirical mean of |S| against the binomial mean, 3 sigma.
    #[test]
    fn erdos_renyi_mean_edge_count() {
        let trials = 10_000u64;
        for &(la, lb, lambda) in &[(5usize, 5usize, 0.5f64), (5, 5, 0.4), (4, 7, 0.3)] {
            let n = (la * lb) as f64;
            let sum: usize = (0..trials)
                .map(|t| {
                    sample_erdos_renyi(la, lb, lambda, &mut stream_rng(77, t))
                        .unwrap()
                        .graph
                        .edge_count()
                })
                .sum();
            let mean = sum as f64 / trials as f64;
            let sigma = (n * lambda * (1.0 - lambda) / trials as f64).sqrt();
            // Conditioning on nonemptiness shifts the mean by at most
            // n * lambda * (1-lambda)^n, negligible at these sizes.
            assert!((mean - n * lambda).abs() <= 3.0 * sigma, "mean={mean} lambda={lambda}");
        }
    }

    #[test]
    fn erdos_renyi_slot_frequency() {
        let trials = 10_000u64;
        let lambda = 0.3;
        let mut counts = [[0usize; 3]; 3];
        for t in 0..trials {
            // Sample without pruning to keep slot identities.
            let mut rng = stream_rng(5, t);
            for row in counts.iter_mut() {
                for c in row.iter_mut() {
                    if rng.gen_bool(lambda) {
                        *c += 1;
                    }
                }
            }
        }
        let sigma = (lambda * (1.0 - lambda) / trials as f64).sqrt();
        for row in counts {
            for c in row {
                assert!((c as f64 / trials as f64 - lambda).abs() <= 3.0 * sigma);
            }
        }
    }

    #[test]
    fn bounded_degree_mean_edge_count() {
        let trials = 10_000u64;
        for &(la, lb, k) in &[(5usize, 5usize, 3usize), (10, 5, 4)] {
            let sum: usize = (0..trials)
                .map(|t| {
                    sample_bounded_degree(la, lb, k, &mut stream_rng(8, t))
                        .unwrap()
                        .graph
                        .edge_count()
                })
                .sum();
            let mean = sum as f64 / trials as f64;
            let expected = la as f64 * (1 + k) as f64 / 2.0;
            // Per-vertex degree variance of a discrete uniform on 1..=k.
            let var = la as f64 * ((k * k) as f64 - 1.0) / 12.0;
            let sigma = (var / trials as f64).sqrt();
            assert!(
                (mean - expected).abs() <= 3.0 * sigma,
                "mean={mean} expected={expected}"
            );
        }
    }
}
