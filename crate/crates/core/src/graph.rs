//! Graph representation, validation, dataset-global rescaling and
//! extended-induced-subgraph construction.
//!
//! Graphs here are simple: undirected, weighted, no self-loops. Adjacency is
//! stored dense since the whole pipeline caps out around 25 nodes.

use crate::linalg::{self, repeat_rows_cols};
use ndarray::Array2;
use thiserror::Error;

/// Input tolerance for symmetry checks; accepted matrices are symmetrized so
/// downstream code sees exact symmetry.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Offset added to the largest dataset singular value before inversion when
/// computing the shared scale factor.
pub const SCALE_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("adjacency is not symmetric: |A[{row},{col}] - A[{col},{row}]| = {delta:.3e}")]
    NotSymmetric { row: usize, col: usize, delta: f64 },
    #[error("self-loop at node {node}: diagonal entry {value}")]
    SelfLoop { node: usize, value: f64 },
    #[error("adjacency matrix is empty")]
    EmptyMatrix,
    #[error("dataset contains no graphs")]
    EmptyDataset,
    #[error("photon event has {event_len} modes but the graph has {num_nodes} nodes")]
    LengthMismatch { event_len: usize, num_nodes: usize },
}

/// A validated simple weighted graph.
///
/// The adjacency matrix is exactly symmetric with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Array2<f64>,
}

impl Graph {
    /// Validates and stores an adjacency matrix.
    ///
    /// Asymmetry within [`SYMMETRY_TOLERANCE`] is averaged away; anything
    /// larger is rejected. Any nonzero diagonal entry is a self-loop and is
    /// rejected outright.
    pub fn from_adjacency(adjacency: Array2<f64>) -> Result<Self, GraphError> {
        assert_eq!(
            adjacency.nrows(),
            adjacency.ncols(),
            "adjacency matrix must be square"
        );
        let n = adjacency.nrows();
        if n == 0 {
            return Err(GraphError::EmptyMatrix);
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(GraphError::SelfLoop {
                    node: i,
                    value: adjacency[(i, i)],
                });
            }
            for j in (i + 1)..n {
                let delta = (adjacency[(i, j)] - adjacency[(j, i)]).abs();
                if delta > SYMMETRY_TOLERANCE {
                    return Err(GraphError::NotSymmetric {
                        row: i,
                        col: j,
                        delta,
                    });
                }
            }
        }
        let mut sym = adjacency;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (sym[(i, j)] + sym[(j, i)]);
                sym[(i, j)] = avg;
                sym[(j, i)] = avg;
            }
        }
        Ok(Self { adjacency: sym })
    }

    /// Builds an unweighted graph from an edge list over `n` nodes.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        Self::from_weighted_edges(n, &edges.iter().map(|&(u, v)| (u, v, 1.0)).collect::<Vec<_>>())
    }

    /// Builds a weighted graph from `(u, v, w)` triples over `n` nodes.
    pub fn from_weighted_edges(
        n: usize,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self, GraphError> {
        let mut adjacency = Array2::zeros((n, n));
        for &(u, v, w) in edges {
            assert!(u < n && v < n, "edge endpoint out of range");
            adjacency[(u, v)] = w;
            adjacency[(v, u)] = w;
        }
        Self::from_adjacency(adjacency)
    }

    /// Complete unweighted graph on `n` nodes.
    pub fn complete(n: usize) -> Self {
        let mut adjacency = Array2::ones((n, n));
        for i in 0..n {
            adjacency[(i, i)] = 0.0;
        }
        Self::from_adjacency(adjacency).expect("complete graph is always valid")
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    /// Number of edges with nonzero weight.
    pub fn edge_count(&self) -> usize {
        let n = self.num_nodes();
        let mut count = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.adjacency[(i, j)] != 0.0 {
                    count += 1;
                }
            }
        }
        count
    }

    /// Sum of squared edge weights over unordered pairs.
    pub fn squared_weight_sum(&self) -> f64 {
        let n = self.num_nodes();
        let mut acc = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                acc += self.adjacency[(i, j)] * self.adjacency[(i, j)];
            }
        }
        acc
    }

    /// Largest singular value of the adjacency. For symmetric matrices this
    /// is the largest eigenvalue magnitude, computed by cyclic Jacobi.
    pub fn max_singular_value(&self) -> f64 {
        linalg::spectral_radius(&self.adjacency)
            .expect("Jacobi converges on symmetric adjacency matrices")
    }

    /// Returns a copy with nodes relabelled by `perm` (new index `i` holds
    /// old node `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.num_nodes();
        assert_eq!(perm.len(), n, "permutation length must match node count");
        let mut adjacency = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                adjacency[(i, j)] = self.adjacency[(perm[i], perm[j])];
            }
        }
        Self { adjacency }
    }
}

/// A graph paired with the rescaling constant `c` used for encoding.
///
/// A valid encoding requires `c * s_max < 1`; that bound is enforced where
/// the encoding is built, so that out-of-range scales surface as encoding
/// errors rather than silent clamps. Use [`dataset_scale_factor`] to obtain a
/// `c` shared by a whole dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledGraph {
    graph: Graph,
    scale: f64,
}

impl ScaledGraph {
    pub fn new(graph: Graph, scale: f64) -> Self {
        assert!(scale > 0.0, "scale factor must be positive");
        Self { graph, scale }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    /// `c * A`, the adjacency the encoding actually sees.
    pub fn scaled_adjacency(&self) -> Array2<f64> {
        let mut m = self.graph.adjacency().clone();
        m.mapv_inplace(|x| x * self.scale);
        m
    }

    /// Whether `c * s_max < 1` holds.
    pub fn satisfies_spectral_bound(&self) -> bool {
        self.scale * self.graph.max_singular_value() < 1.0
    }
}

/// Photon counts per detector mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhotonEvent {
    counts: Vec<usize>,
}

impl PhotonEvent {
    pub fn new(counts: Vec<usize>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn num_modes(&self) -> usize {
        self.counts.len()
    }

    /// Total photon number `|n|`.
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Product of per-mode factorials, as `ln(n!)`.
    pub fn log_factorial(&self) -> f64 {
        self.counts
            .iter()
            .map(|&c| (2..=c).map(|k| (k as f64).ln()).sum::<f64>())
            .sum()
    }
}

/// Shared scale factor for a dataset: `min(1, 1 / (max s_max + 1e-8))`.
///
/// The clamp covers edgeless datasets, where `s_max = 0` and any positive
/// scale is valid.
pub fn dataset_scale_factor(graphs: &[Graph]) -> Result<f64, GraphError> {
    if graphs.is_empty() {
        return Err(GraphError::EmptyDataset);
    }
    let max_singular = graphs
        .iter()
        .map(Graph::max_singular_value)
        .fold(0.0f64, f64::max);
    Ok((1.0 / (max_singular + SCALE_MARGIN)).min(1.0))
}

/// Extended induced subgraph `A_n` of the scaled adjacency.
///
/// Row/column `j` of `c * A` appears `counts[j]` times. Copies of the same
/// node inherit the zero diagonal, so they are never connected to each other.
pub fn extended_subgraph(
    g: &ScaledGraph,
    event: &PhotonEvent,
) -> Result<Array2<f64>, GraphError> {
    if event.num_modes() != g.num_nodes() {
        return Err(GraphError::LengthMismatch {
            event_len: event.num_modes(),
            num_nodes: g.num_nodes(),
        });
    }
    Ok(repeat_rows_cols(&g.scaled_adjacency(), event.counts()))
}

/// Doubled adjacency `c (A ⊕ A)`, the 2M x 2M block-diagonal matrix fed to
/// the Gaussian encoding.
pub fn doubled_adjacency(g: &ScaledGraph) -> Array2<f64> {
    let m = g.num_nodes();
    let scaled = g.scaled_adjacency();
    let mut out = Array2::zeros((2 * m, 2 * m));
    for i in 0..m {
        for j in 0..m {
            out[(i, j)] = scaled[(i, j)];
            out[(m + i, m + j)] = scaled[(i, j)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn validates_complete_graph() {
        let g = Graph::complete(3);
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn rejects_self_loop() {
        let m = array![[1.0, 0.0], [0.0, 0.0]];
        assert!(matches!(
            Graph::from_adjacency(m),
            Err(GraphError::SelfLoop { node: 0, .. })
        ));
    }

    #[test]
    fn rejects_asymmetry() {
        let m = array![[0.0, 1.0], [0.0, 0.0]];
        assert!(matches!(
            Graph::from_adjacency(m),
            Err(GraphError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn rejects_empty_matrix() {
        assert_eq!(
            Graph::from_adjacency(Array2::zeros((0, 0))),
            Err(GraphError::EmptyMatrix)
        );
    }

    #[test]
    fn symmetrizes_tolerable_asymmetry() {
        let eps = 1e-13;
        let m = array![[0.0, 1.0 + eps], [1.0, 0.0]];
        let g = Graph::from_adjacency(m).unwrap();
        assert_eq!(g.adjacency()[(0, 1)], g.adjacency()[(1, 0)]);
    }

    #[test]
    fn scale_factor_for_single_edge() {
        // Eigenvalues of [[0,1],[1,0]] are +-1, so s_max = 1.
        let g = Graph::complete(2);
        let c = dataset_scale_factor(&[g]).unwrap();
        assert_abs_diff_eq!(c, 1.0 / (1.0 + SCALE_MARGIN), epsilon = 1e-15);
    }

    #[test]
    fn scale_factor_for_triangle() {
        // Spectral radius of K3 adjacency is 2 (power-iteration oracle below).
        let g = Graph::complete(3);
        let mut v = [1.0f64, 0.7, 0.3];
        let a = g.adjacency();
        let mut radius = 0.0;
        for _ in 0..200 {
            let mut next = [0.0f64; 3];
            for i in 0..3 {
                for j in 0..3 {
                    next[i] += a[(i, j)] * v[j];
                }
            }
            radius = next.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for x in next.iter_mut() {
                *x /= radius;
            }
            v = next;
        }
        assert_abs_diff_eq!(radius, 2.0, epsilon = 1e-9);
        let c = dataset_scale_factor(&[g]).unwrap();
        assert_abs_diff_eq!(c, 1.0 / (2.0 + SCALE_MARGIN), epsilon = 1e-15);
    }

    #[test]
    fn scale_factor_clamps_for_edgeless_dataset() {
        let g = Graph::from_adjacency(Array2::zeros((3, 3))).unwrap();
        assert_eq!(dataset_scale_factor(&[g]).unwrap(), 1.0);
    }

    #[test]
    fn scale_factor_requires_graphs() {
        assert_eq!(dataset_scale_factor(&[]), Err(GraphError::EmptyDataset));
    }

    #[test]
    fn extended_subgraph_identity_event() {
        let g = ScaledGraph::new(Graph::complete(3), 1.0);
        let sub = extended_subgraph(&g, &PhotonEvent::new(vec![1, 1, 1])).unwrap();
        assert_eq!(sub, g.scaled_adjacency());
    }

    #[test]
    fn extended_subgraph_drops_zero_modes() {
        let g = ScaledGraph::new(Graph::complete(3), 1.0);
        let sub = extended_subgraph(&g, &PhotonEvent::new(vec![1, 1, 0])).unwrap();
        assert_eq!(sub, array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn extended_subgraph_keeps_copies_disconnected() {
        let g = ScaledGraph::new(Graph::complete(3), 1.0);
        let sub = extended_subgraph(&g, &PhotonEvent::new(vec![2, 0, 0])).unwrap();
        assert_eq!(sub, Array2::zeros((2, 2)));
    }

    #[test]
    fn extended_subgraph_checks_length() {
        let g = ScaledGraph::new(Graph::complete(3), 1.0);
        assert!(matches!(
            extended_subgraph(&g, &PhotonEvent::new(vec![1, 1])),
            Err(GraphError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn doubled_adjacency_blocks_match() {
        let g = ScaledGraph::new(Graph::complete(2), 0.5);
        let d = doubled_adjacency(&g);
        assert_eq!(d.nrows(), 4);
        assert_eq!(d[(0, 1)], 0.5);
        assert_eq!(d[(2, 3)], 0.5);
        assert_eq!(d[(0, 2)], 0.0);
        assert_eq!(d[(0, 3)], 0.0);
        // Top-left block equals bottom-right block.
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(d[(i, j)], d[(2 + i, 2 + j)]);
            }
        }
    }

    #[test]
    fn doubled_adjacency_of_single_node_is_zero() {
        let g = ScaledGraph::new(
            Graph::from_adjacency(Array2::zeros((1, 1))).unwrap(),
            1.0,
        );
        assert_eq!(doubled_adjacency(&g), Array2::zeros((2, 2)));
    }

    #[test]
    fn photon_event_totals() {
        let e = PhotonEvent::new(vec![2, 0, 3]);
        assert_eq!(e.total(), 5);
        // ln(2! * 0! * 3!) = ln 12
        assert_abs_diff_eq!(e.log_factorial(), 12.0f64.ln(), epsilon = 1e-12);
    }
}
