//! Undirected graphs, their degree-normalized adjacency, and Rayleigh
//! quotient diagnostics.
//!
//! The quotient is computed two independent ways: the trace form
//! `tr(X^H (I - A_n) X) / ||X||_F^2` is the implementation of record, and
//! the edge-sum form re-derives the same number from per-edge differences.
//! Both stay in the public API so they can be checked against each other;
//! they must never be merged into one code path.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph must have at least one vertex")]
    Empty,
    #[error("edge ({u}, {v}) out of range for {n} vertices")]
    EdgeOutOfRange { u: usize, v: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({u}, {v})")]
    DuplicateEdge { u: usize, v: usize },
    #[error("vertex {0} has degree zero; normalization is undefined")]
    ZeroDegree(usize),
    #[error("feature matrix has {got} rows, expected {expected}")]
    FeatureRows { expected: usize, got: usize },
    #[error("feature matrix is identically zero")]
    ZeroFeatures,
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Simple undirected graph. Edges are stored once, normalized to `u < v`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Validate and normalize an edge list.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut normalized: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::EdgeOutOfRange { u, v, n });
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            normalized.push((u.min(v), u.max(v)));
        }
        normalized.sort_unstable();
        for w in normalized.windows(2) {
            if w[0] == w[1] {
                return Err(GraphError::DuplicateEdge { u: w[0].0, v: w[0].1 });
            }
        }
        Ok(Graph { n, edges: normalized })
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.n];
        for &(u, v) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, GraphError> {
        let raw: Graph = serde_json::from_str(s)?;
        Graph::new(raw.n, raw.edges)
    }
}

/// Degree-normalized adjacency `D^{-1/2} A D^{-1/2}` as a dense symmetric
/// matrix. Every vertex must have at least one neighbor.
pub fn normalized_adjacency(g: &Graph) -> Result<Array2<f64>, GraphError> {
    let d = g.degrees();
    if let Some(v) = d.iter().position(|&x| x == 0) {
        return Err(GraphError::ZeroDegree(v));
    }
    let inv_sqrt: Vec<f64> = d.iter().map(|&x| 1.0 / (x as f64).sqrt()).collect();
    let mut a = Array2::zeros((g.n, g.n));
    for &(u, v) in &g.edges {
        let w = inv_sqrt[u] * inv_sqrt[v];
        a[(u, v)] = w;
        a[(v, u)] = w;
    }
    Ok(a)
}

/// Multiply a real operator into a (possibly complex) feature matrix.
pub fn apply_real<T: Scalar>(a: &Array2<f64>, x: &Array2<T>) -> Array2<T> {
    assert_eq!(a.ncols(), x.nrows(), "operator/feature dimension mismatch");
    let (n, _) = a.dim();
    let d = x.ncols();
    let mut y = Array2::zeros((n, d));
    for i in 0..n {
        for j in 0..a.ncols() {
            let w = a[(i, j)];
            if w != 0.0 {
                let wt = T::from_f64(w);
                for c in 0..d {
                    y[(i, c)] = y[(i, c)] + wt * x[(j, c)];
                }
            }
        }
    }
    y
}

/// Rayleigh quotient in trace form: `tr(X^H (I - A_n) X) / ||X||_F^2`.
///
/// `a_norm` is any symmetric normalized operator (graph or mesh); the value
/// lies in [0, 2] whenever the underlying weights are nonnegative.
pub fn rayleigh_quotient<T: Scalar>(
    a_norm: &Array2<f64>,
    x: &Array2<T>,
) -> Result<f64, GraphError> {
    if a_norm.nrows() != x.nrows() {
        return Err(GraphError::FeatureRows { expected: a_norm.nrows(), got: x.nrows() });
    }
    let denom: f64 = x.iter().map(|v| v.abs2()).sum();
    if denom == 0.0 {
        return Err(GraphError::ZeroFeatures);
    }
    let ax = apply_real(a_norm, x);
    // Re<X, X - A_n X> accumulated entrywise; the imaginary part cancels
    // because A_n is real symmetric.
    let mut num = 0.0;
    for (xv, av) in x.iter().zip(ax.iter()) {
        let diff = *xv - *av;
        num += (xv.conj() * diff).re();
    }
    Ok(num / denom)
}

/// Rayleigh quotient re-derived from per-edge differences:
/// the sum over ordered vertex pairs of
/// `||s(u)/sqrt(d_u) - s(v)/sqrt(d_v)||^2`, halved, over `||X||_F^2`.
/// Each undirected edge appears under both orientations, so the half and
/// the double count cancel.
pub fn rayleigh_quotient_edge_form<T: Scalar>(
    g: &Graph,
    x: &Array2<T>,
) -> Result<f64, GraphError> {
    if g.n != x.nrows() {
        return Err(GraphError::FeatureRows { expected: g.n, got: x.nrows() });
    }
    let denom: f64 = x.iter().map(|v| v.abs2()).sum();
    if denom == 0.0 {
        return Err(GraphError::ZeroFeatures);
    }
    let deg = g.degrees();
    if let Some(v) = deg.iter().position(|&d| d == 0) {
        return Err(GraphError::ZeroDegree(v));
    }
    let inv_sqrt: Vec<f64> = deg.iter().map(|&d| 1.0 / (d as f64).sqrt()).collect();
    let mut num = 0.0;
    for &(u, v) in &g.edges {
        let su = T::from_f64(inv_sqrt[u]);
        let sv = T::from_f64(inv_sqrt[v]);
        for c in 0..x.ncols() {
            let diff = x[(u, c)] * su - x[(v, c)] * sv;
            num += diff.abs2();
        }
    }
    Ok(num / denom)
}

/// Four-neighbor lattice with `rows * cols` vertices, row-major ids.
pub fn grid_graph(rows: usize, cols: usize) -> Result<Graph, GraphError> {
    if rows == 0 || cols == 0 {
        return Err(GraphError::Empty);
    }
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    Graph::new(rows * cols, edges)
}

/// Erdos-Renyi sample with isolated vertices patched by one extra random
/// edge each, so the normalized adjacency always exists.
pub fn gnp_graph<R: rand::Rng>(n: usize, p: f64, rng: &mut R) -> Result<Graph, GraphError> {
    if n < 2 {
        return Err(GraphError::Empty);
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let mut deg = vec![0usize; n];
    for &(u, v) in &edges {
        deg[u] += 1;
        deg[v] += 1;
    }
    for u in 0..n {
        if deg[u] == 0 {
            let mut v = rng.gen_range(0..n - 1);
            if v >= u {
                v += 1;
            }
            edges.push((u.min(v), u.max(v)));
            deg[u] += 1;
            deg[v] += 1;
        }
    }
    Graph::new(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c4() -> Graph {
        Graph::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap()
    }

    #[test]
    fn c4_alternating_vector_hits_the_top_of_the_spectrum() {
        // [1, -1, 1, -1] is the eigenvector of A_n with eigenvalue -1.
        let g = c4();
        let a = normalized_adjacency(&g).unwrap();
        let x = array![[1.0], [-1.0], [1.0], [-1.0]];
        let r = rayleigh_quotient(&a, &x).unwrap();
        assert!((r - 2.0).abs() < 1e-12, "r = {r}");
        let r_edge = rayleigh_quotient_edge_form(&g, &x).unwrap();
        assert!((r_edge - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degree_weighted_constant_is_the_nullspace() {
        // D^{1/2} 1 spans the kernel of I - A_n on any connected graph.
        let g = Graph::new(5, vec![(0, 1), (0, 2), (1, 2), (2, 3), (3, 4)]).unwrap();
        let a = normalized_adjacency(&g).unwrap();
        let d = g.degrees();
        let x = Array2::from_shape_fn((5, 1), |(i, _)| (d[i] as f64).sqrt());
        let r = rayleigh_quotient(&a, &x).unwrap();
        assert!(r.abs() < 1e-12, "r = {r}");
    }

    #[test]
    fn edge_form_matches_trace_form_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for trial in 0..50 {
            let n = 5 + (trial % 20);
            let g = gnp_graph(n, 0.3, &mut rng).unwrap();
            let a = normalized_adjacency(&g).unwrap();
            let x: Array2<Complex64> =
                Array2::from_shape_fn((n, 3), |_| Complex64::standard_normal(&mut rng));
            let r_trace = rayleigh_quotient(&a, &x).unwrap();
            let r_edge = rayleigh_quotient_edge_form(&g, &x).unwrap();
            assert!(
                (r_trace - r_edge).abs() < 1e-12,
                "trial {trial}: trace {r_trace} vs edge {r_edge}"
            );
        }
    }

    #[test]
    fn quotient_is_scale_invariant_including_complex_scales() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let g = gnp_graph(12, 0.4, &mut rng).unwrap();
        let a = normalized_adjacency(&g).unwrap();
        let x: Array2<Complex64> =
            Array2::from_shape_fn((12, 2), |_| Complex64::standard_normal(&mut rng));
        let r = rayleigh_quotient(&a, &x).unwrap();
        let c = Complex64::new(-2.5, 1.75);
        let xc = x.mapv(|v| v * c);
        let rc = rayleigh_quotient(&a, &xc).unwrap();
        assert!((r - rc).abs() < 1e-12);
    }

    #[test]
    fn zero_features_and_row_mismatch_are_rejected() {
        let g = c4();
        let a = normalized_adjacency(&g).unwrap();
        let zero = Array2::<f64>::zeros((4, 2));
        assert!(matches!(rayleigh_quotient(&a, &zero), Err(GraphError::ZeroFeatures)));
        let wrong = Array2::<f64>::ones((5, 2));
        assert!(matches!(rayleigh_quotient(&a, &wrong), Err(GraphError::FeatureRows { .. })));
    }

    #[test]
    fn grid_graph_counts() {
        let g = grid_graph(3, 4).unwrap();
        assert_eq!(g.n, 12);
        assert_eq!(g.edges.len(), 3 * 3 + 2 * 4);
        // Corner vertex has degree 2.
        assert_eq!(g.degrees()[0], 2);
    }

    #[test]
    fn gnp_never_leaves_isolated_vertices() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..30 {
            let g = gnp_graph(15, 0.05, &mut rng).unwrap();
            assert!(g.degrees().iter().all(|&d| d > 0));
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let g = c4();
        let s = g.to_json();
        let back = Graph::from_json(&s).unwrap();
        assert_eq!(g, back);

        let bad = r#"{"n": 3, "edges": [[0, 3]]}"#;
        assert!(matches!(Graph::from_json(bad), Err(GraphError::EdgeOutOfRange { .. })));
        let dup = r#"{"n": 3, "edges": [[0, 1], [1, 0]]}"#;
        assert!(matches!(Graph::from_json(dup), Err(GraphError::DuplicateEdge { .. })));
        let loopy = r#"{"n": 3, "edges": [[2, 2]]}"#;
        assert!(matches!(Graph::from_json(loopy), Err(GraphError::SelfLoop(2))));
        let unknown = r#"{"n": 3, "edges": [], "extra": 1}"#;
        assert!(Graph::from_json(unknown).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// The quotient of any nonzero feature matrix lies in [0, 2].
        #[test]
        fn quotient_stays_in_range(seed in 0u64..1000, n in 4usize..24, d in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = gnp_graph(n, 0.35, &mut rng).unwrap();
            let a = normalized_adjacency(&g).unwrap();
            let x: Array2<f64> = Array2::from_shape_fn((n, d), |_| f64::standard_normal(&mut rng));
            let r = rayleigh_quotient(&a, &x).unwrap();
            prop_assert!((-1e-12..=2.0 + 1e-12).contains(&r), "r = {}", r);
        }
    }
}
