//! Immutable undirected graphs in CSR form, plus the symmetric adjacency
//! normalization used by graph convolutions.
//!
//! Construction is strict: edges are symmetrized and deduplicated, self-loops
//! in the input are rejected, and every node must end up with at least one
//! neighbor. Self-loops enter only through [`sym_normalize`], which builds
//! `D^{-1/2} (A + I) D^{-1/2}`.

use crate::diffmath::Tensor;
use crate::{Error, Result};

/// Per-node binary attribute with `-1` marking a missing value.
pub type Attr = Vec<i8>;

fn check_attr(name: &str, n: usize, values: &[i8]) -> Result<()> {
    if values.len() != n {
        return Err(Error::Data(format!(
            "{} vector has {} entries for {} nodes",
            name,
            values.len(),
            n
        )));
    }
    if let Some(v) = values.iter().find(|v| !matches!(v, -1 | 0 | 1)) {
        return Err(Error::Data(format!("{} value {} outside {{-1, 0, 1}}", name, v)));
    }
    Ok(())
}

/// An undirected graph with node features and optional binary attributes.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    features: Tensor,
    labels: Option<Attr>,
    sensitive: Option<Attr>,
}

impl Graph {
    /// Builds the CSR structure from an edge list.
    ///
    /// Edges are treated as undirected: both directions are inserted and
    /// duplicates (including reversed duplicates) collapse to one edge.
    /// Errors on out-of-range endpoints, self-loops, non-finite features,
    /// and nodes left without any neighbor.
    pub fn build(n: usize, edges: &[(usize, usize)], features: Tensor) -> Result<Graph> {
        if n == 0 {
            return Err(Error::Graph("graph must have at least one node".into()));
        }
        if features.rows() != n {
            return Err(Error::Graph(format!(
                "feature matrix has {} rows for {} nodes",
                features.rows(),
                n
            )));
        }
        if !features.values_finite() {
            return Err(Error::NonFinite { op: "graph features" });
        }
        let mut pairs = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Graph(format!(
                    "edge ({}, {}) references a node outside 0..{}",
                    u, v, n
                )));
            }
            if u == v {
                return Err(Error::Graph(format!("self-loop at node {}", u)));
            }
            pairs.push((u.min(v), u.max(v)));
        }
        pairs.sort_unstable();
        pairs.dedup();

        let mut degree = vec![0usize; n];
        for &(u, v) in &pairs {
            degree[u] += 1;
            degree[v] += 1;
        }
        if let Some(v) = degree.iter().position(|&d| d == 0) {
            return Err(Error::Graph(format!(
                "node {} has no edges; drop isolated nodes and reindex before loading",
                v
            )));
        }
        let mut indptr = vec![0usize; n + 1];
        for v in 0..n {
            indptr[v + 1] = indptr[v] + degree[v];
        }
        let mut cursor = indptr.clone();
        let mut indices = vec![0usize; indptr[n]];
        for &(u, v) in &pairs {
            indices[cursor[u]] = v;
            cursor[u] += 1;
            indices[cursor[v]] = u;
            cursor[v] += 1;
        }
        // Rows come out sorted because the deduplicated pair list is sorted
        // lexicographically and each row receives its targets in order.
        for v in 0..n {
            debug_assert!(indices[indptr[v]..indptr[v + 1]].windows(2).all(|w| w[0] < w[1]));
        }
        Ok(Graph {
            n,
            indptr,
            indices,
            features,
            labels: None,
            sensitive: None,
        })
    }

    pub fn with_labels(mut self, labels: Attr) -> Result<Graph> {
        check_attr("label", self.n, &labels)?;
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_sensitive(mut self, sensitive: Attr) -> Result<Graph> {
        check_attr("sensitive", self.n, &sensitive)?;
        self.sensitive = Some(sensitive);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn degree(&self, v: usize) -> usize {
        self.indptr[v + 1] - self.indptr[v]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.indices[self.indptr[v]..self.indptr[v + 1]]
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> Option<&Attr> {
        self.labels.as_ref()
    }

    pub fn sensitive(&self) -> Option<&Attr> {
        self.sensitive.as_ref()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.indices.len() / 2
    }

    /// Iterates undirected edges as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| v > u)
                .map(move |&v| (u, v))
        })
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` in CSR form, self-loops included.
#[derive(Clone, Debug, PartialEq)]
pub struct NormAdj {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl NormAdj {
    /// Assembles a normalized adjacency from raw CSR parts, validating the
    /// structure (sorted rows, in-range indices, finite values, symmetry).
    pub fn from_parts(
        n: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<NormAdj> {
        if indptr.len() != n + 1 || indptr[0] != 0 || *indptr.last().unwrap() != indices.len() {
            return Err(Error::Graph("inconsistent CSR index pointers".into()));
        }
        if indices.len() != values.len() {
            return Err(Error::Graph("CSR indices and values differ in length".into()));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { op: "norm_adj values" });
        }
        for i in 0..n {
            let row = &indices[indptr[i]..indptr[i + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Graph(format!("row {} is not strictly increasing", i)));
            }
            if row.iter().any(|&j| j >= n) {
                return Err(Error::Graph(format!("row {} has an out-of-range column", i)));
            }
        }
        let adj = NormAdj {
            n,
            indptr,
            indices,
            values,
        };
        for i in 0..n {
            let (cols, vals) = adj.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                match adj.entry(j, i) {
                    Some(w) if w == v => {}
                    _ => {
                        return Err(Error::Graph(format!(
                            "entry ({}, {}) breaks symmetry",
                            i, j
                        )))
                    }
                }
            }
        }
        Ok(adj)
    }

    /// The n-node identity, i.e. the normalization of a graph with no edges.
    pub fn identity(n: usize) -> NormAdj {
        NormAdj {
            n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    /// Value at `(i, j)` if the entry is structurally present.
    pub fn entry(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }
}

/// Symmetric normalization with self-loops: entry `(i, j)` of `A + I` becomes
/// `1 / sqrt((deg_i + 1)(deg_j + 1))`.
pub fn sym_normalize(g: &Graph) -> NormAdj {
    let n = g.n();
    let dtilde: Vec<f64> = (0..n).map(|v| (g.degree(v) + 1) as f64).collect();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(g.indices().len() + n);
    let mut values = Vec::with_capacity(g.indices().len() + n);
    indptr.push(0);
    for i in 0..n {
        let mut inserted_self = false;
        for &j in g.neighbors(i) {
            if !inserted_self && j > i {
                indices.push(i);
                values.push(1.0 / dtilde[i]);
                inserted_self = true;
            }
            indices.push(j);
            values.push(1.0 / (dtilde[i] * dtilde[j]).sqrt());
        }
        if !inserted_self {
            indices.push(i);
            values.push(1.0 / dtilde[i]);
        }
        indptr.push(indices.len());
    }
    NormAdj {
        n,
        indptr,
        indices,
        values,
    }
}

/// Fraction of undirected edges whose endpoints share the sensitive value.
///
/// Errors if the graph has no sensitive vector or an endpoint is missing it.
pub fn homophily(g: &Graph) -> Result<f64> {
    let s = g
        .sensitive()
        .ok_or_else(|| Error::Data("homophily needs a sensitive vector".into()))?;
    let mut intra = 0usize;
    let mut total = 0usize;
    for (u, v) in g.edges() {
        if s[u] < 0 || s[v] < 0 {
            return Err(Error::Data(format!(
                "edge ({}, {}) has an endpoint without a sensitive value",
                u, v
            )));
        }
        total += 1;
        if s[u] == s[v] {
            intra += 1;
        }
    }
    Ok(intra as f64 / total as f64)
}

/// Ratio of the larger sensitive group to the smaller, over nodes where the
/// attribute is present. Errors if either group is empty.
pub fn group_ratio(g: &Graph) -> Result<f64> {
    let s = g
        .sensitive()
        .ok_or_else(|| Error::Data("group_ratio needs a sensitive vector".into()))?;
    let c1 = s.iter().filter(|&&v| v == 1).count();
    let c0 = s.iter().filter(|&&v| v == 0).count();
    if c0 == 0 || c1 == 0 {
        return Err(Error::Data("group_ratio needs both sensitive groups present".into()));
    }
    Ok(c0.max(c1) as f64 / c0.min(c1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn features(n: usize) -> Tensor {
        Tensor::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap()
    }

    fn line_graph(n: usize) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Graph::build(n, &edges, features(n)).unwrap()
    }

    #[test]
    fn two_node_csr_layout() {
        let g = Graph::build(2, &[(0, 1)], features(2)).unwrap();
        assert_eq!(g.indptr(), &[0, 1, 2]);
        assert_eq!(g.indices(), &[1, 0]);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn duplicate_and_reversed_edges_collapse() {
        let g = Graph::build(3, &[(0, 1), (1, 0), (1, 2), (0, 1)], features(3)).unwrap();
        assert_eq!(g.indptr(), &[0, 1, 3, 4]);
        assert_eq!(g.indices(), &[1, 0, 2, 1]);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            Graph::build(2, &[(0, 2)], features(2)),
            Err(Error::Graph(_))
        ));
        assert!(matches!(
            Graph::build(2, &[(1, 1)], features(2)),
            Err(Error::Graph(_))
        ));
        // Node 2 ends up isolated.
        assert!(matches!(
            Graph::build(3, &[(0, 1)], features(3)),
            Err(Error::Graph(_))
        ));
        let bad = Tensor::zeros(2, 1);
        assert!(Graph::build(3, &[(0, 1), (1, 2)], bad).is_err());
    }

    #[test]
    fn path_graph_normalization_values() {
        let g = line_graph(3);
        let adj = sym_normalize(&g);
        // Degrees 1, 2, 1 so dtilde = 2, 3, 2.
        assert_eq!(adj.entry(0, 0), Some(0.5));
        assert_eq!(adj.entry(0, 1), Some(1.0 / 6.0_f64.sqrt()));
        assert!((adj.entry(0, 1).unwrap() - 0.40825).abs() < 1e-5);
        assert_eq!(adj.entry(1, 1), Some(1.0 / 3.0));
        assert_eq!(adj.entry(2, 2), Some(0.5));
        assert_eq!(adj.entry(0, 2), None);
    }

    #[test]
    fn single_edge_normalization_is_uniform() {
        let g = Graph::build(2, &[(0, 1)], features(2)).unwrap();
        let adj = sym_normalize(&g);
        assert_eq!(adj.nnz(), 4);
        assert!(adj.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn from_parts_validates_symmetry() {
        let ok = NormAdj::from_parts(2, vec![0, 2, 4], vec![0, 1, 0, 1], vec![0.5; 4]);
        assert!(ok.is_ok());
        let bad = NormAdj::from_parts(2, vec![0, 2, 4], vec![0, 1, 0, 1], vec![0.5, 0.4, 0.5, 0.5]);
        assert!(bad.is_err());
    }

    #[test]
    fn identity_rows_are_single_entries() {
        let adj = NormAdj::identity(3);
        assert_eq!(adj.nnz(), 3);
        assert_eq!(adj.entry(1, 1), Some(1.0));
        assert_eq!(adj.entry(0, 1), None);
    }

    #[test]
    fn homophily_counts_intra_edges() {
        let g = Graph::build(4, &[(0, 1), (1, 2), (2, 3)], features(4))
            .unwrap()
            .with_sensitive(vec![1, 1, 0, 0])
            .unwrap();
        // Edges: (0,1) intra, (1,2) inter, (2,3) intra.
        assert!((homophily(&g).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn homophily_requires_sensitive_on_endpoints() {
        let g = line_graph(3).with_sensitive(vec![1, -1, 0]).unwrap();
        assert!(homophily(&g).is_err());
        assert!(homophily(&line_graph(3)).is_err());
    }

    #[test]
    fn group_ratio_examples() {
        let g = line_graph(5).with_sensitive(vec![1, 1, 1, 0, 0]).unwrap();
        assert!((group_ratio(&g).unwrap() - 1.5).abs() < 1e-15);
        let g = line_graph(5).with_sensitive(vec![0, 0, 0, 0, 1]).unwrap();
        assert!((group_ratio(&g).unwrap() - 4.0).abs() < 1e-15);
        let g = line_graph(3).with_sensitive(vec![1, 1, -1]).unwrap();
        assert!(group_ratio(&g).is_err());
    }

    proptest! {
        // Random graphs: normalization stays symmetric (bitwise) and the
        // rescaled row sums hit 1 exactly up to float tolerance:
        // sum_j adjhat[i][j] * sqrt(dtilde_j / dtilde_i) = 1.
        #[test]
        fn normalization_symmetric_and_row_stochastic(
            n in 2usize..40,
            extra in proptest::collection::vec((0usize..40, 0usize..40), 0..120),
        ) {
            let mut edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
            for (a, b) in extra {
                let (a, b) = (a % n, b % n);
                if a != b {
                    edges.push((a, b));
                }
            }
            let g = Graph::build(n, &edges, features(n)).unwrap();
            let adj = sym_normalize(&g);
            let dtilde: Vec<f64> = (0..n).map(|v| (g.degree(v) + 1) as f64).collect();
            for i in 0..n {
                let (cols, vals) = adj.row(i);
                let mut acc = 0.0;
                for (&j, &v) in cols.iter().zip(vals) {
                    prop_assert_eq!(adj.entry(j, i), Some(v));
                    acc += v * (dtilde[j] / dtilde[i]).sqrt();
                }
                prop_assert!((acc - 1.0).abs() < 1e-12);
            }
        }

        // Brute-force recount of homophily and group sizes on random graphs.
        #[test]
        fn homophily_matches_brute_force(
            n in 2usize..30,
            extra in proptest::collection::vec((0usize..30, 0usize..30), 0..80),
            groups in proptest::collection::vec(0i8..2, 30),
        ) {
            let mut edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
            for (a, b) in extra {
                let (a, b) = (a % n, b % n);
                if a != b {
                    edges.push((a, b));
                }
            }
            let s: Vec<i8> = groups[..n].to_vec();
            let g = Graph::build(n, &edges, features(n)).unwrap()
                .with_sensitive(s.clone()).unwrap();
            let mut intra = 0usize;
            let mut total = 0usize;
            let mut seen = std::collections::BTreeSet::new();
            for u in 0..n {
                for &v in g.neighbors(u) {
                    let key = (u.min(v), u.max(v));
                    if seen.insert(key) {
                        total += 1;
                        if s[u] == s[v] {
                            intra += 1;
                        }
                    }
                }
            }
            prop_assert_eq!(homophily(&g).unwrap(), intra as f64 / total as f64);
        }
    }

    #[test]
    fn spectral_radius_of_normalization_at_most_one() {
        // Power iteration on a few small graphs.
        for (n, edges) in [
            (4usize, vec![(0usize, 1usize), (1, 2), (2, 3), (3, 0)]),
            (5, vec![(0, 1), (0, 2), (0, 3), (0, 4), (1, 2)]),
            (3, vec![(0, 1), (1, 2), (0, 2)]),
        ] {
            let g = Graph::build(n, &edges, features(n)).unwrap();
            let adj = sym_normalize(&g);
            let mut x = vec![1.0; n];
            let mut lambda = 0.0;
            for _ in 0..200 {
                let mut y = vec![0.0; n];
                for i in 0..n {
                    let (cols, vals) = adj.row(i);
                    for (&j, &v) in cols.iter().zip(vals) {
                        y[i] += v * x[j];
                    }
                }
                let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                lambda = norm / x.iter().map(|v| v * v).sum::<f64>().sqrt();
                x = y.iter().map(|v| v / norm).collect();
            }
            assert!(lambda <= 1.0 + 1e-9, "spectral radius {} on n={}", lambda, n);
        }
    }
}
