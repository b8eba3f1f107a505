//! Graph value types shared by every statistic, plus edge-list I/O.
//!
//! All graphs are simple, undirected and unweighted, on a common vertex set
//! of `n` labeled vertices (dense 0-based ids). The adjacency is stored both
//! as a bitset (O(1) membership) and as a sorted edge list (O(|E|) scans),
//! so statistic kernels can pick whichever traversal is cheaper.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simple undirected graph: symmetric 0/1 adjacency, zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    bits: Vec<u64>,
    edges: Vec<(u32, u32)>,
}

impl Graph {
    /// Graph with no edges.
    pub fn empty(n: usize) -> Self {
        assert!(n > 0, "vertex count must be positive");
        let words = (n * n + 63) / 64;
        Graph {
            n,
            bits: vec![0; words],
            edges: Vec::new(),
        }
    }

    /// Complete graph K_n.
    pub fn complete(n: usize) -> Self {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self::from_pairs(n, &pairs).expect("complete graph pairs are valid").0
    }

    /// Build from vertex pairs. Duplicate pairs and both orientations collapse
    /// to a single undirected edge; self-loops are dropped and counted.
    ///
    /// Returns the graph and the number of self-loops dropped.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<(Self, usize)> {
        if n == 0 {
            return Err(Error::InvalidParameter("vertex count must be positive".into()));
        }
        let mut g = Graph::empty(n);
        let mut self_loops = 0;
        for &(u, v) in pairs {
            if u >= n {
                return Err(Error::VertexOutOfRange { id: u, n });
            }
            if v >= n {
                return Err(Error::VertexOutOfRange { id: v, n });
            }
            if u == v {
                self_loops += 1;
                continue;
            }
            g.set_edge(u, v);
        }
        g.rebuild_edges();
        Ok((g, self_loops))
    }

    /// Build from a sorted list of (i, j) pairs with i < j, no duplicates.
    pub(crate) fn from_sorted_edges(n: usize, edges: Vec<(u32, u32)>) -> Self {
        let mut g = Graph::empty(n);
        for &(i, j) in &edges {
            debug_assert!(i < j && (j as usize) < n);
            g.set_edge(i as usize, j as usize);
        }
        g.edges = edges;
        g
    }

    /// Set or clear the unordered pair {i, j}; caller must rebuild_edges.
    pub(crate) fn set_pair(&mut self, i: usize, j: usize, present: bool) {
        debug_assert!(i != j);
        if present {
            self.set_edge(i, j);
        } else {
            self.clear_edge(i, j);
        }
    }

    fn bit_index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    fn set_edge(&mut self, i: usize, j: usize) {
        debug_assert!(i != j);
        for (a, b) in [(i, j), (j, i)] {
            let idx = self.bit_index(a, b);
            self.bits[idx / 64] |= 1 << (idx % 64);
        }
    }

    fn clear_edge(&mut self, i: usize, j: usize) {
        for (a, b) in [(i, j), (j, i)] {
            let idx = self.bit_index(a, b);
            self.bits[idx / 64] &= !(1 << (idx % 64));
        }
    }

    /// Flip the adjacency bit of the unordered pair {i, j}.
    pub(crate) fn flip_edge(&mut self, i: usize, j: usize) {
        assert!(i != j, "cannot flip a self-loop");
        if self.has_edge(i, j) {
            self.clear_edge(i, j);
        } else {
            self.set_edge(i, j);
        }
    }

    /// Recompute the sorted edge list from the bitset.
    pub(crate) fn rebuild_edges(&mut self) {
        let mut edges = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.has_edge(i, j) {
                    edges.push((i as u32, j as u32));
                }
            }
        }
        self.edges = edges;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let idx = self.bit_index(i, j);
        self.bits[idx / 64] >> (idx % 64) & 1 == 1
    }

    /// Adjacency entry as a number (0 or 1).
    pub fn adj(&self, i: usize, j: usize) -> f64 {
        if i != j && self.has_edge(i, j) {
            1.0
        } else {
            0.0
        }
    }

    /// Sorted list of edges (i, j) with i < j.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Dense adjacency matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a[(i as usize, j as usize)] = 1.0;
            a[(j as usize, i as usize)] = 1.0;
        }
        a
    }
}

/// Count of unordered pairs where the two adjacencies differ.
pub fn symmetric_difference_count(g: &Graph, h: &Graph) -> Result<usize> {
    if g.n != h.n {
        return Err(Error::DimensionMismatch { left: g.n, right: h.n });
    }
    let diff_bits: usize = g
        .bits
        .iter()
        .zip(&h.bits)
        .map(|(a, b)| (a ^ b).count_ones() as usize)
        .sum();
    // every differing pair is mirrored across the diagonal
    Ok(diff_bits / 2)
}

/// Result of loading an edge list, with input hygiene counters.
#[derive(Debug)]
pub struct LoadReport {
    pub graph: Graph,
    pub self_loops_dropped: usize,
}

/// Load a UTF-8 edge list: one "u v" pair per line, `#`-prefixed comment
/// lines and blank lines ignored. Duplicates and reversed orientations
/// collapse to one undirected edge; self-loops are dropped and counted.
pub fn load_edge_list(path: &Path, n: usize) -> Result<LoadReport> {
    let text = fs::read_to_string(path)?;
    parse_edge_list(&text, n)
}

pub fn parse_edge_list(text: &str, n: usize) -> Result<LoadReport> {
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (u, v) = match (it.next(), it.next(), it.next()) {
            (Some(u), Some(v), None) => (u, v),
            _ => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected two vertex ids, got {line:?}"),
                })
            }
        };
        let parse = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("invalid vertex id {s:?}"),
            })
        };
        pairs.push((parse(u)?, parse(v)?));
    }
    let (graph, self_loops_dropped) = Graph::from_pairs(n, &pairs)?;
    Ok(LoadReport { graph, self_loops_dropped })
}

/// Write a graph in the edge-list format accepted by [`load_edge_list`].
pub fn save_edge_list(graph: &Graph, path: &Path) -> Result<()> {
    let mut out = String::new();
    for &(i, j) in graph.edges() {
        out.push_str(&format!("{i} {j}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Ordered sample of graphs on one shared vertex set.
#[derive(Debug, Clone)]
pub struct GraphPopulation {
    n: usize,
    graphs: Vec<Graph>,
}

impl GraphPopulation {
    pub fn new(graphs: Vec<Graph>) -> Result<Self> {
        let n = match graphs.first() {
            Some(g) => g.n(),
            None => return Err(Error::InvalidParameter("population must contain at least one graph".into())),
        };
        for g in &graphs {
            if g.n() != n {
                return Err(Error::DimensionMismatch { left: n, right: g.n() });
            }
        }
        Ok(GraphPopulation { n, graphs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sample size m.
    pub fn m(&self) -> usize {
        self.graphs.len()
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }
}

/// JSON manifest naming member edge-list files in order.
#[derive(Debug, Serialize, Deserialize)]
pub struct PopulationManifest {
    pub n: usize,
    pub graphs: Vec<String>,
}

/// Load a population manifest; member paths are resolved relative to the
/// manifest's directory.
pub fn load_population_manifest(path: &Path) -> Result<GraphPopulation> {
    let text = fs::read_to_string(path)?;
    let manifest: PopulationManifest =
        serde_json::from_str(&text).map_err(|e| Error::Manifest(e.to_string()))?;
    if manifest.graphs.is_empty() {
        return Err(Error::Manifest("manifest lists no graphs".into()));
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut graphs = Vec::with_capacity(manifest.graphs.len());
    for rel in &manifest.graphs {
        let p = base.join(rel);
        graphs.push(load_edge_list(&p, manifest.n)?.graph);
    }
    GraphPopulation::new(graphs)
}

/// Symmetric matrix of edge probabilities: the P (or Q) of an IER model.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationAdjacency {
    n: usize,
    p: DMatrix<f64>,
}

impl PopulationAdjacency {
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        let n = p.nrows();
        if n == 0 || p.ncols() != n {
            return Err(Error::InvalidParameter("population adjacency must be square and nonempty".into()));
        }
        for i in 0..n {
            if p[(i, i)] != 0.0 {
                return Err(Error::InvalidParameter(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = p[(i, j)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidParameter(format!("entry ({i},{j}) = {v} outside [0,1]")));
                }
                if (v - p[(j, i)]).abs() > 0.0 {
                    return Err(Error::InvalidParameter(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(PopulationAdjacency { n, p })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.p[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }
}

/// Surjective map from vertices to `r` block labels in `0..r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunityPartition {
    labels: Vec<usize>,
    r: usize,
}

impl CommunityPartition {
    /// Validate labels against an explicit block count; every block must be
    /// referenced by at least one vertex.
    pub fn new(labels: Vec<usize>, r: usize) -> Result<Self> {
        if labels.is_empty() || r == 0 {
            return Err(Error::InvalidParameter("partition must be nonempty".into()));
        }
        let mut seen = vec![false; r];
        for (v, &l) in labels.iter().enumerate() {
            if l >= r {
                return Err(Error::InvalidParameter(format!("vertex {v} has label {l} >= r = {r}")));
            }
            seen[l] = true;
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidParameter(format!("block {k} is empty")));
        }
        Ok(CommunityPartition { labels, r })
    }

    /// Build from arbitrary integer labels, compacting them to `0..r` in
    /// order of first appearance.
    pub fn from_raw_labels(raw: &[usize]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidParameter("partition must be nonempty".into()));
        }
        let mut map = BTreeMap::new();
        for &l in raw {
            let next = map.len();
            map.entry(l).or_insert(next);
        }
        let labels = raw.iter().map(|l| map[l]).collect();
        CommunityPartition::new(labels, map.len())
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> usize {
        self.labels[v]
    }

    /// Vertices grouped by block.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.r];
        for (v, &l) in self.labels.iter().enumerate() {
            blocks[l].push(v);
        }
        blocks
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.r];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Additional metadata attached to a test outcome.
pub type Details = BTreeMap<String, serde_json::Value>;

/// Result of one hypothesis test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub details: Details,
}

impl TestOutcome {
    /// `reject` is always derived as `p_value <= alpha`.
    pub fn new(test_name: &str, statistic: f64, p_value: f64, alpha: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&p_value), "p-value {p_value} outside [0,1]");
        TestOutcome {
            test_name: test_name.to_owned(),
            statistic,
            p_value,
            alpha,
            reject: p_value <= alpha,
            details: Details::new(),
        }
    }

    pub fn with_detail(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.details.insert(key.to_owned(), value.into());
        self
    }
}

impl fmt::Display for TestOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: statistic = {:.6}, p = {:.6}, {}",
            self.test_name,
            self.statistic,
            self.p_value,
            if self.reject { "reject" } else { "accept" }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_graph_from_text() {
        let rep = parse_edge_list("0 1\n1 2", 3).unwrap();
        assert_eq!(rep.graph.edge_count(), 2);
        assert!(rep.graph.has_edge(0, 1));
        assert!(rep.graph.has_edge(1, 2));
        assert!(!rep.graph.has_edge(0, 2));
        assert_eq!(rep.self_loops_dropped, 0);
    }

    #[test]
    fn dedup_and_self_loops() {
        let rep = parse_edge_list("0 1\n1 0\n0 0", 2).unwrap();
        assert_eq!(rep.graph.edge_count(), 1);
        assert_eq!(rep.self_loops_dropped, 1);
    }

    #[test]
    fn out_of_range_id() {
        let err = parse_edge_list("0 5", 3).unwrap_err();
        assert!(matches!(err, Error::VertexOutOfRange { id: 5, n: 3 }));
    }

    #[test]
    fn malformed_line_reports_number() {
        let err = parse_edge_list("0 1\nnope", 3).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let rep = parse_edge_list("# header\n\n0 1\n", 2).unwrap();
        assert_eq!(rep.graph.edge_count(), 1);
    }

    #[test]
    fn sym_diff_examples() {
        let empty = Graph::empty(3);
        let tri = Graph::complete(3);
        assert_eq!(symmetric_difference_count(&empty, &empty).unwrap(), 0);
        assert_eq!(symmetric_difference_count(&empty, &tri).unwrap(), 3);
        assert!(symmetric_difference_count(&empty, &Graph::empty(4)).is_err());
    }

    #[test]
    fn partition_compaction() {
        let p = CommunityPartition::from_raw_labels(&[5, 9, 5, 9]).unwrap();
        assert_eq!(p.r(), 2);
        assert_eq!(p.labels(), &[0, 1, 0, 1]);
        assert!(CommunityPartition::new(vec![0, 2], 3).is_err()); // block 1 empty
    }

    #[test]
    fn outcome_reject_rule() {
        let t = TestOutcome::new("t", 1.0, 0.05, 0.05);
        assert!(t.reject);
        let t = TestOutcome::new("t", 1.0, 0.051, 0.05);
        assert!(!t.reject);
    }
}
