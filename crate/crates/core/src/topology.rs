//! Undirected connected communication graphs.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues below this are treated as the Laplacian's zero eigenvalue.
pub const ZERO_EIGENVALUE_THRESHOLD: f64 = 1e-9;

/// A validated undirected, connected graph on nodes `0..node_count`.
///
/// Edges are stored canonically as `(min, max)` pairs in sorted order and
/// neighbor lists are sorted, so iteration order is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

/// Extreme eigenvalues of the combinatorial Laplacian `D - A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralInfo {
    /// Smallest nonzero eigenvalue.
    pub lambda_min_nonzero: f64,
    pub lambda_max: f64,
    pub max_degree: usize,
}

impl Topology {
    /// Cycle graph on `n >= 3` nodes.
    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidTopology(format!(
                "a ring needs at least 3 nodes, got {n}"
            )));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &edges)
    }

    /// Complete graph on `n >= 2` nodes.
    pub fn complete(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self::from_edges(n, &edges)
    }

    /// Path graph `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidTopology("graph has no nodes".into()));
        }
        let mut canonical = BTreeSet::new();
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidTopology(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidTopology(format!("self-loop at node {a}")));
            }
            if !canonical.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidTopology(format!("duplicate edge ({a}, {b})")));
            }
        }

        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &canonical {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }

        let topology = Self {
            node_count: n,
            edges: canonical.into_iter().collect(),
            neighbors,
        };
        if !topology.is_connected() {
            return Err(Error::InvalidTopology("graph is disconnected".into()));
        }
        Ok(topology)
    }

    /// Parses the edge-list text format: one `i j` pair per line. Blank lines
    /// and `#` comments are skipped. When `node_count` is `None` it is taken
    /// as one more than the largest node id.
    pub fn parse_edge_list(text: &str, node_count: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<_> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|e| Error::Parse {
                    line: lineno + 1,
                    message: format!("bad node id {s:?}: {e}"),
                })
            };
            match fields.as_slice() {
                [a, b] => edges.push((parse(a)?, parse(b)?)),
                _ => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("expected two node ids, got {line:?}"),
                    })
                }
            }
        }
        let n = match node_count {
            Some(n) => n,
            None => edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0),
        };
        Self::from_edges(n, &edges)
    }

    pub fn load_edge_list(path: impl AsRef<Path>, node_count: Option<usize>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_edge_list(&text, node_count)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Number of directed edges, `sum_i d_i`.
    pub fn directed_edge_count(&self) -> usize {
        2 * self.edges.len()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Position of `neighbor` within the sorted neighbor list of `node`.
    pub fn neighbor_slot(&self, node: usize, neighbor: usize) -> Option<usize> {
        self.neighbors[node].binary_search(&neighbor).ok()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.node_count && self.neighbor_slot(a, b).is_some()
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.node_count;
        let mut l = DMatrix::zeros(n, n);
        for (i, list) in self.neighbors.iter().enumerate() {
            l[(i, i)] = list.len() as f64;
            for &j in list {
                l[(i, j)] = -1.0;
            }
        }
        l
    }

    /// Eigenvalue extremes of the Laplacian by dense symmetric eigensolve.
    pub fn spectral_info(&self) -> Result<SpectralInfo> {
        let eig = SymmetricEigen::try_new(self.laplacian(), f64::EPSILON, 10_000)
            .ok_or_else(|| Error::Numeric("Laplacian eigensolver did not converge".into()))?;
        let values = eig.eigenvalues;
        let lambda_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lambda_min_nonzero = values
            .iter()
            .copied()
            .filter(|&v| v > ZERO_EIGENVALUE_THRESHOLD)
            .fold(f64::INFINITY, f64::min);
        if !lambda_min_nonzero.is_finite() {
            return Err(Error::Numeric("Laplacian has no nonzero eigenvalue".into()));
        }
        Ok(SpectralInfo {
            lambda_min_nonzero,
            lambda_max,
            max_degree: self.max_degree(),
        })
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &self.neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

impl SpectralInfo {
    /// Strict upper bound `2 / (r^2 tau lambda_max rho)` on the regularization
    /// weight beta that keeps the consensus recursion contractive.
    pub fn max_beta_bound(&self, r: f64, tau: usize, rho: f64) -> Result<f64> {
        for (name, v) in [("r", r), ("tau", tau as f64), ("rho", rho)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(2.0 / (r * r * tau as f64 * self.lambda_max * rho))
    }
}

/// Parses a topology spec: `ring:N`, `complete:N`, `path:N`, or
/// `edges:PATH` (edge-list file).
pub fn parse_topology_spec(spec: &str) -> Result<Topology> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("topology spec {spec:?} is not KIND:ARG")))?;
    let count = || {
        arg.trim()
            .parse::<usize>()
            .map_err(|e| Error::Config(format!("bad node count in {spec:?}: {e}")))
    };
    match kind.trim() {
        "ring" => Topology::ring(count()?),
        "complete" => Topology::complete(count()?),
        "path" => Topology::path(count()?),
        "edges" => Topology::load_edge_list(arg.trim(), None),
        other => Err(Error::Config(format!("unknown topology kind {other:?}"))),
    }
}
