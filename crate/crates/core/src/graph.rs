//! Directed communication topology.
//!
//! Agents are indexed `0..n` internally. Every external format (graph files,
//! CSV/JSON artifacts, the CLI) uses 1-based agent numbers; conversion happens
//! at the boundary in [`Digraph::build`] and in the writers.
//!
//! Edges are stored as `(from, to)` pairs sorted lexicographically. That order
//! defines the canonical edge index used by transcripts, the incidence matrix
//! and the stacked message vector of the eavesdropper analysis.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::DenseMatrix;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph needs more than two agents, got {0}")]
    TooFewAgents(usize),
    #[error("self-loop on agent {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(usize, usize),
    #[error("edge endpoint {endpoint} outside 1..={n}")]
    EndpointOutOfRange { endpoint: usize, n: usize },
    #[error("cannot give every agent {extra} random out-neighbors besides its ring successor with n = {n}")]
    InfeasibleDegree { n: usize, extra: usize },
    #[error("malformed graph file: {0}")]
    Parse(String),
}

/// A directed edge, 0-based. Messages flow from `from` to `to`, so `to` is an
/// out-neighbor of `from`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
}

/// Validated digraph with derived neighbor and incident-edge indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    edges: Vec<Edge>,
    in_neighbors: Vec<Vec<usize>>,
    out_neighbors: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    out_edges: Vec<Vec<usize>>,
}

impl Digraph {
    /// Builds a digraph from 1-based `(from, to)` pairs.
    pub fn build(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n <= 2 {
            return Err(GraphError::TooFewAgents(n));
        }
        let mut zero_based = Vec::with_capacity(edges.len());
        for &(from, to) in edges {
            for endpoint in [from, to] {
                if endpoint == 0 || endpoint > n {
                    return Err(GraphError::EndpointOutOfRange { endpoint, n });
                }
            }
            if from == to {
                return Err(GraphError::SelfLoop(from));
            }
            zero_based.push(Edge {
                from: from - 1,
                to: to - 1,
            });
        }
        Self::from_edges(n, zero_based)
    }

    /// Same as [`Digraph::build`] but for 0-based edges.
    pub fn from_edges(n: usize, mut edges: Vec<Edge>) -> Result<Self, GraphError> {
        if n <= 2 {
            return Err(GraphError::TooFewAgents(n));
        }
        for e in &edges {
            if e.from >= n || e.to >= n {
                return Err(GraphError::EndpointOutOfRange {
                    endpoint: e.from.max(e.to) + 1,
                    n,
                });
            }
            if e.from == e.to {
                return Err(GraphError::SelfLoop(e.from + 1));
            }
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge(w[0].from + 1, w[0].to + 1));
        }

        let mut in_neighbors = vec![Vec::new(); n];
        let mut out_neighbors = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        let mut out_edges = vec![Vec::new(); n];
        for (idx, e) in edges.iter().enumerate() {
            out_neighbors[e.from].push(e.to);
            out_edges[e.from].push(idx);
            in_neighbors[e.to].push(e.from);
            in_edges[e.to].push(idx);
        }
        Ok(Self {
            n,
            edges,
            in_neighbors,
            out_neighbors,
            in_edges,
            out_edges,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_neighbors[i]
    }

    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_neighbors[i]
    }

    /// Indices of edges arriving at `i`, in canonical order.
    pub fn in_edges(&self, i: usize) -> &[usize] {
        &self.in_edges[i]
    }

    /// Indices of edges leaving `i`, in canonical order.
    pub fn out_edges(&self, i: usize) -> &[usize] {
        &self.out_edges[i]
    }

    pub fn max_out_degree(&self) -> usize {
        self.out_neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Canonical index of the edge `from -> to` (0-based), if present.
    pub fn edge_index(&self, from: usize, to: usize) -> Option<usize> {
        self.edges.binary_search(&Edge { from, to }).ok()
    }

    /// Edges as 1-based pairs, in canonical order.
    pub fn edges_one_based(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e.from + 1, e.to + 1)).collect()
    }

    /// Number of strongly connected components (Kosaraju, iterative).
    pub fn scc_count(&self) -> usize {
        let n = self.n;
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        for root in 0..n {
            if visited[root] {
                continue;
            }
            visited[root] = true;
            let mut stack = vec![(root, 0usize)];
            while let Some((v, next)) = stack.pop() {
                let outs = &self.out_neighbors[v];
                if next < outs.len() {
                    stack.push((v, next + 1));
                    let w = outs[next];
                    if !visited[w] {
                        visited[w] = true;
                        stack.push((w, 0));
                    }
                } else {
                    order.push(v);
                }
            }
        }

        let mut component = vec![usize::MAX; n];
        let mut count = 0;
        for &root in order.iter().rev() {
            if component[root] != usize::MAX {
                continue;
            }
            component[root] = count;
            let mut stack = vec![root];
            while let Some(v) = stack.pop() {
                for &w in &self.in_neighbors[v] {
                    if component[w] == usize::MAX {
                        component[w] = count;
                        stack.push(w);
                    }
                }
            }
            count += 1;
        }
        count
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.scc_count() == 1
    }

    /// Signed incidence matrix: +1 at the receiving agent, -1 at the sender.
    pub fn incidence_matrix(&self) -> IncidenceMatrix {
        let cols = self.edges.len();
        let mut entries = vec![0i8; self.n * cols];
        for (e, edge) in self.edges.iter().enumerate() {
            entries[edge.to * cols + e] = 1;
            entries[edge.from * cols + e] = -1;
        }
        IncidenceMatrix {
            rows: self.n,
            cols,
            entries,
            edge_order: self.edges.clone(),
        }
    }

    /// Plain-text format: `n m` on the first line, then `from to` per edge
    /// (1-based).
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for e in &self.edges {
            out.push_str(&format!("{} {}\n", e.from + 1, e.to + 1));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, GraphError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| GraphError::Parse("empty file".into()))?;
        let (n, m) = parse_pair(header)?;
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            edges.push(parse_pair(line)?);
        }
        if edges.len() != m {
            return Err(GraphError::Parse(format!(
                "header announces {m} edges, found {}",
                edges.len()
            )));
        }
        Self::build(n, &edges)
    }
}

fn parse_pair(line: &str) -> Result<(usize, usize), GraphError> {
    let mut it = line.split_whitespace().map(|t| {
        t.parse::<usize>()
            .map_err(|_| GraphError::Parse(format!("bad integer {t:?}")))
    });
    match (it.next(), it.next(), it.next()) {
        (Some(a), Some(b), None) => Ok((a?, b?)),
        _ => Err(GraphError::Parse(format!("expected two integers: {line:?}"))),
    }
}

/// `n x |E|` signed incidence matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<i8>,
    pub edge_order: Vec<Edge>,
}

impl IncidenceMatrix {
    pub fn get(&self, i: usize, e: usize) -> i8 {
        self.entries[i * self.cols + e]
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_row_major(
            self.rows,
            self.cols,
            self.entries.iter().map(|&v| f64::from(v)).collect(),
        )
        .expect("incidence dimensions are consistent")
    }

    /// `R v` for a stacked per-edge vector `v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (e, edge) in self.edge_order.iter().enumerate() {
            out[edge.to] += v[e];
            out[edge.from] -= v[e];
        }
        out
    }
}

/// Directed ring `i -> i+1 (mod n)` plus `extra_out` distinct uniformly random
/// out-neighbors per agent.
pub fn generate_ring_plus_random(n: usize, extra_out: usize, seed: u64) -> Result<Digraph, GraphError> {
    if n <= 2 {
        return Err(GraphError::TooFewAgents(n));
    }
    if extra_out > n - 2 {
        return Err(GraphError::InfeasibleDegree { n, extra: extra_out });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(n * (extra_out + 1));
    for i in 0..n {
        let succ = (i + 1) % n;
        edges.push(Edge { from: i, to: succ });
        // candidates skip i and its ring successor
        for pick in sample(&mut rng, n - 2, extra_out).into_iter() {
            let to = (succ + 1 + pick) % n;
            edges.push(Edge { from: i, to });
        }
    }
    Digraph::from_edges(n, edges)
}

/// The 5-agent test network used throughout the experiments.
///
/// Agent 1 receives from {4, 5} and sends to {2, 4, 5}; agent 2 is its only
/// neighbor outside {4, 5}.
pub fn five_agent_network() -> Digraph {
    Digraph::build(
        5,
        &[
            (1, 2),
            (1, 4),
            (1, 5),
            (2, 3),
            (3, 4),
            (3, 5),
            (4, 1),
            (4, 5),
            (5, 1),
            (5, 2),
        ],
    )
    .expect("static topology is valid")
}

/// Parses a generator spec `ring+k:<n>:<extra>:<seed>`.
pub fn parse_generator_spec(spec: &str) -> Option<Result<Digraph, GraphError>> {
    let rest = spec.strip_prefix("ring+k:")?;
    let parts: Vec<&str> = rest.split(':').collect();
    if parts.len() != 3 {
        return Some(Err(GraphError::Parse(format!("bad generator spec {spec:?}"))));
    }
    let parse = |s: &str| {
        s.parse::<u64>()
            .map_err(|_| GraphError::Parse(format!("bad generator field {s:?}")))
    };
    Some((|| {
        let n = parse(parts[0])? as usize;
        let extra = parse(parts[1])? as usize;
        let seed = parse(parts[2])?;
        generate_ring_plus_random(n, extra, seed)
    })())
}
