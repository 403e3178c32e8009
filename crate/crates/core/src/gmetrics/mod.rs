//! Step-level measurements on reasoning graphs.
//!
//! Node-level measures (visitation frequency, degree, betweenness) and their
//! exponential decay fits live in [`rank`]; whole-graph topology metrics in
//! [`global`]; 4-node graphlet census in [`graphlets`].

pub mod global;
pub mod graphlets;
pub mod rank;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use global::{global_metrics, modularity, modularity_partition, GlobalMetrics, Undefined};
pub use graphlets::{graphlet_census, GraphletCensus, GraphletKind};
pub use rank::{
    betweenness, betweenness_centrality, degree, fit_decay, rank_series, smape, visitation_frequency, BetweennessMode,
    DecayFit, RankMeasure, RankSeries,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("decay fit needs at least 2 positive values, got {0}")]
    TooFewPoints(usize),
    #[error("{0}")]
    Domain(String),
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

/// Directed graph over indices `0..n`; `node_ids[i]` is the external id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiGraph {
    node_ids: Vec<usize>,
    out: Vec<Vec<usize>>,
}

impl DiGraph {
    pub fn new(node_ids: Vec<usize>, mut out: Vec<Vec<usize>>) -> Self {
        assert_eq!(node_ids.len(), out.len());
        for o in &mut out {
            o.sort_unstable();
            o.dedup();
        }
        Self { node_ids, out }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut out = vec![Vec::new(); n];
        for (u, v) in edges {
            if u != v {
                out[u].push(v);
            }
        }
        Self::new((0..n).collect(), out)
    }

    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    pub fn node_ids(&self) -> &[usize] {
        &self.node_ids
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    /// Same nodes with every edge present in both directions.
    pub fn symmetrized(&self) -> Self {
        let mut out = self.out.clone();
        for (u, succ) in self.out.iter().enumerate() {
            for &v in succ {
                out[v].push(u);
            }
        }
        Self::new(self.node_ids.clone(), out)
    }
}

/// Undirected simple graph over indices `0..n` with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnGraph {
    node_ids: Vec<usize>,
    adj: Vec<Vec<usize>>,
}

impl UnGraph {
    pub fn new(node_ids: Vec<usize>, adj: Vec<Vec<usize>>) -> Self {
        assert_eq!(node_ids.len(), adj.len());
        Self { node_ids, adj }
    }

    /// Builds from an edge list, ignoring self-loops and duplicates.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adj = vec![BTreeSet::new(); n];
        for (u, v) in edges {
            if u != v {
                adj[u].insert(v);
                adj[v].insert(u);
            }
        }
        Self::new(
            (0..n).collect(),
            adj.into_iter().map(|s| s.into_iter().collect()).collect(),
        )
    }

    pub fn complete(n: usize) -> Self {
        Self::from_edges(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    pub fn path(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn cycle(n: usize) -> Self {
        Self::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn node_ids(&self) -> &[usize] {
        &self.node_ids
    }

    pub fn adj(&self) -> &[Vec<usize>] {
        &self.adj
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, nb)| nb.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    /// Maps index-keyed values back to node ids.
    pub fn keyed<T: Copy>(&self, values: &[T]) -> BTreeMap<usize, T> {
        self.node_ids.iter().copied().zip(values.iter().copied()).collect()
    }
}
