//! Census of connected induced 4-node subgraphs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::UnGraph;

/// The six connected 4-node shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GraphletKind {
    /// Path, degrees (1,1,2,2).
    G3,
    /// Star, (1,1,1,3).
    G4,
    /// Triangle with a pendant, (1,2,2,3).
    G5,
    /// Cycle, (2,2,2,2).
    G6,
    /// Cycle with one chord, (2,2,3,3).
    G7,
    /// Complete, (3,3,3,3).
    G8,
}

impl GraphletKind {
    pub const ALL: [GraphletKind; 6] = [
        GraphletKind::G3,
        GraphletKind::G4,
        GraphletKind::G5,
        GraphletKind::G6,
        GraphletKind::G7,
        GraphletKind::G8,
    ];

    /// Shape of a connected 4-node graph from its edge count and max degree.
    pub fn classify(edges: usize, max_degree: usize) -> Option<Self> {
        match (edges, max_degree) {
            (3, 2) => Some(GraphletKind::G3),
            (3, 3) => Some(GraphletKind::G4),
            (4, 3) => Some(GraphletKind::G5),
            (4, 2) => Some(GraphletKind::G6),
            (5, _) => Some(GraphletKind::G7),
            (6, _) => Some(GraphletKind::G8),
            _ => None,
        }
    }
}

impl fmt::Display for GraphletKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphletCensus {
    pub counts: BTreeMap<GraphletKind, u64>,
    /// Share of each kind; all zero when there is no connected 4-set.
    pub proportions: BTreeMap<GraphletKind, f64>,
    pub total: u64,
}

impl GraphletCensus {
    pub fn from_counts(counts: BTreeMap<GraphletKind, u64>) -> Self {
        let mut full: BTreeMap<GraphletKind, u64> = GraphletKind::ALL.iter().map(|&k| (k, 0)).collect();
        full.extend(counts);
        let total: u64 = full.values().sum();
        let proportions = full
            .iter()
            .map(|(&k, &c)| (k, if total == 0 { 0.0 } else { c as f64 / total as f64 }))
            .collect();
        GraphletCensus {
            counts: full,
            proportions,
            total,
        }
    }
}

fn classify_set(g: &UnGraph, set: &[usize; 4]) -> Option<GraphletKind> {
    let mut deg = [0usize; 4];
    let mut edges = 0;
    for a in 0..4 {
        for b in a + 1..4 {
            if g.has_edge(set[a], set[b]) {
                deg[a] += 1;
                deg[b] += 1;
                edges += 1;
            }
        }
    }
    GraphletKind::classify(edges, deg.into_iter().max().unwrap_or(0))
}

/// Counts every connected induced 4-node subgraph exactly once.
///
/// Enumeration follows ESU: subgraphs are grown from their smallest vertex
/// `v`, extending only with vertices above `v` that are exclusive neighbours
/// of the newest vertex, which reaches each connected vertex set once.
pub fn graphlet_census(g: &UnGraph) -> GraphletCensus {
    let n = g.len();
    let mut counts = BTreeMap::new();
    if n >= 4 {
        let mut sub = Vec::with_capacity(4);
        for v in 0..n {
            sub.clear();
            sub.push(v);
            let ext: Vec<usize> = g.neighbors(v).iter().copied().filter(|&u| u > v).collect();
            extend(g, v, &mut sub, ext, &mut counts);
        }
    }
    GraphletCensus::from_counts(counts)
}

fn extend(
    g: &UnGraph,
    root: usize,
    sub: &mut Vec<usize>,
    mut ext: Vec<usize>,
    counts: &mut BTreeMap<GraphletKind, u64>,
) {
    if sub.len() == 4 {
        let set = [sub[0], sub[1], sub[2], sub[3]];
        let kind = classify_set(g, &set).expect("ESU yields connected sets");
        *counts.entry(kind).or_default() += 1;
        return;
    }
    while let Some(w) = ext.pop() {
        let mut next = ext.clone();
        for &u in g.neighbors(w) {
            if u <= root || sub.contains(&u) || next.contains(&u) {
                continue;
            }
            // exclusive: not adjacent to anything already in the subgraph
            if sub.iter().any(|&s| g.has_edge(s, u)) {
                continue;
            }
            next.push(u);
        }
        sub.push(w);
        extend(g, root, sub, next, counts);
        sub.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn only(c: &GraphletCensus, kind: GraphletKind) -> bool {
        c.total == 1 && c.counts[&kind] == 1 && c.proportions[&kind] == 1.0
    }

    #[test]
    fn single_shapes() {
        assert!(only(&graphlet_census(&UnGraph::complete(4)), GraphletKind::G8));
        assert!(only(&graphlet_census(&UnGraph::cycle(4)), GraphletKind::G6));
        assert!(only(&graphlet_census(&UnGraph::path(4)), GraphletKind::G3));
        let star = UnGraph::from_edges(4, [(0, 1), (0, 2), (0, 3)]);
        assert!(only(&graphlet_census(&star), GraphletKind::G4));
        let paw = UnGraph::from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)]);
        assert!(only(&graphlet_census(&paw), GraphletKind::G5));
        let diamond = UnGraph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]);
        assert!(only(&graphlet_census(&diamond), GraphletKind::G7));
    }

    #[test]
    fn small_or_disconnected() {
        let c = graphlet_census(&UnGraph::complete(3));
        assert_eq!(c.total, 0);
        assert!(c.proportions.values().all(|&p| p == 0.0));
        assert_eq!(c.counts.len(), 6);
        let two_edges = UnGraph::from_edges(4, [(0, 1), (2, 3)]);
        assert_eq!(graphlet_census(&two_edges).total, 0);
    }

    #[test]
    fn complete_five() {
        // every 4-subset of K5 is K4
        let c = graphlet_census(&UnGraph::complete(5));
        assert_eq!(c.counts[&GraphletKind::G8], 5);
        assert_eq!(c.total, 5);
    }

    #[test]
    fn longer_path_and_cycle() {
        assert_eq!(graphlet_census(&UnGraph::path(7)).counts[&GraphletKind::G3], 4);
        let c = graphlet_census(&UnGraph::cycle(6));
        assert_eq!(c.counts[&GraphletKind::G3], 6);
        assert_eq!(c.total, 6);
    }

    #[test]
    fn serialized_names() {
        let json = serde_json::to_string(&GraphletKind::G5).unwrap();
        assert_eq!(json, "\"G5\"");
        assert_eq!(GraphletKind::G7.to_string(), "G7");
    }
}
