//! Per-sample node paths and per-(problem, model) union reasoning graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SampleKey;
use crate::embedspace::NodeAssignment;
use crate::gmetrics::{DiGraph, UnGraph};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node {node} is out of range for {k} centroids")]
    NodeOutOfRange { node: usize, k: usize },
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{file} line {line}: {message}")]
    Parse { file: String, line: usize, message: String },
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

/// Node sequence of one response with consecutive repeats collapsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodePath {
    pub sample: SampleKey,
    pub nodes: Vec<usize>,
}

/// Collapses runs of equal node ids in a position-ordered assignment sequence.
pub fn build_path(sample: SampleKey, node_ids: impl IntoIterator<Item = usize>) -> NodePath {
    let mut nodes: Vec<usize> = Vec::new();
    for id in node_ids {
        if nodes.last() != Some(&id) {
            nodes.push(id);
        }
    }
    NodePath { sample, nodes }
}

/// Groups assignments by sample, orders them by position and builds one
/// path per sample. Output is sorted by sample key.
pub fn paths_from_assignments(assignments: &[NodeAssignment<'_>]) -> Vec<NodePath> {
    let mut by_sample: BTreeMap<&SampleKey, Vec<(usize, usize)>> = BTreeMap::new();
    for a in assignments {
        by_sample
            .entry(&a.chunk.sample)
            .or_default()
            .push((a.chunk.position, a.node_id));
    }
    by_sample
        .into_iter()
        .map(|(key, mut steps)| {
            steps.sort_unstable();
            build_path(key.clone(), steps.into_iter().map(|(_, n)| n))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeInfo {
    pub frequency: u64,
    /// Euclidean distance between the endpoint centroids.
    pub distance: f64,
}

/// Simple directed graph over visited nodes with aggregated transition counts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReasoningGraph {
    pub problem_id: String,
    pub model_id: String,
    pub visits: BTreeMap<usize, u64>,
    pub edges: BTreeMap<(usize, usize), EdgeInfo>,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Union of `paths` as one graph. Counts commute, so path order is irrelevant.
pub fn build_graph(
    problem_id: &str,
    model_id: &str,
    paths: &[NodePath],
    centroids: &[Vec<f64>],
) -> Result<ReasoningGraph> {
    let k = centroids.len();
    let mut g = ReasoningGraph {
        problem_id: problem_id.to_owned(),
        model_id: model_id.to_owned(),
        ..Default::default()
    };
    for path in paths {
        for &v in &path.nodes {
            if v >= k {
                return Err(GraphError::NodeOutOfRange { node: v, k });
            }
            *g.visits.entry(v).or_insert(0) += 1;
        }
        for w in path.nodes.windows(2) {
            let (u, v) = (w[0], w[1]);
            if u == v {
                continue;
            }
            g.edges
                .entry((u, v))
                .or_insert(EdgeInfo {
                    frequency: 0,
                    distance: euclid(&centroids[u], &centroids[v]),
                })
                .frequency += 1;
        }
    }
    Ok(g)
}

impl ReasoningGraph {
    pub fn node_count(&self) -> usize {
        self.visits.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }

    pub fn node_ids(&self) -> Vec<usize> {
        self.visits.keys().copied().collect()
    }

    fn index(&self) -> BTreeMap<usize, usize> {
        self.visits.keys().enumerate().map(|(i, &v)| (v, i)).collect()
    }

    /// Index-based directed view; index `i` is the i-th smallest node id.
    pub fn to_digraph(&self) -> DiGraph {
        let idx = self.index();
        let mut out = vec![Vec::new(); idx.len()];
        for &(u, v) in self.edges.keys() {
            out[idx[&u]].push(idx[&v]);
        }
        DiGraph::new(self.node_ids(), out)
    }

    /// Undirected simple projection: `u - v` whenever `u -> v` or `v -> u`.
    pub fn undirected(&self) -> UnGraph {
        let idx = self.index();
        let mut adj = vec![BTreeSet::new(); idx.len()];
        for &(u, v) in self.edges.keys() {
            let (a, b) = (idx[&u], idx[&v]);
            adj[a].insert(b);
            adj[b].insert(a);
        }
        UnGraph::new(
            self.node_ids(),
            adj.into_iter().map(|s| s.into_iter().collect()).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Graphml,
    Dot,
    EdgeCsv,
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn write_graphml<W: Write>(g: &ReasoningGraph, mut w: W) -> io::Result<()> {
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(w, r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#)?;
    writeln!(
        w,
        r#"  <key id="visits" for="node" attr.name="visit_count" attr.type="long"/>"#
    )?;
    writeln!(
        w,
        r#"  <key id="freq" for="edge" attr.name="frequency" attr.type="long"/>"#
    )?;
    writeln!(
        w,
        r#"  <key id="dist" for="edge" attr.name="distance" attr.type="double"/>"#
    )?;
    writeln!(
        w,
        r#"  <graph id="{}" edgedefault="directed">"#,
        xml_escape(&format!("{}/{}", g.problem_id, g.model_id))
    )?;
    for (v, c) in &g.visits {
        writeln!(w, r#"    <node id="n{v}"><data key="visits">{c}</data></node>"#)?;
    }
    for ((u, v), e) in &g.edges {
        writeln!(
            w,
            r#"    <edge source="n{u}" target="n{v}"><data key="freq">{}</data><data key="dist">{}</data></edge>"#,
            e.frequency, e.distance
        )?;
    }
    writeln!(w, "  </graph>")?;
    writeln!(w, "</graphml>")
}

pub fn write_dot<W: Write>(g: &ReasoningGraph, mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "digraph \"{}/{}\" {{",
        g.problem_id.replace('"', "\\\""),
        g.model_id.replace('"', "\\\"")
    )?;
    for (v, c) in &g.visits {
        writeln!(w, "  {v} [visits={c}];")?;
    }
    for ((u, v), e) in &g.edges {
        writeln!(
            w,
            "  {u} -> {v} [frequency={}, distance={}, penwidth={}];",
            e.frequency,
            e.distance,
            1.0 + (e.frequency as f64).ln()
        )?;
    }
    writeln!(w, "}}")
}

/// Edge and node tables: `src,dst,frequency,distance` and
/// `node_id,visit_count`. Floats use the shortest round-trip representation.
pub fn write_edge_csv<W1: Write, W2: Write>(g: &ReasoningGraph, mut edges: W1, mut nodes: W2) -> io::Result<()> {
    writeln!(edges, "src,dst,frequency,distance")?;
    for ((u, v), e) in &g.edges {
        writeln!(edges, "{u},{v},{},{}", e.frequency, e.distance)?;
    }
    writeln!(nodes, "node_id,visit_count")?;
    for (v, c) in &g.visits {
        writeln!(nodes, "{v},{c}")?;
    }
    Ok(())
}

fn parse_err(file: &str, line: usize, message: impl ToString) -> GraphError {
    GraphError::Parse {
        file: file.to_owned(),
        line,
        message: message.to_string(),
    }
}

fn csv_rows<R: BufRead>(r: R, file: &str, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| parse_err(file, i + 1, e))?;
        if i == 0 {
            if line.trim() != header {
                return Err(parse_err(file, 1, format!("expected header `{header}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        rows.push((i + 1, line.split(',').map(str::to_owned).collect()));
    }
    Ok(rows)
}

/// Inverse of [`write_edge_csv`].
pub fn read_edge_csv<R1: BufRead, R2: BufRead>(
    problem_id: &str,
    model_id: &str,
    edges: R1,
    nodes: R2,
) -> Result<ReasoningGraph> {
    let mut g = ReasoningGraph {
        problem_id: problem_id.to_owned(),
        model_id: model_id.to_owned(),
        ..Default::default()
    };
    for (line, row) in csv_rows(nodes, "nodes", "node_id,visit_count")? {
        if row.len() != 2 {
            return Err(parse_err("nodes", line, "expected 2 columns"));
        }
        let v = row[0].parse().map_err(|e| parse_err("nodes", line, e))?;
        let c = row[1].parse().map_err(|e| parse_err("nodes", line, e))?;
        g.visits.insert(v, c);
    }
    for (line, row) in csv_rows(edges, "edges", "src,dst,frequency,distance")? {
        if row.len() != 4 {
            return Err(parse_err("edges", line, "expected 4 columns"));
        }
        let u = row[0].parse().map_err(|e| parse_err("edges", line, e))?;
        let v = row[1].parse().map_err(|e| parse_err("edges", line, e))?;
        let frequency = row[2].parse().map_err(|e| parse_err("edges", line, e))?;
        let distance = row[3].parse().map_err(|e| parse_err("edges", line, e))?;
        g.edges.insert((u, v), EdgeInfo { frequency, distance });
    }
    Ok(g)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| GraphError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Writes `g` next to `prefix` (`prefix.graphml`, `prefix.dot`, or
/// `prefix.edges.csv` + `prefix.nodes.csv`) and returns the files written.
pub fn export_graph(g: &ReasoningGraph, format: ExportFormat, prefix: &Path) -> Result<Vec<PathBuf>> {
    let with = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    let io_err = |path: &Path| {
        let path = path.to_owned();
        move |source| GraphError::Io { path, source }
    };
    match format {
        ExportFormat::Graphml => {
            let p = with(".graphml");
            let mut w = create(&p)?;
            write_graphml(g, &mut w).and_then(|_| w.flush()).map_err(io_err(&p))?;
            Ok(vec![p])
        }
        ExportFormat::Dot => {
            let p = with(".dot");
            let mut w = create(&p)?;
            write_dot(g, &mut w).and_then(|_| w.flush()).map_err(io_err(&p))?;
            Ok(vec![p])
        }
        ExportFormat::EdgeCsv => {
            let (pe, pn) = (with(".edges.csv"), with(".nodes.csv"));
            let (mut we, mut wn) = (create(&pe)?, create(&pn)?);
            write_edge_csv(g, &mut we, &mut wn)
                .and_then(|_| we.flush())
                .and_then(|_| wn.flush())
                .map_err(io_err(&pe))?;
            Ok(vec![pe, pn])
        }
    }
}

/// Reads back the pair of files written by [`export_graph`] with
/// [`ExportFormat::EdgeCsv`].
pub fn import_edge_csv(problem_id: &str, model_id: &str, prefix: &Path) -> Result<ReasoningGraph> {
    let open = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(ext);
        let p = PathBuf::from(s);
        File::open(&p)
            .map(BufReader::new)
            .map_err(|source| GraphError::Io { path: p, source })
    };
    read_edge_csv(problem_id, model_id, open(".edges.csv")?, open(".nodes.csv")?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn key(i: usize) -> SampleKey {
        SampleKey {
            problem_id: "p".into(),
            model_id: "m".into(),
            sample_index: i,
        }
    }

    fn centroids(k: usize) -> Vec<Vec<f64>> {
        (0..k).map(|i| vec![i as f64, (i * i) as f64 * 0.1]).collect()
    }

    #[test]
    fn path_collapsing() {
        assert_eq!(build_path(key(0), [5, 5, 7, 5]).nodes, [5, 7, 5]);
        assert_eq!(build_path(key(0), [3]).nodes, [3]);
        assert_eq!(build_path(key(0), [2, 2, 2]).nodes, [2]);
        assert!(build_path(key(0), []).nodes.is_empty());
    }

    #[test]
    fn single_path_graph() {
        let g = build_graph("p", "m", &[build_path(key(0), [5, 7, 5])], &centroids(8)).unwrap();
        assert_eq!(g.edges.len(), 2);
        assert_eq!(g.edges[&(5, 7)].frequency, 1);
        assert_eq!(g.edges[&(7, 5)].frequency, 1);
        assert_eq!(g.visits, BTreeMap::from([(5, 2), (7, 1)]));
        let d = g.edges[&(5, 7)].distance;
        assert!((d - (4.0f64 + (4.9f64 - 2.5).powi(2)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn repeated_paths_accumulate() {
        let paths = vec![build_path(key(0), [1, 2]), build_path(key(1), [1, 2])];
        let g = build_graph("p", "m", &paths, &centroids(3)).unwrap();
        assert_eq!(g.edges[&(1, 2)].frequency, 2);
        assert!(build_graph("p", "m", &[], &centroids(3)).unwrap().is_empty());
        assert!(matches!(
            build_graph("p", "m", &[build_path(key(0), [1, 9])], &centroids(3)),
            Err(GraphError::NodeOutOfRange { node: 9, k: 3 })
        ));
    }

    #[test]
    fn csv_headers_only_for_empty_graph() {
        let (mut e, mut n) = (Vec::new(), Vec::new());
        write_edge_csv(&ReasoningGraph::default(), &mut e, &mut n).unwrap();
        assert_eq!(String::from_utf8(e).unwrap(), "src,dst,frequency,distance\n");
        assert_eq!(String::from_utf8(n).unwrap(), "node_id,visit_count\n");
    }

    #[test]
    fn two_node_graph_has_one_edge_row() {
        let g = build_graph("p", "m", &[build_path(key(0), [0, 1])], &centroids(2)).unwrap();
        let (mut e, mut n) = (Vec::new(), Vec::new());
        write_edge_csv(&g, &mut e, &mut n).unwrap();
        assert_eq!(String::from_utf8(e).unwrap().lines().count(), 2);
        let mut x = Vec::new();
        write_graphml(&g, &mut x).unwrap();
        assert!(String::from_utf8(x)
            .unwrap()
            .contains(r#"<edge source="n0" target="n1">"#));
        let mut d = Vec::new();
        write_dot(&g, &mut d).unwrap();
        assert!(String::from_utf8(d).unwrap().contains("0 -> 1 [frequency=1"));
    }

    #[test]
    fn export_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = build_graph(
            "p",
            "m",
            &[build_path(key(0), [0, 3, 1, 3]), build_path(key(1), [2, 0])],
            &centroids(4),
        )
        .unwrap();
        let prefix = dir.path().join("g");
        for f in [ExportFormat::Graphml, ExportFormat::Dot, ExportFormat::EdgeCsv] {
            for p in export_graph(&g, f, &prefix).unwrap() {
                assert!(p.exists());
            }
        }
        assert_eq!(import_edge_csv("p", "m", &prefix).unwrap(), g);
    }

    fn arb_paths() -> impl Strategy<Value = Vec<Vec<usize>>> {
        proptest::collection::vec(proptest::collection::vec(0usize..12, 0..15), 0..10)
    }

    proptest! {
        #[test]
        fn conservation_and_round_trip(raw in arb_paths(), seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let cents: Vec<Vec<f64>> = (0..12).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
            let paths: Vec<NodePath> = raw.iter().enumerate().map(|(i, p)| build_path(key(i), p.iter().copied())).collect();
            let g = build_graph("p", "m", &paths, &cents).unwrap();
            let freq: u64 = g.edges.values().map(|e| e.frequency).sum();
            let steps: usize = paths.iter().map(|p| p.nodes.len().saturating_sub(1)).sum();
            prop_assert_eq!(freq as usize, steps);
            let visits: u64 = g.visits.values().sum();
            prop_assert_eq!(visits as usize, paths.iter().map(|p| p.nodes.len()).sum::<usize>());
            prop_assert!(g.edges.keys().all(|(u, v)| u != v));

            let mut rev = paths.clone();
            rev.reverse();
            prop_assert_eq!(&build_graph("p", "m", &rev, &cents).unwrap(), &g);

            let (mut e, mut n) = (Vec::new(), Vec::new());
            write_edge_csv(&g, &mut e, &mut n).unwrap();
            let back = read_edge_csv("p", "m", e.as_slice(), n.as_slice()).unwrap();
            prop_assert_eq!(back, g.clone());

            let u = g.undirected();
            for (i, nb) in u.adj().iter().enumerate() {
                prop_assert!(!nb.contains(&i));
                prop_assert!(nb.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
