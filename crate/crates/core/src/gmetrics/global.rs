//! Whole-graph topology metrics on the undirected simple projection.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MetricsError, Result, UnGraph};

/// Largest graph solved with a dense eigendecomposition.
pub const DENSE_EIGEN_LIMIT: usize = 4096;

/// Why a metric has no value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Undefined {
    /// Fewer nodes than the formula's denominator allows.
    TooFewNodes,
    /// The graph has no edges.
    NoEdges,
    /// Every edge end has the same degree, so the correlation is 0/0.
    ZeroDegreeVariance,
    /// `ln <k> <= 0` or `<k> = 0` in a random-graph baseline.
    DegenerateBaseline,
    /// An input metric of the composite is itself undefined.
    DependsOnUndefined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMetrics {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub edge_density: f64,
    pub clustering_coefficient: Option<f64>,
    pub clustering_coefficient_norm: Option<f64>,
    pub assortativity: Option<f64>,
    pub modularity: Option<f64>,
    pub freeman_centralization: Option<f64>,
    /// Mean shortest-path length over ordered pairs of the largest component.
    pub avg_path_length: Option<f64>,
    pub avg_path_length_norm: Option<f64>,
    /// Share of ordered node pairs with no connecting path.
    pub disconnected_fraction: f64,
    pub global_efficiency: Option<f64>,
    pub algebraic_connectivity: Option<f64>,
    pub small_world_sigma: Option<f64>,
    /// Reason code for every `None` field above, keyed by field name.
    pub undefined: BTreeMap<String, Undefined>,
}

/// Connected components, each sorted, ordered by smallest member.
pub fn components(g: &UnGraph) -> Vec<Vec<usize>> {
    let mut seen = vec![false; g.len()];
    let mut out = Vec::new();
    for s in 0..g.len() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut i = 0;
        while i < comp.len() {
            let v = comp[i];
            i += 1;
            for &w in g.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn bfs_distances(g: &UnGraph, s: usize, dist: &mut [usize], queue: &mut VecDeque<usize>) {
    dist.iter_mut().for_each(|d| *d = usize::MAX);
    dist[s] = 0;
    queue.clear();
    queue.push_back(s);
    while let Some(v) = queue.pop_front() {
        for &w in g.neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
}

/// Mean local clustering, `2 T_i / (k_i (k_i - 1))` per node, 0 when `k_i < 2`.
pub fn average_clustering(g: &UnGraph) -> f64 {
    let n = g.len();
    let mut total = 0.0;
    for v in 0..n {
        let nb = g.neighbors(v);
        let k = nb.len();
        if k < 2 {
            continue;
        }
        let mut tri = 0usize;
        for (a, &x) in nb.iter().enumerate() {
            for &y in &nb[a + 1..] {
                if g.has_edge(x, y) {
                    tri += 1;
                }
            }
        }
        total += (2 * tri) as f64 / (k * (k - 1)) as f64;
    }
    total / n as f64
}

/// Degree assortativity over edges (each undirected edge counted both ways).
pub fn degree_assortativity(g: &UnGraph) -> std::result::Result<f64, Undefined> {
    let m = g.edge_count();
    if m == 0 {
        return Err(Undefined::NoEdges);
    }
    let (mut sjk, mut sj, mut sjj) = (0.0, 0.0, 0.0);
    for (u, v) in g.edges() {
        let (j, k) = (g.degree(u) as f64, g.degree(v) as f64);
        sjk += j * k;
        sj += 0.5 * (j + k);
        sjj += 0.5 * (j * j + k * k);
    }
    let mf = m as f64;
    let mean = sj / mf;
    let num = sjk / mf - mean * mean;
    let den = sjj / mf - mean * mean;
    if den.abs() <= 1e-12 * (sjj / mf) {
        return Err(Undefined::ZeroDegreeVariance);
    }
    Ok(num / den)
}

/// Modularity of `labels` (community label per node index).
pub fn modularity(g: &UnGraph, labels: &[usize]) -> Result<f64> {
    if labels.len() != g.len() {
        return Err(MetricsError::Domain(format!(
            "{} labels for {} nodes",
            labels.len(),
            g.len()
        )));
    }
    let m = g.edge_count();
    if m == 0 {
        return Err(MetricsError::Domain("modularity of a graph without edges".into()));
    }
    let mut inner: BTreeMap<usize, u64> = BTreeMap::new();
    let mut degsum: BTreeMap<usize, u64> = BTreeMap::new();
    for v in 0..g.len() {
        *degsum.entry(labels[v]).or_default() += g.degree(v) as u64;
    }
    for (u, v) in g.edges() {
        if labels[u] == labels[v] {
            *inner.entry(labels[u]).or_default() += 1;
        }
    }
    let mf = m as f64;
    Ok(degsum
        .iter()
        .map(|(c, &d)| {
            let l = inner.get(c).copied().unwrap_or(0) as f64;
            let a = d as f64 / (2.0 * mf);
            l / mf - a * a
        })
        .sum())
}

/// Greedy agglomerative modularity maximisation (Clauset-Newman-Moore).
///
/// Each step merges the adjacent community pair with the largest gain
/// `dQ = (2m E_ij - D_i D_j) / (2 m^2)`, compared exactly in integers; ties go
/// to the smallest `(i, j)` community-id pair, where a community's id is its
/// smallest member. Stops when no merge has positive gain. Labels are
/// renumbered `0..` in order of first node.
pub fn modularity_partition(g: &UnGraph) -> Vec<usize> {
    let n = g.len();
    let m = g.edge_count() as i128;
    let mut label: Vec<usize> = (0..n).collect();
    if m == 0 {
        return label;
    }
    let mut deg: Vec<i128> = (0..n).map(|v| g.degree(v) as i128).collect();
    // between[c][d] = number of edges joining communities c and d
    let mut between: Vec<BTreeMap<usize, i128>> = vec![BTreeMap::new(); n];
    for (u, v) in g.edges() {
        *between[u].entry(v).or_default() += 1;
        *between[v].entry(u).or_default() += 1;
    }
    let mut members: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    loop {
        let mut best: Option<(i128, usize, usize)> = None;
        for (i, row) in between.iter().enumerate() {
            for (&j, &e) in row.range(i + 1..) {
                let gain = 2 * m * e - deg[i] * deg[j];
                let better = match best {
                    None => true,
                    Some((bg, bi, bj)) => gain > bg || (gain == bg && (i, j) < (bi, bj)),
                };
                if better {
                    best = Some((gain, i, j));
                }
            }
        }
        let Some((gain, i, j)) = best else { break };
        if gain <= 0 {
            break;
        }
        // fold j into i (i < j keeps the smallest-member id)
        let row_j = std::mem::take(&mut between[j]);
        for (k, e) in row_j {
            between[k].remove(&j);
            if k == i {
                continue;
            }
            *between[i].entry(k).or_default() += e;
            *between[k].entry(i).or_default() += e;
        }
        deg[i] += deg[j];
        deg[j] = 0;
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);
    }
    for (c, ms) in members.iter().enumerate() {
        for &v in ms {
            label[v] = c;
        }
    }
    relabel(&label)
}

fn relabel(labels: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// `sum_i (d_max - d_i) / ((n-1)(n-2))`.
pub fn freeman_centralization(g: &UnGraph) -> std::result::Result<f64, Undefined> {
    let n = g.len();
    if n < 3 {
        return Err(Undefined::TooFewNodes);
    }
    let degs: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let dmax = degs.iter().copied().max().unwrap_or(0);
    let s: usize = degs.iter().map(|&d| dmax - d).sum();
    Ok(s as f64 / ((n - 1) * (n - 2)) as f64)
}

/// Second-smallest Laplacian eigenvalue; exactly 0 when disconnected.
pub fn algebraic_connectivity(g: &UnGraph) -> std::result::Result<f64, Undefined> {
    let n = g.len();
    if n < 2 {
        return Err(Undefined::TooFewNodes);
    }
    if components(g).len() > 1 {
        return Ok(0.0);
    }
    if n <= DENSE_EIGEN_LIMIT {
        Ok(fiedler_dense(g))
    } else {
        Ok(fiedler_iterative(g, 1e-8))
    }
}

fn laplacian(g: &UnGraph) -> DMatrix<f64> {
    let n = g.len();
    let mut l = DMatrix::zeros(n, n);
    for v in 0..n {
        l[(v, v)] = g.degree(v) as f64;
        for &w in g.neighbors(v) {
            l[(v, w)] = -1.0;
        }
    }
    l
}

fn fiedler_dense(g: &UnGraph) -> f64 {
    let mut ev: Vec<f64> = SymmetricEigen::new(laplacian(g)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev[1].max(0.0)
}

fn lap_mul(g: &UnGraph, x: &[f64], y: &mut [f64]) {
    for v in 0..g.len() {
        let mut s = g.degree(v) as f64 * x[v];
        for &w in g.neighbors(v) {
            s -= x[w];
        }
        y[v] = s;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn deflate(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

fn normalize(x: &mut [f64]) {
    let norm = dot(x, x).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
}

/// Conjugate gradient for `L x = b` with `b` orthogonal to the ones vector.
fn cg_solve(g: &UnGraph, b: &[f64], x: &mut [f64]) {
    let n = b.len();
    x.iter_mut().for_each(|v| *v = 0.0);
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let stop = rr * 1e-28;
    for _ in 0..10 * n {
        if rr <= stop {
            break;
        }
        lap_mul(g, &p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        deflate(&mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
}

/// Inverse iteration on the Laplacian restricted to the complement of the
/// ones vector, for connected graphs too large for a dense solve.
///
/// Stops when successive Rayleigh quotients differ by at most `tol`.
pub fn fiedler_iterative(g: &UnGraph, tol: f64) -> f64 {
    let n = g.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    deflate(&mut x);
    normalize(&mut x);
    let mut y = vec![0.0; n];
    let mut lx = vec![0.0; n];
    let mut lambda = f64::INFINITY;
    for _ in 0..1000 {
        cg_solve(g, &x, &mut y);
        deflate(&mut y);
        normalize(&mut y);
        std::mem::swap(&mut x, &mut y);
        lap_mul(g, &x, &mut lx);
        let next = dot(&x, &lx);
        let done = (next - lambda).abs() <= tol;
        lambda = next;
        if done {
            break;
        }
    }
    lambda.max(0.0)
}

struct PathStats {
    /// Sum of distances and number of ordered pairs inside the largest component.
    lcc_sum: u64,
    lcc_n: usize,
    lcc_edges: usize,
    inv_sum: f64,
    unreachable: u64,
}

fn path_stats(g: &UnGraph) -> PathStats {
    let n = g.len();
    let comps = components(g);
    let lcc = comps
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
        .map(|(_, c)| c.clone())
        .unwrap_or_default();
    let mut in_lcc = vec![false; n];
    lcc.iter().for_each(|&v| in_lcc[v] = true);
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    let mut stats = PathStats {
        lcc_sum: 0,
        lcc_n: lcc.len(),
        lcc_edges: lcc.iter().map(|&v| g.degree(v)).sum::<usize>() / 2,
        inv_sum: 0.0,
        unreachable: 0,
    };
    for s in 0..n {
        bfs_distances(g, s, &mut dist, &mut queue);
        for (t, &d) in dist.iter().enumerate() {
            if t == s {
                continue;
            }
            if d == usize::MAX {
                stats.unreachable += 1;
            } else {
                stats.inv_sum += 1.0 / d as f64;
                if in_lcc[s] {
                    stats.lcc_sum += d as u64;
                }
            }
        }
    }
    stats
}

fn note(
    undefined: &mut BTreeMap<String, Undefined>,
    field: &str,
    r: std::result::Result<f64, Undefined>,
) -> Option<f64> {
    r.map_err(|u| undefined.insert(field.to_string(), u)).ok()
}

/// All global metrics of an undirected graph.
///
/// Baselines for the normalized fields: `C_rand = <k>/n` over the whole graph
/// and `L_rand = ln n / ln <k>` over the largest connected component, the
/// same component the path length is measured on.
pub fn global_metrics(g: &UnGraph) -> Result<GlobalMetrics> {
    let n = g.len();
    if n == 0 {
        return Err(MetricsError::EmptyGraph);
    }
    let m = g.edge_count();
    let mut undefined = BTreeMap::new();
    let pairs = (n * (n - 1)) as f64;
    let edge_density = if n < 2 { 0.0 } else { 2.0 * m as f64 / pairs };

    let clustering = average_clustering(g);
    let mean_k = 2.0 * m as f64 / n as f64;
    let clustering_norm = if mean_k > 0.0 {
        Ok(clustering / (mean_k / n as f64))
    } else {
        Err(Undefined::DegenerateBaseline)
    };

    let modularity_r = if m == 0 {
        Err(Undefined::NoEdges)
    } else {
        Ok(modularity(g, &modularity_partition(g))?)
    };

    let ps = path_stats(g);
    let apl = if ps.lcc_n < 2 {
        Err(Undefined::TooFewNodes)
    } else {
        Ok(ps.lcc_sum as f64 / (ps.lcc_n * (ps.lcc_n - 1)) as f64)
    };
    let lcc_k = 2.0 * ps.lcc_edges as f64 / ps.lcc_n as f64;
    let apl_norm = match apl {
        Err(_) => Err(Undefined::DependsOnUndefined),
        Ok(_) if lcc_k <= 1.0 => Err(Undefined::DegenerateBaseline),
        Ok(l) => Ok(l / ((ps.lcc_n as f64).ln() / lcc_k.ln())),
    };
    let sigma = match (clustering_norm, apl_norm) {
        (Ok(c), Ok(l)) => Ok(c / l),
        _ => Err(Undefined::DependsOnUndefined),
    };
    let disconnected_fraction = if n < 2 { 0.0 } else { ps.unreachable as f64 / pairs };
    let efficiency = if n < 2 {
        Err(Undefined::TooFewNodes)
    } else {
        Ok(ps.inv_sum / pairs)
    };

    Ok(GlobalMetrics {
        n_nodes: n,
        n_edges: m,
        edge_density,
        clustering_coefficient: Some(clustering),
        clustering_coefficient_norm: note(&mut undefined, "clustering_coefficient_norm", clustering_norm),
        assortativity: note(&mut undefined, "assortativity", degree_assortativity(g)),
        modularity: note(&mut undefined, "modularity", modularity_r),
        freeman_centralization: note(&mut undefined, "freeman_centralization", freeman_centralization(g)),
        avg_path_length: note(&mut undefined, "avg_path_length", apl),
        avg_path_length_norm: note(&mut undefined, "avg_path_length_norm", apl_norm),
        disconnected_fraction,
        global_efficiency: note(&mut undefined, "global_efficiency", efficiency),
        algebraic_connectivity: note(&mut undefined, "algebraic_connectivity", algebraic_connectivity(g)),
        small_world_sigma: note(&mut undefined, "small_world_sigma", sigma),
        undefined,
    })
}
