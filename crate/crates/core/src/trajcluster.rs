//! UPGMA dendrograms, threshold cuts and the Pass@k estimator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError};
use crate::textsim::{similarity_matrix, MetricParams};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("distance matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("distance matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("distance matrix has an invalid entry {value} at ({i}, {j})")]
    InvalidEntry { i: usize, j: usize, value: f64 },
    #[error("merge heights decreased at merge {index}: {height} after {previous}")]
    NonMonotone { index: usize, height: f64, previous: f64 },
    #[error("pass@k domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type Result<T, E = ClusterError> = std::result::Result<T, E>;

/// One agglomeration step. `a < b` are cluster ids: leaves are `0..n`, the
/// cluster created by merge `k` has id `n + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Number of clusters left after admitting every merge strictly below
    /// `distance_threshold`.
    pub fn cut(&self, distance_threshold: f64) -> usize {
        self.leaves - self.merges_below(distance_threshold)
    }

    fn merges_below(&self, threshold: f64) -> usize {
        // heights are non-decreasing
        self.merges.partition_point(|m| m.height < threshold)
    }

    /// Flat cluster label per leaf for the same cut as [`Dendrogram::cut`].
    /// Labels are numbered by first appearance in leaf order.
    pub fn cut_labels(&self, distance_threshold: f64) -> Vec<usize> {
        let n = self.leaves;
        let mut parent: Vec<usize> = (0..2 * n.max(1)).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (k, m) in self.merges[..self.merges_below(distance_threshold)].iter().enumerate() {
            let ra = find(&mut parent, m.a);
            let rb = find(&mut parent, m.b);
            parent[ra] = n + k;
            parent[rb] = n + k;
        }
        let mut seen = BTreeMap::new();
        (0..n)
            .map(|i| {
                let r = find(&mut parent, i);
                let next = seen.len();
                *seen.entry(r).or_insert(next)
            })
            .collect()
    }
}

fn validate(d: &[Vec<f64>]) -> Result<()> {
    let n = d.len();
    for (i, row) in d.iter().enumerate() {
        if row.len() != n {
            return Err(ClusterError::NotSquare {
                row: i,
                len: row.len(),
                n,
            });
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() || v < 0.0 || (i == j && v != 0.0) {
                return Err(ClusterError::InvalidEntry { i, j, value: v });
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let (x, y) = (d[i][j], d[j][i]);
            if (x - y).abs() > 1e-12 * x.abs().max(y.abs()).max(1.0) {
                return Err(ClusterError::Asymmetric(i, j));
            }
        }
    }
    Ok(())
}

/// Candidate ordering: distance, then the cluster-id pair lexicographically.
fn better(a: (f64, usize, usize), b: (f64, usize, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && (a.1, a.2) < (b.1, b.2))
}

/// Average-linkage (UPGMA) agglomerative clustering.
///
/// Keeps a working matrix of summed member-pair distances, so a linkage is
/// one division of an exact sum whenever the inputs add without rounding, and
/// a cached nearest partner per row, so each merge costs O(n) unless a row's
/// partner was consumed. Exact ties go to the lexicographically smallest pair
/// of cluster ids.
pub fn upgma(distances: &[Vec<f64>]) -> Result<Dendrogram> {
    validate(distances)?;
    let n = distances.len();
    // tot[s][t]: sum of leaf distances between the members of slots s and t,
    // read from the upper triangle so both orientations agree bitwise
    let mut tot: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| distances[i.min(j)][i.max(j)]).collect())
        .collect();
    // slot -> current cluster id / size; slots are reused by merged clusters
    let mut id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut best: Vec<Option<(f64, usize, usize, usize)>> = vec![None; n];

    let link = |tot: &[Vec<f64>], size: &[usize], s: usize, t: usize| tot[s][t] / (size[s] * size[t]) as f64;
    let row_best = |tot: &[Vec<f64>], size: &[usize], id: &[usize], active: &[bool], s: usize| {
        let mut out: Option<(f64, usize, usize, usize)> = None;
        for t in 0..tot.len() {
            if t == s || !active[t] {
                continue;
            }
            let (lo, hi) = if id[s] < id[t] { (id[s], id[t]) } else { (id[t], id[s]) };
            let cand = (link(tot, size, s, t), lo, hi);
            if out.is_none_or(|o| better(cand, (o.0, o.1, o.2))) {
                out = Some((cand.0, cand.1, cand.2, t));
            }
        }
        out
    };
    for s in 0..n {
        best[s] = row_best(&tot, &size, &id, &active, s);
    }

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n.saturating_sub(1) {
        let mut pick: Option<(f64, usize, usize, usize, usize)> = None;
        for s in (0..n).filter(|&s| active[s]) {
            if let Some((h, lo, hi, t)) = best[s] {
                if pick.is_none_or(|p| better((h, lo, hi), (p.0, p.1, p.2))) {
                    pick = Some((h, lo, hi, s, t));
                }
            }
        }
        let (height, lo, hi, s, t) = pick.expect("at least two active clusters");
        if let Some(prev) = merges.last().map(|m: &Merge| m.height) {
            if height < prev - 1e-12 * prev.abs().max(1.0) {
                return Err(ClusterError::NonMonotone {
                    index: k,
                    height,
                    previous: prev,
                });
            }
        }
        let (keep, gone) = (s.min(t), s.max(t));
        for u in 0..n {
            if !active[u] || u == keep || u == gone {
                continue;
            }
            let v = tot[keep][u] + tot[gone][u];
            tot[keep][u] = v;
            tot[u][keep] = v;
        }
        active[gone] = false;
        size[keep] += size[gone];
        id[keep] = n + k;
        merges.push(Merge {
            a: lo,
            b: hi,
            height,
            size: size[keep],
        });

        best[gone] = None;
        best[keep] = row_best(&tot, &size, &id, &active, keep);
        for u in 0..n {
            if !active[u] || u == keep {
                continue;
            }
            match best[u] {
                Some((_, _, _, p)) if p == keep || p == gone => {
                    best[u] = row_best(&tot, &size, &id, &active, u);
                }
                Some(cur) => {
                    let cand = (link(&tot, &size, u, keep), id[u].min(n + k), id[u].max(n + k));
                    if better(cand, (cur.0, cur.1, cur.2)) {
                        best[u] = Some((cand.0, cand.1, cand.2, keep));
                    }
                }
                None => best[u] = row_best(&tot, &size, &id, &active, u),
            }
        }
    }
    Ok(Dendrogram { leaves: n, merges })
}

/// Number of clusters of `dendrogram` at `distance_threshold`.
pub fn cut(dendrogram: &Dendrogram, distance_threshold: f64) -> usize {
    dendrogram.cut(distance_threshold)
}

/// Unique-trajectory counts of one (problem, model) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryCounts {
    pub problem_id: String,
    pub model_id: String,
    pub n_correct_clusters: usize,
    pub n_incorrect_clusters: usize,
    pub m_plus: usize,
    pub m_minus: usize,
    pub threshold: f64,
}

fn clusters_of(texts: &[&crate::corpus::TraceSample], params: &MetricParams, threshold: f64) -> Result<usize> {
    if texts.is_empty() {
        return Ok(0);
    }
    let s = similarity_matrix(texts, params);
    Ok(upgma(&s.to_distances())?.cut(threshold))
}

/// Clusters the correct and incorrect samples of a pair separately with
/// distance `1 - s` and cuts both dendrograms at `distance_threshold`.
pub fn count_unique_trajectories(
    corpus: &Corpus,
    problem_id: &str,
    model_id: &str,
    params: &MetricParams,
    distance_threshold: f64,
) -> Result<TrajectoryCounts> {
    let (correct, incorrect) = corpus.split_by_correctness(problem_id, model_id)?;
    Ok(TrajectoryCounts {
        problem_id: problem_id.to_owned(),
        model_id: model_id.to_owned(),
        n_correct_clusters: clusters_of(&correct, params, distance_threshold)?,
        n_incorrect_clusters: clusters_of(&incorrect, params, distance_threshold)?,
        m_plus: correct.len(),
        m_minus: incorrect.len(),
        threshold: distance_threshold,
    })
}

/// Unbiased pass@k for one problem with `c` correct out of `n` samples,
/// `1 - C(n-c, k) / C(n, k)` evaluated as a running product.
pub fn pass_at_k(n: usize, c: usize, k: usize) -> Result<f64> {
    if c > n || k == 0 || k > n {
        return Err(ClusterError::Domain(format!(
            "need 0 <= c <= n and 1 <= k <= n, got n={n}, c={c}, k={k}"
        )));
    }
    if n - c < k {
        return Ok(1.0);
    }
    let miss = (0..k).fold(1.0, |acc, j| acc * (n - c - j) as f64 / (n - j) as f64);
    Ok(1.0 - miss)
}

/// Problem-averaged pass@k of `model_id` for each k in `ks`.
pub fn pass_at_k_curve(corpus: &Corpus, model_id: &str, ks: &[usize]) -> Result<BTreeMap<usize, f64>> {
    let mut per_problem = Vec::new();
    for problem in corpus.problem_ids() {
        if let Ok(samples) = corpus.samples_for(problem, model_id) {
            let c = samples.iter().filter(|s| s.correct).count();
            per_problem.push((problem, samples.len(), c));
        }
    }
    let mut out = BTreeMap::new();
    if per_problem.is_empty() {
        return Ok(out);
    }
    for &k in ks {
        let mut sum = 0.0;
        for &(problem, n, c) in &per_problem {
            if k > n || k == 0 {
                return Err(ClusterError::Domain(format!(
                    "k={k} is outside 1..={n} for problem {problem} (model {model_id})"
                )));
            }
            sum += pass_at_k(n, c, k)?;
        }
        out.insert(k, sum / per_problem.len() as f64);
    }
    Ok(out)
}
