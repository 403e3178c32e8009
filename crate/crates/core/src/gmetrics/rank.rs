//! Node-level measures, rank series and exponential decay-rate fits.

use std::collections::{BTreeMap, VecDeque};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::{DiGraph, MetricsError, Result};
use crate::rgraph::ReasoningGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMeasure {
    VisitationFrequency,
    Degree,
    Betweenness,
}

impl RankMeasure {
    pub const ALL: [RankMeasure; 3] = [
        RankMeasure::VisitationFrequency,
        RankMeasure::Degree,
        RankMeasure::Betweenness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RankMeasure::VisitationFrequency => "visitation_frequency",
            RankMeasure::Degree => "degree",
            RankMeasure::Betweenness => "betweenness",
        }
    }
}

/// Share of all step visits landing on each node.
pub fn visitation_frequency(graph: &ReasoningGraph) -> Result<BTreeMap<usize, f64>> {
    let total: u64 = graph.visits.values().sum();
    if graph.visits.is_empty() || total == 0 {
        return Err(MetricsError::EmptyGraph);
    }
    Ok(graph
        .visits
        .iter()
        .map(|(&v, &c)| (v, c as f64 / total as f64))
        .collect())
}

/// Number of distinct neighbours regardless of edge direction.
pub fn degree(graph: &ReasoningGraph) -> BTreeMap<usize, usize> {
    let u = graph.undirected();
    let degrees: Vec<usize> = (0..u.len()).map(|i| u.degree(i)).collect();
    u.keyed(&degrees)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetweennessMode {
    #[default]
    Directed,
    Undirected,
}

/// Shortest-path (edge count) betweenness of every index of `g`, summed over
/// ordered pairs `s != v != t` and scaled by `1 / ((n-1)(n-2))`.
///
/// Brandes' dependency accumulation over one BFS per source.
pub fn betweenness_centrality(g: &DiGraph) -> Vec<f64> {
    let n = g.len();
    let mut cb = vec![0.0; n];
    if n < 3 {
        return cb;
    }
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0f64; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::with_capacity(n);
    for s in 0..n {
        sigma.iter_mut().for_each(|x| *x = 0.0);
        dist.iter_mut().for_each(|x| *x = usize::MAX);
        delta.iter_mut().for_each(|x| *x = 0.0);
        preds.iter_mut().for_each(Vec::clear);
        order.clear();
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in g.successors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        while let Some(w) = order.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    let scale = 1.0 / ((n - 1) as f64 * (n - 2) as f64);
    cb.iter_mut().for_each(|x| *x *= scale);
    cb
}

/// Normalized betweenness per node id.
pub fn betweenness(graph: &ReasoningGraph, mode: BetweennessMode) -> BTreeMap<usize, f64> {
    let g = match mode {
        BetweennessMode::Directed => graph.to_digraph(),
        BetweennessMode::Undirected => graph.to_digraph().symmetrized(),
    };
    let cb = betweenness_centrality(&g);
    g.node_ids().iter().copied().zip(cb).collect()
}

/// Positive values of one measure in descending order; rank `r` is
/// `values[r - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSeries {
    pub measure: RankMeasure,
    pub values: Vec<f64>,
}

/// Drops zero (and non-finite) values and sorts the rest descending.
pub fn rank_series(measure: RankMeasure, values: impl IntoIterator<Item = f64>) -> RankSeries {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite() && *x > 0.0).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    RankSeries { measure, values: v }
}

impl RankSeries {
    /// `(rank, value, log10(value))` rows.
    pub fn rows(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &x)| (i + 1, x, x.log10()))
    }
}

/// Least-squares fit of `log10 X(R) = alpha - beta * R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub beta: f64,
    pub alpha: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Exponential decay rate of a measure against its rank.
///
/// Zero values are excluded before ranking. `rank_range`, when given,
/// restricts the fit to those 1-based ranks. Logs are taken of values divided
/// by the maximum, so scaling every value by a power of two leaves `beta`
/// bit-for-bit unchanged.
pub fn fit_decay(values: &[f64], rank_range: Option<RangeInclusive<usize>>) -> Result<DecayFit> {
    let series = rank_series(RankMeasure::VisitationFrequency, values.iter().copied());
    let points: Vec<(f64, f64)> = series
        .values
        .iter()
        .enumerate()
        .map(|(i, &x)| (i + 1, x))
        .filter(|(r, _)| rank_range.as_ref().is_none_or(|rr| rr.contains(r)))
        .map(|(r, x)| (r as f64, x))
        .collect();
    if points.len() < 2 {
        return Err(MetricsError::TooFewPoints(points.len()));
    }
    let top = points[0].1;
    let n = points.len() as f64;
    let ys: Vec<f64> = points.iter().map(|&(_, x)| (x / top).log10()).collect();
    let r_mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&(r, _), &y) in points.iter().zip(&ys) {
        let (dr, dy) = (r - r_mean, y - y_mean);
        sxx += dr * dr;
        sxy += dr * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * r_mean + top.log10();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = points
            .iter()
            .zip(&ys)
            .map(|(&(r, _), &y)| {
                let e = y - (y_mean + slope * (r - r_mean));
                e * e
            })
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(DecayFit {
        beta: 0.0 - slope,
        alpha: intercept,
        r_squared,
        n_points: points.len(),
    })
}

/// Symmetric mean absolute percentage error over the union of keys, in
/// `[0, 200]`. Missing keys count as 0; pairs that are both 0 contribute 0.
pub fn smape<K: Ord>(x: &BTreeMap<K, f64>, y: &BTreeMap<K, f64>) -> Result<f64> {
    let keys: std::collections::BTreeSet<&K> = x.keys().chain(y.keys()).collect();
    if keys.is_empty() {
        return Err(MetricsError::Domain("sMAPE of two empty maps".into()));
    }
    let mut sum = 0.0;
    for k in &keys {
        let a = x.get(*k).copied().unwrap_or(0.0);
        let b = y.get(*k).copied().unwrap_or(0.0);
        let den = (a.abs() + b.abs()) / 2.0;
        if den > 0.0 {
            sum += (b - a).abs() / den;
        }
    }
    Ok(100.0 * sum / keys.len() as f64)
}
