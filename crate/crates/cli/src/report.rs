//! Report fragments, their merge into the full report, and flat CSV views.

use std::collections::BTreeMap;
use std::io::Write;

use reasonpath::gmetrics::{DecayFit, GlobalMetrics, GraphletCensus, GraphletKind, RankMeasure};
use reasonpath::textsim::Metric;
use reasonpath::trajcluster::TrajectoryCounts;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: &str = "1.0.0";

/// Output of the trajectory stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFragment {
    pub metric: Metric,
    pub threshold: f64,
    pub counts: Vec<TrajectoryCounts>,
    /// model -> k -> problem-averaged pass@k
    pub pass_at_k: BTreeMap<String, BTreeMap<usize, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansSummary {
    pub k: usize,
    pub n_points: usize,
    pub dim: usize,
    pub seed: u64,
    pub inertia: f64,
    pub restart: usize,
    pub iterations: usize,
}

/// Step-level measurements of one (problem, model) graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRow {
    pub problem_id: String,
    pub model_id: String,
    pub n_chunks: usize,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub decay: BTreeMap<RankMeasure, DecayFit>,
    /// Why a measure has no fit.
    pub decay_undefined: BTreeMap<RankMeasure, String>,
    pub global: Option<GlobalMetrics>,
    pub graphlets: GraphletCensus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmapeRow {
    pub model_a: String,
    pub model_b: String,
    pub measure: RankMeasure,
    /// Problems both models answered.
    pub n_problems: usize,
    pub mean: Option<f64>,
    pub per_problem: BTreeMap<String, f64>,
}

/// Output of the graph stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFragment {
    pub kmeans: KMeansSummary,
    pub rows: Vec<GraphRow>,
    pub smape: Vec<SmapeRow>,
    /// Census of each model's graph pooled over problems.
    pub pooled_graphlets: BTreeMap<String, GraphletCensus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub seed: u64,
    pub metric: Metric,
    pub threshold: f64,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub problem_id: String,
    pub model_id: String,
    pub trajectories: Option<TrajectoryCounts>,
    pub graph: Option<GraphRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model_id: String,
    pub n_problems: usize,
    pub n_samples: usize,
    pub correct_clusters: usize,
    pub incorrect_clusters: usize,
    pub pass_at_k: BTreeMap<usize, f64>,
    /// Mean decay rate over the problems where a fit exists.
    pub mean_beta: BTreeMap<RankMeasure, f64>,
    pub pooled_graphlets: Option<GraphletCensus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: String,
    pub parameters: Parameters,
    pub pairs: Vec<PairReport>,
    pub models: Vec<ModelSummary>,
    pub smape: Vec<SmapeRow>,
    pub kmeans: Option<KMeansSummary>,
}

impl MetricsReport {
    /// Joins the fragments on (problem, model). Either may be absent.
    pub fn merge(
        parameters: Parameters,
        trajectories: Option<&TrajectoryFragment>,
        graphs: Option<&GraphFragment>,
    ) -> Self {
        let mut pairs: BTreeMap<(String, String), PairReport> = BTreeMap::new();
        let slot = |pairs: &mut BTreeMap<(String, String), PairReport>, p: &str, m: &str| {
            pairs
                .entry((p.to_owned(), m.to_owned()))
                .or_insert_with(|| PairReport {
                    problem_id: p.to_owned(),
                    model_id: m.to_owned(),
                    trajectories: None,
                    graph: None,
                })
                .clone()
        };
        if let Some(t) = trajectories {
            for c in &t.counts {
                let mut r = slot(&mut pairs, &c.problem_id, &c.model_id);
                r.trajectories = Some(c.clone());
                pairs.insert((c.problem_id.clone(), c.model_id.clone()), r);
            }
        }
        if let Some(g) = graphs {
            for row in &g.rows {
                let mut r = slot(&mut pairs, &row.problem_id, &row.model_id);
                r.graph = Some(row.clone());
                pairs.insert((row.problem_id.clone(), row.model_id.clone()), r);
            }
        }
        let pairs: Vec<PairReport> = pairs.into_values().collect();

        let mut models: BTreeMap<String, ModelSummary> = BTreeMap::new();
        let mut betas: BTreeMap<(String, RankMeasure), Vec<f64>> = BTreeMap::new();
        for pr in &pairs {
            let s = models.entry(pr.model_id.clone()).or_insert_with(|| ModelSummary {
                model_id: pr.model_id.clone(),
                n_problems: 0,
                n_samples: 0,
                correct_clusters: 0,
                incorrect_clusters: 0,
                pass_at_k: BTreeMap::new(),
                mean_beta: BTreeMap::new(),
                pooled_graphlets: None,
            });
            s.n_problems += 1;
            if let Some(t) = &pr.trajectories {
                s.n_samples += t.m_plus + t.m_minus;
                s.correct_clusters += t.n_correct_clusters;
                s.incorrect_clusters += t.n_incorrect_clusters;
            }
            if let Some(g) = &pr.graph {
                for (m, fit) in &g.decay {
                    betas.entry((pr.model_id.clone(), *m)).or_default().push(fit.beta);
                }
            }
        }
        for ((model, measure), bs) in betas {
            let mean = bs.iter().sum::<f64>() / bs.len() as f64;
            models.get_mut(&model).unwrap().mean_beta.insert(measure, mean);
        }
        if let Some(t) = trajectories {
            for (m, curve) in &t.pass_at_k {
                if let Some(s) = models.get_mut(m) {
                    s.pass_at_k = curve.clone();
                }
            }
        }
        if let Some(g) = graphs {
            for (m, census) in &g.pooled_graphlets {
                if let Some(s) = models.get_mut(m) {
                    s.pooled_graphlets = Some(census.clone());
                }
            }
        }

        MetricsReport {
            schema_version: SCHEMA_VERSION.to_owned(),
            parameters,
            pairs,
            models: models.into_values().collect(),
            smape: graphs.map(|g| g.smape.clone()).unwrap_or_default(),
            kmeans: graphs.map(|g| g.kmeans.clone()),
        }
    }
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

const GLOBAL_COLUMNS: [&str; 10] = [
    "edge_density",
    "clustering_coefficient_norm",
    "assortativity",
    "modularity",
    "freeman_centralization",
    "avg_path_length_norm",
    "global_efficiency",
    "algebraic_connectivity",
    "small_world_sigma",
    "disconnected_fraction",
];

fn global_cells(g: Option<&GlobalMetrics>) -> Vec<String> {
    let Some(g) = g else {
        return vec![String::new(); GLOBAL_COLUMNS.len()];
    };
    [
        Some(g.edge_density),
        g.clustering_coefficient_norm,
        g.assortativity,
        g.modularity,
        g.freeman_centralization,
        g.avg_path_length_norm,
        g.global_efficiency,
        g.algebraic_connectivity,
        g.small_world_sigma,
        Some(g.disconnected_fraction),
    ]
    .into_iter()
    .map(cell)
    .collect()
}

/// One row per (problem, model); empty cells mark undefined values.
pub fn write_report_csv<W: Write>(report: &MetricsReport, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = [
        "problem_id",
        "model_id",
        "m_plus",
        "m_minus",
        "n_correct_clusters",
        "n_incorrect_clusters",
        "n_nodes",
        "n_edges",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for m in RankMeasure::ALL {
        header.push(format!("beta_{}", m.name()));
        header.push(format!("r2_{}", m.name()));
    }
    header.extend(GLOBAL_COLUMNS.iter().map(|s| s.to_string()));
    header.extend(GraphletKind::ALL.iter().map(|k| format!("prop_{k}")));
    out.write_record(&header)?;

    for pr in &report.pairs {
        let t = pr.trajectories.as_ref();
        let g = pr.graph.as_ref();
        let mut row = vec![
            pr.problem_id.clone(),
            pr.model_id.clone(),
            t.map(|t| t.m_plus.to_string()).unwrap_or_default(),
            t.map(|t| t.m_minus.to_string()).unwrap_or_default(),
            t.map(|t| t.n_correct_clusters.to_string()).unwrap_or_default(),
            t.map(|t| t.n_incorrect_clusters.to_string()).unwrap_or_default(),
            g.map(|g| g.n_nodes.to_string()).unwrap_or_default(),
            g.map(|g| g.n_edges.to_string()).unwrap_or_default(),
        ];
        for m in RankMeasure::ALL {
            let fit = g.and_then(|g| g.decay.get(&m));
            row.push(cell(fit.map(|f| f.beta)));
            row.push(cell(fit.map(|f| f.r_squared)));
        }
        row.extend(global_cells(g.and_then(|g| g.global.as_ref())));
        for k in GraphletKind::ALL {
            row.push(cell(g.map(|g| g.graphlets.proportions[&k])));
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_passk_csv<W: Write>(t: &TrajectoryFragment, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["model_id", "k", "pass_at_k"])?;
    for (model, curve) in &t.pass_at_k {
        for (k, v) in curve {
            out.write_record([model.clone(), k.to_string(), v.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_trajectories_csv<W: Write>(t: &TrajectoryFragment, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "problem_id",
        "model_id",
        "m_plus",
        "m_minus",
        "n_correct_clusters",
        "n_incorrect_clusters",
    ])?;
    for c in &t.counts {
        out.write_record([
            c.problem_id.clone(),
            c.model_id.clone(),
            c.m_plus.to_string(),
            c.m_minus.to_string(),
            c.n_correct_clusters.to_string(),
            c.n_incorrect_clusters.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_smape_csv<W: Write>(rows: &[SmapeRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["model_a", "model_b", "measure", "problem_id", "smape"])?;
    for r in rows {
        for (p, v) in &r.per_problem {
            out.write_record([&r.model_a, &r.model_b, r.measure.name(), p, &v.to_string()])?;
        }
        out.write_record([&r.model_a, &r.model_b, r.measure.name(), "", &cell(r.mean)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_graphlets_csv<W: Write>(f: &GraphFragment, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["problem_id".to_string(), "model_id".to_string(), "total".to_string()];
    header.extend(GraphletKind::ALL.iter().map(|k| k.to_string()));
    out.write_record(&header)?;
    let pooled = f.pooled_graphlets.iter().map(|(m, c)| ("", m.as_str(), c));
    let rows = f
        .rows
        .iter()
        .map(|r| (r.problem_id.as_str(), r.model_id.as_str(), &r.graphlets));
    for (p, m, c) in rows.chain(pooled) {
        let mut row = vec![p.to_string(), m.to_string(), c.total.to_string()];
        row.extend(GraphletKind::ALL.iter().map(|k| c.counts[k].to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
