//! Pipeline stages. Each returns plain data; writing happens in `output`.

use std::collections::{BTreeMap, BTreeSet};

use log::{info, warn};
use rayon::prelude::*;
use reasonpath::corpus::{Corpus, Format};
use reasonpath::embedspace::{self, EmbedClient, EmbedError, EmbeddedSentence, KMeansParams};
use reasonpath::gmetrics::{
    betweenness, degree, fit_decay, global_metrics, graphlet_census, rank_series, smape, visitation_frequency,
    GraphletCensus, MetricsError, RankMeasure, RankSeries,
};
use reasonpath::rgraph::{build_graph, paths_from_assignments, ReasoningGraph};
use reasonpath::segmenter::{segment_sample, SentenceChunk};
use reasonpath::trajcluster::{count_unique_trajectories, pass_at_k_curve};

use crate::config::{EmbedSource, RunConfig};
use crate::error::{CliError, Result};
use crate::report::{GraphFragment, GraphRow, KMeansSummary, MetricsReport, Parameters, SmapeRow, TrajectoryFragment};

pub fn load_corpus(cfg: &RunConfig) -> Result<Corpus> {
    let path = cfg.corpus_path()?;
    let corpus = Corpus::ingest_with_problems(path, cfg.problems.as_deref(), Format::Jsonl)
        .map_err(|e| CliError::data("ingest", e))?;
    info!(
        "ingest: {} samples, {} problems, {} models",
        corpus.len(),
        corpus.problem_ids().count(),
        corpus.model_ids().count()
    );
    Ok(corpus)
}

pub fn parameters(cfg: &RunConfig) -> Parameters {
    Parameters {
        seed: cfg.seed,
        metric: cfg.similarity.metric,
        threshold: cfg.threshold,
        k: cfg.kmeans.k,
    }
}

/// ks usable for `model`: those not exceeding its smallest per-problem
/// sample count. The rest are dropped with a warning.
fn usable_ks(corpus: &Corpus, model: &str, ks: &[usize]) -> Vec<usize> {
    let min_n = corpus
        .problem_ids()
        .filter_map(|p| corpus.samples_for(p, model).ok())
        .map(<[_]>::len)
        .min()
        .unwrap_or(0);
    let (keep, drop): (Vec<usize>, Vec<usize>) = ks.iter().partition(|&&k| k <= min_n);
    if !drop.is_empty() {
        warn!("passk: model {model} has as few as {min_n} samples per problem; skipping k in {drop:?}");
    }
    keep
}

pub fn pass_at_k_table(cfg: &RunConfig, corpus: &Corpus) -> Result<BTreeMap<String, BTreeMap<usize, f64>>> {
    let mut ks = cfg.ks.clone();
    ks.sort_unstable();
    ks.dedup();
    corpus
        .model_ids()
        .map(|m| {
            let keep = usable_ks(corpus, m, &ks);
            let curve =
                pass_at_k_curve(corpus, m, &keep).map_err(|e| CliError::data("passk", format!("model {m}: {e}")))?;
            Ok((m.to_owned(), curve))
        })
        .collect()
}

pub fn run_trajectories(cfg: &RunConfig, corpus: &Corpus) -> Result<TrajectoryFragment> {
    let params = cfg.similarity.params();
    let pairs: Vec<(&str, &str)> = corpus.pairs().collect();
    let counts = pairs
        .par_iter()
        .map(|&(p, m)| {
            count_unique_trajectories(corpus, p, m, &params, cfg.threshold)
                .map_err(|e| CliError::data("trajectories", format!("({p}, {m}): {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    info!("trajectories: clustered {} (problem, model) pairs", counts.len());
    Ok(TrajectoryFragment {
        metric: cfg.similarity.metric,
        threshold: cfg.threshold,
        counts,
        pass_at_k: pass_at_k_table(cfg, corpus)?,
    })
}

pub fn segment_corpus(cfg: &RunConfig, corpus: &Corpus) -> Vec<SentenceChunk> {
    let chunks: Vec<SentenceChunk> = corpus
        .samples()
        .par_iter()
        .flat_map_iter(|s| segment_sample(s, &cfg.segment))
        .collect();
    info!("segment: {} chunks from {} samples", chunks.len(), corpus.len());
    chunks
}

/// Orders `available` like `chunks`; every chunk must have a vector.
pub fn align_embeddings(chunks: &[SentenceChunk], available: Vec<EmbeddedSentence>) -> Result<Vec<EmbeddedSentence>> {
    let mut by_ref: BTreeMap<_, _> = available.into_iter().map(|e| (e.chunk.clone(), e)).collect();
    let mut out = Vec::with_capacity(chunks.len());
    let mut missing = Vec::new();
    for c in chunks {
        match by_ref.remove(&c.chunk) {
            Some(e) => out.push(e),
            None => missing.push(c.chunk.to_string()),
        }
    }
    if !missing.is_empty() {
        const SHOW: usize = 20;
        let more = missing.len().saturating_sub(SHOW);
        let mut list = missing[..missing.len().min(SHOW)].join(", ");
        if more > 0 {
            list.push_str(&format!(" and {more} more"));
        }
        return Err(CliError::data(
            "embed",
            format!("no embedding for {} chunk(s): {list}", missing.len()),
        ));
    }
    Ok(out)
}

fn transport(e: EmbedError) -> CliError {
    CliError::Transport {
        stage: "embed",
        message: e.to_string(),
    }
}

pub fn obtain_embeddings(cfg: &RunConfig, chunks: &[SentenceChunk]) -> Result<Vec<EmbeddedSentence>> {
    match cfg.embed.source {
        EmbedSource::File => {
            let path = cfg
                .embed
                .path
                .as_deref()
                .ok_or_else(|| CliError::Config("embed.source is \"file\" but embed.path is not set".into()))?;
            let all = embedspace::load_embeddings(path, None).map_err(|e| CliError::data("embed", e))?;
            align_embeddings(chunks, all)
        }
        EmbedSource::Service => {
            let url = cfg.embed.url.as_deref().ok_or_else(|| {
                CliError::Config("embed.source is \"service\" but no URL given (embed.url or --embed-url)".into())
            })?;
            let client = EmbedClient {
                batch_size: cfg.embed.batch_size,
                max_retries: cfg.embed.max_retries,
                ..EmbedClient::new(url)
            };
            let dim = client.health().map_err(transport)?;
            info!("embed: service at {url} reports dimension {dim}");
            let out = client.fetch(chunks).map_err(transport)?;
            if let Some(e) = out.iter().find(|e| e.vector.len() != dim) {
                return Err(transport(EmbedError::DimensionMismatch {
                    expected: dim,
                    found: e.vector.len(),
                }));
            }
            Ok(out)
        }
    }
}

/// Graphs of every (problem, model) pair over jointly induced nodes.
pub struct GraphStage {
    pub kmeans: KMeansSummary,
    pub graphs: Vec<ReasoningGraph>,
    pub chunks_per_pair: Vec<usize>,
}

pub fn run_graph_stage(
    cfg: &RunConfig,
    corpus: &Corpus,
    chunks: &[SentenceChunk],
    embeddings: &[EmbeddedSentence],
) -> Result<GraphStage> {
    let points: Vec<Vec<f64>> = embeddings
        .iter()
        .map(|e| {
            let mut v = e.vector.clone();
            if cfg.embed.normalize {
                embedspace::l2_normalize(&mut v);
            }
            v
        })
        .collect();
    let k = cfg.kmeans.k.unwrap_or_else(|| embedspace::default_k(points.len()));
    let params = KMeansParams {
        k,
        n_init: cfg.kmeans.n_init,
        max_iter: cfg.kmeans.max_iter,
        tol: cfg.kmeans.tol,
        seed: cfg.seed,
    };
    let model = embedspace::kmeans_fit(&points, &params).map_err(|e| CliError::data("graph", e))?;
    info!(
        "graph: k-means k={k} on {} points, inertia {} (restart {})",
        points.len(),
        model.inertia,
        model.restart
    );
    let normalized: Vec<EmbeddedSentence>;
    let assign_from = if cfg.embed.normalize {
        normalized = embeddings
            .iter()
            .zip(&points)
            .map(|(e, p)| EmbeddedSentence {
                chunk: e.chunk.clone(),
                vector: p.clone(),
            })
            .collect();
        &normalized
    } else {
        embeddings
    };
    let assignments = embedspace::assign(&model, assign_from).map_err(|e| CliError::data("graph", e))?;
    let mut by_pair: BTreeMap<(String, String), Vec<_>> = BTreeMap::new();
    for path in paths_from_assignments(&assignments) {
        let key = (path.sample.problem_id.clone(), path.sample.model_id.clone());
        by_pair.entry(key).or_default().push(path);
    }
    let mut chunk_counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for c in chunks {
        let s = &c.chunk.sample;
        *chunk_counts.entry((&s.problem_id, &s.model_id)).or_default() += 1;
    }
    let mut graphs = Vec::new();
    let mut chunks_per_pair = Vec::new();
    for (p, m) in corpus.pairs() {
        let paths = by_pair.remove(&(p.to_owned(), m.to_owned())).unwrap_or_default();
        let g = build_graph(p, m, &paths, &model.centroids)
            .map_err(|e| CliError::data("graph", format!("({p}, {m}): {e}")))?;
        graphs.push(g);
        chunks_per_pair.push(chunk_counts.get(&(p, m)).copied().unwrap_or(0));
    }
    Ok(GraphStage {
        kmeans: KMeansSummary {
            k,
            n_points: points.len(),
            dim: model.dim(),
            seed: cfg.seed,
            inertia: model.inertia,
            restart: model.restart,
            iterations: model.iterations_run,
        },
        graphs,
        chunks_per_pair,
    })
}

fn reason(e: &MetricsError) -> String {
    match e {
        MetricsError::EmptyGraph => "empty_graph".into(),
        MetricsError::TooFewPoints(_) => "too_few_points".into(),
        other => other.to_string(),
    }
}

/// Positive values of each rank measure of `g`, descending.
pub fn rank_measures(cfg: &RunConfig, g: &ReasoningGraph) -> Vec<RankSeries> {
    let vf: Vec<f64> = visitation_frequency(g)
        .map(|m| m.into_values().collect())
        .unwrap_or_default();
    let deg = degree(g).into_values().map(|d| d as f64);
    let bc = betweenness(g, cfg.betweenness).into_values();
    vec![
        rank_series(RankMeasure::VisitationFrequency, vf),
        rank_series(RankMeasure::Degree, deg),
        rank_series(RankMeasure::Betweenness, bc),
    ]
}

pub fn measure_graph(cfg: &RunConfig, g: &ReasoningGraph, n_chunks: usize) -> Result<GraphRow> {
    let range = cfg.rank_range.map(|[lo, hi]| lo..=hi);
    let mut decay = BTreeMap::new();
    let mut decay_undefined = BTreeMap::new();
    for series in rank_measures(cfg, g) {
        match fit_decay(&series.values, range.clone()) {
            Ok(fit) => {
                decay.insert(series.measure, fit);
            }
            Err(e) => {
                decay_undefined.insert(series.measure, reason(&e));
            }
        }
    }
    let u = g.undirected();
    let global = if g.is_empty() {
        None
    } else {
        Some(
            global_metrics(&u)
                .map_err(|e| CliError::data("metrics", format!("({}, {}): {e}", g.problem_id, g.model_id)))?,
        )
    };
    Ok(GraphRow {
        problem_id: g.problem_id.clone(),
        model_id: g.model_id.clone(),
        n_chunks,
        n_nodes: g.node_count(),
        n_edges: g.edge_count(),
        decay,
        decay_undefined,
        global,
        graphlets: graphlet_census(&u),
    })
}

/// One model's graphs merged over all problems; node ids are shared
/// because the nodes were induced jointly.
pub fn pooled_graph(graphs: &[ReasoningGraph], model: &str) -> ReasoningGraph {
    let mut pooled = ReasoningGraph {
        problem_id: String::new(),
        model_id: model.to_owned(),
        ..Default::default()
    };
    for g in graphs.iter().filter(|g| g.model_id == model) {
        for (&v, &c) in &g.visits {
            *pooled.visits.entry(v).or_insert(0) += c;
        }
        for (&e, info) in &g.edges {
            pooled
                .edges
                .entry(e)
                .and_modify(|x| x.frequency += info.frequency)
                .or_insert(*info);
        }
    }
    pooled
}

pub fn smape_table(graphs: &[ReasoningGraph]) -> Vec<SmapeRow> {
    let models: BTreeSet<&str> = graphs.iter().map(|g| g.model_id.as_str()).collect();
    let by_key: BTreeMap<(&str, &str), &ReasoningGraph> = graphs
        .iter()
        .map(|g| ((g.problem_id.as_str(), g.model_id.as_str()), g))
        .collect();
    let problems: BTreeSet<&str> = graphs.iter().map(|g| g.problem_id.as_str()).collect();
    let models: Vec<&str> = models.into_iter().collect();
    let mut rows = Vec::new();
    for (i, a) in models.iter().enumerate() {
        for b in &models[i + 1..] {
            let mut per_problem = BTreeMap::new();
            for p in &problems {
                let (Some(ga), Some(gb)) = (by_key.get(&(p, a)), by_key.get(&(p, b))) else {
                    continue;
                };
                let (Ok(x), Ok(y)) = (visitation_frequency(ga), visitation_frequency(gb)) else {
                    continue;
                };
                if let Ok(v) = smape(&x, &y) {
                    per_problem.insert(p.to_string(), v);
                }
            }
            let mean = (!per_problem.is_empty()).then(|| per_problem.values().sum::<f64>() / per_problem.len() as f64);
            rows.push(SmapeRow {
                model_a: a.to_string(),
                model_b: b.to_string(),
                measure: RankMeasure::VisitationFrequency,
                n_problems: per_problem.len(),
                mean,
                per_problem,
            });
        }
    }
    rows
}

pub fn graph_fragment(cfg: &RunConfig, stage: &GraphStage) -> Result<GraphFragment> {
    let rows = stage
        .graphs
        .par_iter()
        .zip(&stage.chunks_per_pair)
        .map(|(g, &n)| measure_graph(cfg, g, n))
        .collect::<Result<Vec<_>>>()?;
    let models: BTreeSet<&str> = stage.graphs.iter().map(|g| g.model_id.as_str()).collect();
    let pooled_graphlets: BTreeMap<String, GraphletCensus> = models
        .into_par_iter()
        .map(|m| {
            (
                m.to_owned(),
                graphlet_census(&pooled_graph(&stage.graphs, m).undirected()),
            )
        })
        .collect();
    Ok(GraphFragment {
        kmeans: stage.kmeans.clone(),
        rows,
        smape: smape_table(&stage.graphs),
        pooled_graphlets,
    })
}

/// Every stage in order, merged into one report.
pub struct FullRun {
    pub trajectories: TrajectoryFragment,
    pub stage: GraphStage,
    pub graphs: GraphFragment,
    pub report: MetricsReport,
}

pub fn run_all(cfg: &RunConfig, corpus: &Corpus) -> Result<FullRun> {
    let trajectories = run_trajectories(cfg, corpus)?;
    let chunks = segment_corpus(cfg, corpus);
    let embeddings = obtain_embeddings(cfg, &chunks)?;
    let stage = run_graph_stage(cfg, corpus, &chunks, &embeddings)?;
    let graphs = graph_fragment(cfg, &stage)?;
    let report = MetricsReport::merge(parameters(cfg), Some(&trajectories), Some(&graphs));
    Ok(FullRun {
        trajectories,
        stage,
        graphs,
        report,
    })
}
