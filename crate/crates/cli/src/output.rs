//! File layout of the output directory and the writers that fill it.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use reasonpath::rgraph::{export_graph, ReasoningGraph};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, EmbedSource, RunConfig};
use crate::error::{CliError, Result};
use crate::pipeline::rank_measures;
use crate::report::{self, MetricsReport, SCHEMA_VERSION};

pub const CORPUS_JSONL: &str = "corpus.jsonl";
pub const CHUNKS_JSONL: &str = "chunks.jsonl";
pub const EMBEDDINGS_JSONL: &str = "embeddings.jsonl";
pub const TRAJECTORIES_JSON: &str = "trajectories.json";
pub const TRAJECTORIES_CSV: &str = "trajectories.csv";
pub const PASSK_CSV: &str = "passk.csv";
pub const GRAPH_METRICS_JSON: &str = "graph_metrics.json";
pub const RANK_PLOTS_CSV: &str = "rank_plots.csv";
pub const SMAPE_CSV: &str = "smape.csv";
pub const GRAPHLETS_CSV: &str = "graphlets.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const GRAPHS_DIR: &str = "graphs";

fn out_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Output {
        path: path.to_owned(),
        source,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(out_err(dir))
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    if let Some(dir) = path.parent() {
        ensure_dir(dir)?;
    }
    let file = File::create(path).map_err(out_err(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(out_err(path))
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report types serialize");
    bytes.push(b'\n');
    bytes
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let bytes = json_bytes(value);
    write_with(path, |w| w.write_all(&bytes))
}

pub fn read_json<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::data(
            stage,
            format!("cannot read {}: {e} (run the producing stage first)", path.display()),
        )
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::data(stage, format!("{}: {e}", path.display())))
}

fn csv_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

pub fn write_csv<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> csv::Result<()>,
{
    write_with(path, |w| f(w).map_err(csv_io))
}

/// `(rank, value, log10_value)` for every measure of every graph.
pub fn write_rank_plots(cfg: &RunConfig, graphs: &[ReasoningGraph], path: &Path) -> Result<()> {
    write_csv(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["problem_id", "model_id", "measure", "rank", "value", "log10_value"])?;
        for g in graphs {
            for series in rank_measures(cfg, g) {
                for (r, x, lx) in series.rows() {
                    out.write_record([
                        g.problem_id.as_str(),
                        g.model_id.as_str(),
                        series.measure.name(),
                        &r.to_string(),
                        &x.to_string(),
                        &lx.to_string(),
                    ])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    })
}

/// File-system-safe stem for a (problem, model) pair.
pub fn graph_stem(problem: &str, model: &str) -> String {
    let clean = |s: &str| -> String {
        s.chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                    c
                } else {
                    '_'
                }
            })
            .collect()
    };
    format!("{}__{}", clean(problem), clean(model))
}

pub fn export_graphs(cfg: &RunConfig, graphs: &[ReasoningGraph], dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    for g in graphs {
        let prefix = dir.join(graph_stem(&g.problem_id, &g.model_id));
        for &format in &cfg.export {
            written.extend(export_graph(g, format, &prefix).map_err(|e| CliError::data("graph", e))?);
        }
    }
    info!("graph: wrote {} files under {}", written.len(), dir.display());
    Ok(written)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::data("manifest", format!("{}: {e}", path.display())))?;
    Ok(hex(&Sha256::digest(bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub schema_version: String,
    pub config_sha256: String,
    pub corpus_sha256: String,
    pub problems_sha256: Option<String>,
    pub embeddings_sha256: Option<String>,
    pub report_sha256: String,
}

/// Writes report.json, report.csv and manifest.json.
pub fn write_report(cfg: &RunConfig, report: &MetricsReport) -> Result<()> {
    let bytes = json_bytes(report);
    let path = cfg.out.join(REPORT_JSON);
    write_with(&path, |w| w.write_all(&bytes))?;
    write_csv(&cfg.out.join(REPORT_CSV), |w| report::write_report_csv(report, w))?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        schema_version: SCHEMA_VERSION.to_owned(),
        config_sha256: cfg.digest(),
        corpus_sha256: sha256_file(cfg.corpus_path()?)?,
        problems_sha256: cfg.problems.as_deref().map(sha256_file).transpose()?,
        embeddings_sha256: match cfg.embed.source {
            EmbedSource::File => cfg.embed.path.as_deref().map(sha256_file).transpose()?,
            EmbedSource::Service => None,
        },
        report_sha256: hex(&Sha256::digest(&bytes)),
    };
    write_json(&cfg.out.join(MANIFEST_JSON), &manifest)?;
    info!("report: wrote {}", path.display());
    Ok(())
}
