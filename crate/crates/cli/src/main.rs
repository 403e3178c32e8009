use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use reasonpath::embedspace::write_embeddings;
use reasonpath::textsim::Metric;
use reasonpath_cli::config::{EmbedSource, Overrides, RunConfig};
use reasonpath_cli::error::CliError;
use reasonpath_cli::output::{self, *};
use reasonpath_cli::pipeline;
use reasonpath_cli::report::{self, GraphFragment, MetricsReport, TrajectoryFragment};

#[derive(Parser)]
#[command(
    name = "reasonpath",
    version,
    about = "Trajectory- and step-level analysis of sampled reasoning traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the corpus and write it back with correctness labels
    Ingest,
    /// Count unique correct and incorrect trajectories per (problem, model)
    Trajectories,
    /// Split every response into sentence chunks
    Segment,
    /// Obtain an embedding for every chunk
    Embed,
    /// Induce nodes and export one reasoning graph per (problem, model)
    Graph,
    /// Decay fits, global topology metrics and sMAPE tables
    Metrics,
    /// Four-node graphlet census
    Graphlets,
    /// Problem-averaged pass@k per model
    Passk,
    /// Merge the stage outputs found in the output directory
    Report,
    /// Run every stage and write the full report
    All,
}

#[derive(Args)]
struct Flags {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dendrogram cut as a distance (0.4 means similarity 60)
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Number of k-means nodes
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true, value_parser = parse_metric)]
    metric: Option<Metric>,
    #[arg(long, global = true, value_enum)]
    embed_source: Option<EmbedSource>,
    #[arg(long, global = true)]
    embed_url: Option<String>,
    /// Comma-separated pass@k list, e.g. 1,2,4,8
    #[arg(long, global = true, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    match s {
        "chrf" => Ok(Metric::Chrf),
        "bleu" => Ok(Metric::Bleu),
        other => Err(format!("unknown metric `{other}` (expected chrf or bleu)")),
    }
}

fn load_config(flags: Flags) -> Result<RunConfig, CliError> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(Overrides {
        corpus: flags.corpus,
        out: flags.out,
        seed: flags.seed,
        threshold: flags.threshold,
        k: flags.k,
        metric: flags.metric,
        embed_source: flags.embed_source,
        embed_url: flags.embed_url,
        ks: flags.ks,
    });
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(cli.flags)?;
    let out = cfg.out.clone();
    match cli.command {
        Command::Ingest => {
            let corpus = pipeline::load_corpus(&cfg)?;
            write_with(&out.join(CORPUS_JSONL), |w| corpus.write_jsonl(w))?;
            println!(
                "{} samples, {} problems, {} models",
                corpus.len(),
                corpus.problem_ids().count(),
                corpus.model_ids().count()
            );
        }
        Command::Trajectories => {
            let corpus = pipeline::load_corpus(&cfg)?;
            let t = pipeline::run_trajectories(&cfg, &corpus)?;
            write_trajectories(&cfg, &t)?;
        }
        Command::Segment => {
            let corpus = pipeline::load_corpus(&cfg)?;
            let chunks = pipeline::segment_corpus(&cfg, &corpus);
            write_with(&out.join(CHUNKS_JSONL), |w| {
                for c in &chunks {
                    serde_json::to_writer(&mut *w, c)?;
                    w.write_all(b"\n")?;
                }
                Ok(())
            })?;
        }
        Command::Embed => {
            let corpus = pipeline::load_corpus(&cfg)?;
            let chunks = pipeline::segment_corpus(&cfg, &corpus);
            let emb = pipeline::obtain_embeddings(&cfg, &chunks)?;
            write_with(&out.join(EMBEDDINGS_JSONL), |w| write_embeddings(w, &emb))?;
        }
        Command::Graph => {
            let (stage, _) = graph_stage(&cfg, false)?;
            export_graphs(&cfg, &stage.graphs, &out.join(GRAPHS_DIR))?;
            write_rank_plots(&cfg, &stage.graphs, &out.join(RANK_PLOTS_CSV))?;
        }
        Command::Metrics => {
            let (stage, fragment) = graph_stage(&cfg, true)?;
            write_graph_outputs(&cfg, &stage, fragment.as_ref().unwrap())?;
        }
        Command::Graphlets => {
            let (_, fragment) = graph_stage(&cfg, true)?;
            write_csv(&out.join(GRAPHLETS_CSV), |w| {
                report::write_graphlets_csv(fragment.as_ref().unwrap(), w)
            })?;
        }
        Command::Passk => {
            let corpus = pipeline::load_corpus(&cfg)?;
            let t = TrajectoryFragment {
                metric: cfg.similarity.metric,
                threshold: cfg.threshold,
                counts: Vec::new(),
                pass_at_k: pipeline::pass_at_k_table(&cfg, &corpus)?,
            };
            write_csv(&out.join(PASSK_CSV), |w| report::write_passk_csv(&t, w))?;
        }
        Command::Report => {
            let t_path = out.join(TRAJECTORIES_JSON);
            let g_path = out.join(GRAPH_METRICS_JSON);
            let t: Option<TrajectoryFragment> = t_path.exists().then(|| read_json(&t_path, "report")).transpose()?;
            let g: Option<GraphFragment> = g_path.exists().then(|| read_json(&g_path, "report")).transpose()?;
            if t.is_none() && g.is_none() {
                return Err(CliError::data(
                    "report",
                    format!(
                        "neither {TRAJECTORIES_JSON} nor {GRAPH_METRICS_JSON} found in {}",
                        out.display()
                    ),
                ));
            }
            let report = MetricsReport::merge(pipeline::parameters(&cfg), t.as_ref(), g.as_ref());
            output::write_report(&cfg, &report)?;
        }
        Command::All => {
            let corpus = pipeline::load_corpus(&cfg)?;
            let run = pipeline::run_all(&cfg, &corpus)?;
            write_trajectories(&cfg, &run.trajectories)?;
            export_graphs(&cfg, &run.stage.graphs, &out.join(GRAPHS_DIR))?;
            write_graph_outputs(&cfg, &run.stage, &run.graphs)?;
            output::write_report(&cfg, &run.report)?;
            println!("{}", out.join(REPORT_JSON).display());
        }
    }
    Ok(())
}

fn graph_stage(cfg: &RunConfig, measure: bool) -> Result<(pipeline::GraphStage, Option<GraphFragment>), CliError> {
    let corpus = pipeline::load_corpus(cfg)?;
    let chunks = pipeline::segment_corpus(cfg, &corpus);
    let emb = pipeline::obtain_embeddings(cfg, &chunks)?;
    let stage = pipeline::run_graph_stage(cfg, &corpus, &chunks, &emb)?;
    let fragment = if measure {
        Some(pipeline::graph_fragment(cfg, &stage)?)
    } else {
        None
    };
    Ok((stage, fragment))
}

fn write_trajectories(cfg: &RunConfig, t: &TrajectoryFragment) -> Result<(), CliError> {
    write_json(&cfg.out.join(TRAJECTORIES_JSON), t)?;
    write_csv(&cfg.out.join(TRAJECTORIES_CSV), |w| {
        report::write_trajectories_csv(t, w)
    })?;
    write_csv(&cfg.out.join(PASSK_CSV), |w| report::write_passk_csv(t, w))
}

fn write_graph_outputs(
    cfg: &RunConfig,
    stage: &pipeline::GraphStage,
    fragment: &GraphFragment,
) -> Result<(), CliError> {
    write_json(&cfg.out.join(GRAPH_METRICS_JSON), fragment)?;
    write_rank_plots(cfg, &stage.graphs, &cfg.out.join(RANK_PLOTS_CSV))?;
    write_csv(&cfg.out.join(SMAPE_CSV), |w| {
        report::write_smape_csv(&fragment.smape, w)
    })?;
    write_csv(&cfg.out.join(GRAPHLETS_CSV), |w| {
        report::write_graphlets_csv(fragment, w)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("REASONPATH_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = run(cli).context("reasonpath failed");
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            let code = e.downcast_ref::<CliError>().map_or(1, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
