//! Run configuration: TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use reasonpath::gmetrics::BetweennessMode;
use reasonpath::rgraph::ExportFormat;
use reasonpath::segmenter::SegmentParams;
use reasonpath::textsim::{ChrfParams, Metric, MetricParams, WhitespacePolicy};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EmbedSource {
    #[default]
    File,
    Service,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilarityConfig {
    pub metric: Metric,
    pub beta: f64,
    pub max_order: usize,
    pub whitespace: WhitespacePolicy,
    pub bleu_max_order: usize,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            metric: Metric::Chrf,
            beta: 2.0,
            max_order: 6,
            whitespace: WhitespacePolicy::Strip,
            bleu_max_order: 4,
        }
    }
}

impl SimilarityConfig {
    pub fn params(&self) -> MetricParams {
        match self.metric {
            Metric::Chrf => MetricParams::Chrf(ChrfParams {
                beta: self.beta,
                max_order: self.max_order,
                whitespace: self.whitespace,
            }),
            Metric::Bleu => MetricParams::Bleu {
                max_order: self.bleu_max_order,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub source: EmbedSource,
    /// JSONL embeddings file, used when `source = "file"`.
    pub path: Option<PathBuf>,
    /// Service base URL, used when `source = "service"`.
    pub url: Option<String>,
    pub batch_size: usize,
    pub max_retries: usize,
    /// Scale vectors to unit length before clustering.
    pub normalize: bool,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            source: EmbedSource::File,
            path: None,
            url: None,
            batch_size: 32,
            max_retries: 3,
            normalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansConfig {
    /// Number of nodes; `min(2000, n / 2)` when absent.
    pub k: Option<usize>,
    pub n_init: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: None,
            n_init: 10,
            max_iter: 300,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub problems: Option<PathBuf>,
    pub out: PathBuf,
    /// The only source of randomness; k-means restart `r` draws from
    /// ChaCha8 seeded with `seed` on stream `r`.
    pub seed: u64,
    /// Dendrogram cut as a distance `1 - s`; 0.4 is a similarity of 60.
    pub threshold: f64,
    pub similarity: SimilarityConfig,
    pub segment: SegmentParams,
    pub embed: EmbedConfig,
    pub kmeans: KMeansConfig,
    pub ks: Vec<usize>,
    pub betweenness: BetweennessMode,
    /// Optional 1-based inclusive rank window for decay fits.
    pub rank_range: Option<[usize; 2]>,
    pub export: Vec<ExportFormat>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            problems: None,
            out: PathBuf::from("out"),
            seed: 0,
            threshold: 0.4,
            similarity: SimilarityConfig::default(),
            segment: SegmentParams::default(),
            embed: EmbedConfig::default(),
            kmeans: KMeansConfig::default(),
            ks: vec![1, 2, 4, 8, 16],
            betweenness: BetweennessMode::Directed,
            rank_range: None,
            export: vec![ExportFormat::EdgeCsv],
        }
    }
}

/// Values given on the command line; each replaces the config-file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub k: Option<usize>,
    pub metric: Option<Metric>,
    pub embed_source: Option<EmbedSource>,
    pub embed_url: Option<String>,
    pub ks: Option<Vec<usize>>,
}

impl RunConfig {
    /// Parses TOML; relative paths are taken relative to `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.corpus.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.problems.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.embed.path.as_mut() {
            rebase(p);
        }
        rebase(&mut cfg.out);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(v) = o.corpus {
            self.corpus = Some(v);
        }
        if let Some(v) = o.out {
            self.out = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.threshold {
            self.threshold = v;
        }
        if let Some(v) = o.k {
            self.kmeans.k = Some(v);
        }
        if let Some(v) = o.metric {
            self.similarity.metric = v;
        }
        if let Some(v) = o.embed_source {
            self.embed.source = v;
        }
        if let Some(v) = o.embed_url {
            self.embed.url = Some(v);
        }
        if let Some(v) = o.ks {
            self.ks = v;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        let s = &self.similarity;
        if !(s.beta.is_finite() && s.beta > 0.0) {
            return bad(format!("similarity.beta must be positive, got {}", s.beta));
        }
        if !(1..=20).contains(&s.max_order) || !(1..=20).contains(&s.bleu_max_order) {
            return bad("n-gram orders must lie in 1..=20".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold must lie in [0, 1], got {}", self.threshold));
        }
        let seg = &self.segment;
        if seg.max_tokens == 0 || seg.min_tokens > seg.max_tokens {
            return bad(format!(
                "segment bounds need 0 < min_tokens <= max_tokens, got {} and {}",
                seg.min_tokens, seg.max_tokens
            ));
        }
        let km = &self.kmeans;
        if km.k == Some(0) || km.n_init == 0 || km.max_iter == 0 {
            return bad("kmeans.k, n_init and max_iter must be at least 1".into());
        }
        if !(km.tol.is_finite() && km.tol >= 0.0) {
            return bad(format!("kmeans.tol must be non-negative, got {}", km.tol));
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return bad("ks must be a non-empty list of positive integers".into());
        }
        if let Some([lo, hi]) = self.rank_range {
            if lo == 0 || lo >= hi {
                return bad(format!("rank_range needs 1 <= lo < hi, got [{lo}, {hi}]"));
            }
        }
        if self.embed.batch_size == 0 {
            return bad("embed.batch_size must be at least 1".into());
        }
        Ok(())
    }

    pub fn corpus_path(&self) -> Result<&Path> {
        self.corpus
            .as_deref()
            .ok_or_else(|| CliError::Config("no corpus given (set `corpus` or pass --corpus)".into()))
    }

    /// SHA-256 of the canonical JSON form of the effective analysis
    /// settings. Locations are left out: inputs are hashed by content in the
    /// manifest and the output directory does not affect results.
    pub fn digest(&self) -> String {
        let mut settings = self.clone();
        settings.corpus = None;
        settings.problems = None;
        settings.embed.path = None;
        settings.out = PathBuf::new();
        let canonical = serde_json::to_vec(&settings).expect("config serializes");
        hex(&Sha256::digest(canonical))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
