//! Two-granularity analysis of sampled LLM reasoning traces.
//!
//! Trajectory level: whole responses are compared with character n-gram
//! similarity ([`textsim`]), clustered with UPGMA and cut at a distance
//! threshold to count unique trajectories ([`trajcluster`]).
//!
//! Step level: responses are segmented into sentences ([`segmenter`]),
//! embedded and clustered into nodes ([`embedspace`]), turned into directed
//! reasoning graphs ([`rgraph`]) and measured ([`gmetrics`]).

#![allow(clippy::needless_range_loop)]

pub mod corpus;
pub mod embedspace;
pub mod gmetrics;
pub mod rgraph;
pub mod segmenter;
pub mod textsim;
pub mod trajcluster;

pub use corpus::{Corpus, CorpusError, SampleKey, TraceSample};
pub use embedspace::{EmbedError, EmbeddedSentence, KMeansModel, KMeansParams, NodeAssignment};
pub use gmetrics::{DecayFit, GlobalMetrics, GraphletCensus, GraphletKind, MetricsError, RankMeasure};
pub use rgraph::{GraphError, NodePath, ReasoningGraph};
pub use segmenter::{ChunkRef, SegmentParams, SentenceChunk};
pub use textsim::{ChrfParams, Metric, MetricParams, SimilarityMatrix};
pub use trajcluster::{ClusterError, Dendrogram, Merge, TrajectoryCounts};
