//! Sentence embeddings (from JSONL files or an HTTP embedding service) and
//! node induction by K-means.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segmenter::{ChunkRef, SentenceChunk};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("record {chunk} (line {line}) has dimension {found}, expected {expected}")]
    Dimension {
        line: usize,
        chunk: ChunkRef,
        expected: usize,
        found: usize,
    },
    #[error("record {chunk} (line {line}) has a non-finite component")]
    NonFinite { line: usize, chunk: ChunkRef },
    #[error("batch {batch} failed after {attempts} attempts: {message}")]
    Transport {
        batch: usize,
        attempts: usize,
        message: String,
    },
    #[error("batch {batch}: protocol violation: {message}")]
    Protocol { batch: usize, message: String },
    #[error("batch {batch} returned dimension {found}, earlier batches had {expected}")]
    DimensionDrift {
        batch: usize,
        expected: usize,
        found: usize,
    },
    #[error("point dimension {found} does not match centroid dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("k-means: {0}")]
    Domain(String),
}

pub type Result<T, E = EmbedError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedSentence {
    #[serde(flatten)]
    pub chunk: ChunkRef,
    pub vector: Vec<f64>,
}

/// Reads an embeddings JSONL file, checking that every vector is finite and
/// that all share one dimension (`expected_dim` if given).
pub fn load_embeddings(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<Vec<EmbeddedSentence>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| EmbedError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_embeddings(BufReader::new(file), expected_dim)
}

pub fn read_embeddings<R: BufRead>(reader: R, expected_dim: Option<usize>) -> Result<Vec<EmbeddedSentence>> {
    let mut dim = expected_dim;
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| EmbedError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddedSentence = serde_json::from_str(&line).map_err(|e| EmbedError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let d = *dim.get_or_insert(rec.vector.len());
        if rec.vector.len() != d {
            return Err(EmbedError::Dimension {
                line: line_no,
                expected: d,
                found: rec.vector.len(),
                chunk: rec.chunk,
            });
        }
        if rec.vector.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite {
                line: line_no,
                chunk: rec.chunk,
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_embeddings<W: Write>(mut w: W, embeddings: &[EmbeddedSentence]) -> io::Result<()> {
    for e in embeddings {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: Vec<&'a str>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

#[derive(Deserialize)]
struct HealthResponse {
    status: String,
    dim: usize,
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
}

/// Client for the `/embed` protocol.
#[derive(Debug, Clone)]
pub struct EmbedClient {
    pub endpoint: String,
    pub batch_size: usize,
    pub max_retries: usize,
    pub backoff: Duration,
    pub max_in_flight: usize,
    pub timeout: Duration,
}

impl EmbedClient {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            batch_size: 32,
            max_retries: 3,
            backoff: Duration::from_millis(200),
            max_in_flight: 4,
            timeout: Duration::from_secs(60),
        }
    }

    fn base_url(&self) -> &str {
        let base = self.endpoint.trim_end_matches('/');
        base.strip_suffix("/embed").unwrap_or(base)
    }

    fn http(&self) -> Result<reqwest::blocking::Client> {
        reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| EmbedError::Transport {
                batch: 0,
                attempts: 0,
                message: e.to_string(),
            })
    }

    /// Probes `GET /health` and returns the dimension the service reports.
    pub fn health(&self) -> Result<usize> {
        let url = format!("{}/health", self.base_url());
        let resp = self.http()?.get(&url).send().map_err(|e| EmbedError::Transport {
            batch: 0,
            attempts: 1,
            message: e.to_string(),
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(EmbedError::Protocol {
                batch: 0,
                message: format!("health check returned {status}"),
            });
        }
        let body: HealthResponse = resp.json().map_err(|e| EmbedError::Protocol {
            batch: 0,
            message: format!("malformed health body: {e}"),
        })?;
        if body.status != "ok" {
            return Err(EmbedError::Protocol {
                batch: 0,
                message: format!("service status {:?}", body.status),
            });
        }
        Ok(body.dim)
    }

    fn request_batch(
        &self,
        http: &reqwest::blocking::Client,
        url: &str,
        batch: usize,
        texts: &[&str],
    ) -> Result<EmbedResponse> {
        let mut last_error = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.saturating_pow(attempt as u32 - 1));
            }
            let resp = match http.post(url).json(&EmbedRequest { texts: texts.to_vec() }).send() {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("embed batch {batch} attempt {attempt}: {e}");
                    last_error = e.to_string();
                    continue;
                }
            };
            let status = resp.status();
            if status.is_server_error() {
                last_error = format!("server returned {status}");
                log::warn!("embed batch {batch} attempt {attempt}: {last_error}");
                continue;
            }
            if !status.is_success() {
                let message = resp
                    .json::<ErrorBody>()
                    .map(|b| b.error)
                    .unwrap_or_else(|_| String::from("no error body"));
                return Err(EmbedError::Protocol {
                    batch,
                    message: format!("status {status}: {message}"),
                });
            }
            return resp.json::<EmbedResponse>().map_err(|e| EmbedError::Protocol {
                batch,
                message: format!("malformed response body: {e}"),
            });
        }
        Err(EmbedError::Transport {
            batch,
            attempts: self.max_retries + 1,
            message: last_error,
        })
    }

    /// One vector per chunk, order-aligned with `chunks`.
    pub fn fetch(&self, chunks: &[SentenceChunk]) -> Result<Vec<EmbeddedSentence>> {
        if chunks.is_empty() {
            return Ok(Vec::new());
        }
        assert!(self.batch_size >= 1 && self.max_in_flight >= 1);
        let http = self.http()?;
        let url = format!("{}/embed", self.base_url());
        let batches: Vec<&[SentenceChunk]> = chunks.chunks(self.batch_size).collect();
        let mut responses: Vec<Option<Result<EmbedResponse>>> = Vec::with_capacity(batches.len());
        for (wave_no, wave) in batches.chunks(self.max_in_flight).enumerate() {
            let first = wave_no * self.max_in_flight;
            let results: Vec<Result<EmbedResponse>> = std::thread::scope(|scope| {
                let handles: Vec<_> = wave
                    .iter()
                    .enumerate()
                    .map(|(i, b)| {
                        let (http, url) = (&http, url.as_str());
                        scope.spawn(move || {
                            let texts: Vec<&str> = b.iter().map(|c| c.text.as_str()).collect();
                            self.request_batch(http, url, first + i, &texts)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("embedding worker panicked"))
                    .collect()
            });
            responses.extend(results.into_iter().map(Some));
        }

        let mut dim: Option<usize> = None;
        let mut out = Vec::with_capacity(chunks.len());
        for (batch, (chunk_batch, resp)) in batches.iter().zip(responses).enumerate() {
            let resp = resp.expect("every batch has a response")?;
            if resp.vectors.len() != chunk_batch.len() {
                return Err(EmbedError::Protocol {
                    batch,
                    message: format!(
                        "sent {} texts, received {} vectors",
                        chunk_batch.len(),
                        resp.vectors.len()
                    ),
                });
            }
            let expected = *dim.get_or_insert(resp.dim);
            if resp.dim != expected {
                return Err(EmbedError::DimensionDrift {
                    batch,
                    expected,
                    found: resp.dim,
                });
            }
            for (c, v) in chunk_batch.iter().zip(resp.vectors) {
                if v.len() != expected {
                    return Err(EmbedError::DimensionDrift {
                        batch,
                        expected,
                        found: v.len(),
                    });
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(EmbedError::Protocol {
                        batch,
                        message: format!("non-finite component for {}", c.chunk),
                    });
                }
                out.push(EmbeddedSentence {
                    chunk: c.chunk.clone(),
                    vector: v,
                });
            }
        }
        Ok(out)
    }
}

/// Embeds `chunks` through the service at `endpoint` with default retry
/// settings.
pub fn fetch_embeddings(endpoint: &str, chunks: &[SentenceChunk], batch_size: usize) -> Result<Vec<EmbeddedSentence>> {
    let client = EmbedClient {
        batch_size,
        ..EmbedClient::new(endpoint)
    };
    client.fetch(chunks)
}

/// Scales a vector to unit L2 norm; zero vectors are left alone.
pub fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub n_init: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            n_init: 10,
            max_iter: 300,
            tol: 1e-4,
            seed,
        }
    }
}

/// `min(2000, n_points / 2)`, at least 1.
pub fn default_k(n_points: usize) -> usize {
    (n_points / 2).clamp(1, 2000)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub seed: u64,
    pub iterations_run: usize,
    /// Index of the winning restart.
    pub restart: usize,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_history: Vec<f64>,
}

impl KMeansModel {
    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct NodeAssignment<'a> {
    pub chunk: &'a ChunkRef,
    pub node_id: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid by squared Euclidean distance, lowest id on ties.
pub fn nearest(centroids: &[Vec<f64>], point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, point);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn assign_all(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>, f64) {
    let pairs: Vec<(usize, f64)> = points.par_iter().map(|p| nearest(centroids, p)).collect();
    let (labels, dists): (Vec<usize>, Vec<f64>) = pairs.into_iter().unzip();
    // fixed summation order
    let inertia = dists.iter().sum();
    (labels, dists, inertia)
}

/// k-means++ seeding: first centre uniform, the rest drawn with probability
/// proportional to squared distance from the nearest chosen centre.
pub fn kmeanspp_init<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let r = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            acc += w;
            if acc > r && w > 0.0 {
                pick = Some(i);
                break;
            }
        }
        let pick = pick.unwrap_or_else(|| {
            d2.iter()
                .rposition(|&w| w > 0.0)
                .expect("fewer distinct points than clusters")
        });
        let c = points[pick].clone();
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Outcome of one Lloyd run from fixed initial centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
    pub inertia_history: Vec<f64>,
}

/// Lloyd iterations until the total squared centroid shift drops below
/// `tol` or `max_iter` updates have run. Empty clusters are re-seeded at the
/// points farthest from their centroids.
pub fn lloyd(points: &[Vec<f64>], init: Vec<Vec<f64>>, max_iter: usize, tol: f64) -> LloydRun {
    let k = init.len();
    let dim = init[0].len();
    let mut centroids = init;
    let (mut labels, mut dists, mut inertia) = assign_all(points, &centroids);
    let mut history = vec![inertia];
    let mut iterations = 0;
    for _ in 0..max_iter {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut far: Vec<usize> = (0..points.len()).collect();
        far.sort_by(|&a, &b| dists[b].total_cmp(&dists[a]).then(a.cmp(&b)));
        let mut far = far.into_iter();
        let mut shift = 0.0;
        for c in 0..k {
            let next = if counts[c] == 0 {
                points[far.next().expect("more points than clusters")].clone()
            } else {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            };
            shift += sq_dist(&next, &centroids[c]);
            centroids[c] = next;
        }
        (labels, dists, inertia) = assign_all(points, &centroids);
        history.push(inertia);
        iterations += 1;
        if shift < tol {
            break;
        }
    }
    LloydRun {
        centroids,
        labels,
        inertia,
        iterations,
        inertia_history: history,
    }
}

fn distinct_points(points: &[Vec<f64>]) -> usize {
    points
        .iter()
        .map(|p| p.iter().map(|x| (x + 0.0).to_bits()).collect::<Vec<u64>>())
        .collect::<HashSet<_>>()
        .len()
}

/// RNG for restart `restart` of a fit seeded with `seed`.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// K-means with `n_init` k-means++ restarts; keeps the restart with the
/// lowest inertia (earliest restart on ties).
pub fn kmeans_fit(points: &[Vec<f64>], params: &KMeansParams) -> Result<KMeansModel> {
    if params.k == 0 || params.n_init == 0 {
        return Err(EmbedError::Domain("k and n_init must be at least 1".into()));
    }
    let dim = points.first().map_or(0, Vec::len);
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(EmbedError::DimensionMismatch {
            expected: dim,
            found: p.len(),
        });
    }
    let distinct = distinct_points(points);
    if params.k > distinct {
        return Err(EmbedError::Domain(format!(
            "k = {} exceeds the {distinct} distinct points",
            params.k
        )));
    }
    let runs: Vec<LloydRun> = (0..params.n_init)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(params.seed, r);
            let init = kmeanspp_init(points, params.k, &mut rng);
            lloyd(points, init, params.max_iter, params.tol)
        })
        .collect();
    let (restart, best) = runs
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.inertia.total_cmp(&b.inertia).then(i.cmp(j)))
        .expect("n_init >= 1");
    Ok(KMeansModel {
        k: params.k,
        centroids: best.centroids,
        inertia: best.inertia,
        seed: params.seed,
        iterations_run: best.iterations,
        restart,
        inertia_history: best.inertia_history,
    })
}

/// Nearest-centroid node for every embedding.
pub fn assign<'a>(model: &KMeansModel, embeddings: &'a [EmbeddedSentence]) -> Result<Vec<NodeAssignment<'a>>> {
    let dim = model.dim();
    embeddings
        .iter()
        .map(|e| {
            if e.vector.len() != dim {
                return Err(EmbedError::DimensionMismatch {
                    expected: dim,
                    found: e.vector.len(),
                });
            }
            Ok(NodeAssignment {
                chunk: &e.chunk,
                node_id: nearest(&model.centroids, &e.vector).0,
            })
        })
        .collect()
}
