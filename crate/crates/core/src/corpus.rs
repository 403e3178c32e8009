//! Sampled traces, correctness labels and the problem × model × sample layout.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate sample ({problem_id}, {model_id}, {sample_index})")]
    Duplicate {
        problem_id: String,
        model_id: String,
        sample_index: usize,
    },
    #[error("line {line}: sample ({problem_id}, {model_id}, {sample_index}) has no `correct` flag and no gold answer")]
    Unlabeled {
        line: usize,
        problem_id: String,
        model_id: String,
        sample_index: usize,
    },
    #[error("sample indices for ({problem_id}, {model_id}) are not contiguous from 0 (missing index {missing})")]
    NonContiguous {
        problem_id: String,
        model_id: String,
        missing: usize,
    },
    #[error("conflicting gold answers for problem {0}")]
    ConflictingGold(String),
    #[error("unknown (problem, model) pair ({0}, {1})")]
    UnknownPair(String, String),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// Identifies one sampled response.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleKey {
    pub problem_id: String,
    pub model_id: String,
    pub sample_index: usize,
}

impl std::fmt::Display for SampleKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/{}", self.problem_id, self.model_id, self.sample_index)
    }
}

/// One sampled model response for one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub problem_id: String,
    pub model_id: String,
    pub sample_index: usize,
    pub text: String,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extracted_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_count: Option<usize>,
}

impl TraceSample {
    pub fn key(&self) -> SampleKey {
        SampleKey {
            problem_id: self.problem_id.clone(),
            model_id: self.model_id.clone(),
            sample_index: self.sample_index,
        }
    }

    /// Token count if known, else the whitespace-delimited word count.
    pub fn tokens(&self) -> usize {
        self.token_count.unwrap_or_else(|| self.text.split_whitespace().count())
    }
}

/// Input file formats accepted by [`Corpus::ingest`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Jsonl,
}

#[derive(Debug, Deserialize)]
struct RawSample {
    problem_id: String,
    model_id: String,
    sample_index: usize,
    text: String,
    #[serde(default)]
    correct: Option<bool>,
    #[serde(default)]
    gold_answer: Option<String>,
    #[serde(default)]
    extracted_answer: Option<String>,
    #[serde(default)]
    token_count: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct RawProblem {
    problem_id: String,
    gold_answer: String,
}

/// Problems × models × samples. Immutable once built.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    problems: BTreeMap<String, Option<String>>,
    models: BTreeSet<String>,
    // sorted by (problem_id, model_id, sample_index)
    samples: Vec<TraceSample>,
    groups: BTreeMap<(String, String), Range<usize>>,
}

impl Corpus {
    /// Reads a JSONL sample file.
    pub fn ingest(path: impl AsRef<Path>, format: Format) -> Result<Self> {
        Self::ingest_with_problems(path, None::<&Path>, format)
    }

    /// Reads a JSONL sample file, taking gold answers from an optional
    /// problems file in addition to per-line `gold_answer` fields.
    pub fn ingest_with_problems(
        path: impl AsRef<Path>,
        problems: Option<impl AsRef<Path>>,
        format: Format,
    ) -> Result<Self> {
        let Format::Jsonl = format;
        let mut gold = BTreeMap::new();
        if let Some(p) = problems {
            gold = read_problems(p.as_ref())?;
        }
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_reader(BufReader::new(file), gold)
    }

    /// Parses JSONL from any reader. `gold` supplies answers for problems
    /// whose lines carry none.
    pub fn from_reader<R: BufRead>(reader: R, mut gold: BTreeMap<String, String>) -> Result<Self> {
        let mut raws = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| CorpusError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawSample = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if let Some(g) = &raw.gold_answer {
                match gold.get(&raw.problem_id) {
                    Some(existing) if existing != g => {
                        return Err(CorpusError::ConflictingGold(raw.problem_id));
                    }
                    Some(_) => {}
                    None => {
                        gold.insert(raw.problem_id.clone(), g.clone());
                    }
                }
            }
            raws.push((line_no, raw));
        }

        let mut problems: BTreeMap<String, Option<String>> = BTreeMap::new();
        let mut samples = Vec::with_capacity(raws.len());
        for (line, raw) in raws {
            let problem_gold = gold.get(&raw.problem_id).cloned();
            let correct = match (raw.correct, &problem_gold) {
                (Some(c), _) => c,
                (None, Some(g)) => verify_sample(&raw.text, g),
                (None, None) => {
                    return Err(CorpusError::Unlabeled {
                        line,
                        problem_id: raw.problem_id,
                        model_id: raw.model_id,
                        sample_index: raw.sample_index,
                    })
                }
            };
            let extracted_answer = raw
                .extracted_answer
                .or_else(|| last_boxed(&raw.text).map(normalize_answer));
            problems.insert(raw.problem_id.clone(), problem_gold);
            samples.push(TraceSample {
                problem_id: raw.problem_id,
                model_id: raw.model_id,
                sample_index: raw.sample_index,
                text: raw.text,
                correct,
                extracted_answer,
                token_count: raw.token_count,
            });
        }
        Self::build(problems, samples)
    }

    /// Builds a corpus from already-labelled samples.
    pub fn from_samples(samples: Vec<TraceSample>, gold: &BTreeMap<String, String>) -> Result<Self> {
        let problems = samples
            .iter()
            .map(|s| (s.problem_id.clone(), gold.get(&s.problem_id).cloned()))
            .collect();
        Self::build(problems, samples)
    }

    fn build(problems: BTreeMap<String, Option<String>>, mut samples: Vec<TraceSample>) -> Result<Self> {
        samples.sort_by(|a, b| {
            (&a.problem_id, &a.model_id, a.sample_index).cmp(&(&b.problem_id, &b.model_id, b.sample_index))
        });
        for w in samples.windows(2) {
            if w[0].problem_id == w[1].problem_id
                && w[0].model_id == w[1].model_id
                && w[0].sample_index == w[1].sample_index
            {
                return Err(CorpusError::Duplicate {
                    problem_id: w[1].problem_id.clone(),
                    model_id: w[1].model_id.clone(),
                    sample_index: w[1].sample_index,
                });
            }
        }

        let mut groups = BTreeMap::new();
        let mut models = BTreeSet::new();
        let mut start = 0;
        while start < samples.len() {
            let (p, m) = (&samples[start].problem_id, &samples[start].model_id);
            let mut end = start;
            while end < samples.len() && &samples[end].problem_id == p && &samples[end].model_id == m {
                if samples[end].sample_index != end - start {
                    return Err(CorpusError::NonContiguous {
                        problem_id: p.clone(),
                        model_id: m.clone(),
                        missing: end - start,
                    });
                }
                end += 1;
            }
            models.insert(m.clone());
            groups.insert((p.clone(), m.clone()), start..end);
            start = end;
        }

        Ok(Self {
            problems,
            models,
            samples,
            groups,
        })
    }

    /// Writes the corpus back out as JSONL, one sample per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            #[serde(flatten)]
            sample: &'a TraceSample,
            #[serde(skip_serializing_if = "Option::is_none")]
            gold_answer: Option<&'a String>,
        }
        for s in &self.samples {
            let line = Line {
                sample: s,
                gold_answer: self.problems.get(&s.problem_id).and_then(Option::as_ref),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn problem_ids(&self) -> impl Iterator<Item = &str> {
        self.problems.keys().map(String::as_str)
    }

    pub fn model_ids(&self) -> impl Iterator<Item = &str> {
        self.models.iter().map(String::as_str)
    }

    pub fn gold_answer(&self, problem_id: &str) -> Option<&str> {
        self.problems.get(problem_id)?.as_deref()
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// All (problem, model) pairs present, in sorted order.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.groups.keys().map(|(p, m)| (p.as_str(), m.as_str()))
    }

    /// Samples of one (problem, model) pair ordered by sample index.
    pub fn samples_for(&self, problem_id: &str, model_id: &str) -> Result<&[TraceSample]> {
        self.groups
            .get(&(problem_id.to_owned(), model_id.to_owned()))
            .map(|r| &self.samples[r.clone()])
            .ok_or_else(|| CorpusError::UnknownPair(problem_id.to_owned(), model_id.to_owned()))
    }

    /// Partitions a pair's samples into (correct, incorrect), keeping order.
    pub fn split_by_correctness(
        &self,
        problem_id: &str,
        model_id: &str,
    ) -> Result<(Vec<&TraceSample>, Vec<&TraceSample>)> {
        Ok(self.samples_for(problem_id, model_id)?.iter().partition(|s| s.correct))
    }
}

fn read_problems(path: &Path) -> Result<BTreeMap<String, String>> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut out = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let p: RawProblem = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if let Some(prev) = out.insert(p.problem_id.clone(), p.gold_answer.clone()) {
            if prev != p.gold_answer {
                return Err(CorpusError::ConflictingGold(p.problem_id));
            }
        }
    }
    Ok(out)
}

/// Content of the last balanced `\boxed{...}` group in `text`.
pub fn last_boxed(text: &str) -> Option<&str> {
    const OPEN: &str = "\\boxed{";
    let mut found = None;
    let mut from = 0;
    while let Some(rel) = text[from..].find(OPEN) {
        let body_start = from + rel + OPEN.len();
        let mut depth = 1usize;
        let mut end = None;
        for (i, ch) in text[body_start..].char_indices() {
            match ch {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(body_start + i);
                        break;
                    }
                }
                _ => {}
            }
        }
        if let Some(end) = end {
            found = Some(&text[body_start..end]);
        }
        from = body_start;
    }
    found
}

/// Trims, strips surrounding `$` and collapses internal whitespace.
pub fn normalize_answer(answer: &str) -> String {
    let stripped = answer.trim().trim_matches('$');
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// True when the last boxed answer in `text` equals `gold` after
/// normalization. A missing boxed group is simply incorrect.
pub fn verify_sample(text: &str, gold_answer: &str) -> bool {
    let gold = normalize_answer(gold_answer);
    if gold.is_empty() {
        return false;
    }
    last_boxed(text).is_some_and(|a| normalize_answer(a) == gold)
}
