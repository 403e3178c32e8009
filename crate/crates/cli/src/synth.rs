//! Synthetic two-model corpus with known structure.
//!
//! Every sentence instantiates a template; its embedding is the template's
//! centre plus tiny noise, so k-means with one centre per template recovers
//! the templates as nodes.
//!
//! * `squeezed` walks a few fixed routes over six templates per problem,
//!   returning to one hub sentence between detours.
//! * `expanded` takes random walks over thirty templates per problem.
//!
//! Both end every response with the same answer sentence.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reasonpath::corpus::TraceSample;
use reasonpath::embedspace::{write_embeddings, EmbeddedSentence};
use reasonpath::segmenter::{segment_sample, SegmentParams};
use serde_json::json;

pub const SQUEEZED: &str = "squeezed";
pub const EXPANDED: &str = "expanded";

const HUB_TEMPLATES: usize = 6;
const SPREAD_TEMPLATES: usize = 30;
const SPREAD_STEPS: usize = 8;

// Routes over the hub templates: 0 is the hub, 1 a secondary hub, 2..=5 leaves.
const ROUTES: [&[usize]; 3] = [&[0, 2, 0, 3, 1, 4, 0], &[0, 3, 0, 1, 5, 0, 2], &[0, 1, 2, 0, 5]];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSpec {
    pub problems: usize,
    pub samples: usize,
    pub dim: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            problems: 3,
            samples: 16,
            dim: 16,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub samples: Vec<TraceSample>,
    pub gold: BTreeMap<String, String>,
    pub embeddings: Vec<EmbeddedSentence>,
    /// Distinct templates that occur, i.e. the number of true nodes.
    pub n_templates: usize,
}

struct Template {
    words: Vec<String>,
    slot: usize,
}

impl Template {
    fn render(&self, rng: &mut ChaCha8Rng) -> String {
        let mut out = String::new();
        for (i, w) in self.words.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            if i == self.slot {
                out.push_str(&format!("{} ", rng.gen_range(2..100)));
            }
            out.push_str(w);
        }
        out.push('.');
        let mut chars = out.chars();
        let first = chars.next().unwrap().to_ascii_uppercase();
        std::iter::once(first).chain(chars).collect()
    }
}

fn vocabulary(rng: &mut ChaCha8Rng, size: usize) -> Vec<String> {
    const C: &[u8] = b"bdfgklmnprstvz";
    const V: &[u8] = b"aeiou";
    let mut words = BTreeSet::new();
    while words.len() < size {
        let syllables = rng.gen_range(2..=3);
        let w: String = (0..syllables)
            .flat_map(|_| [*C.choose(rng).unwrap() as char, *V.choose(rng).unwrap() as char])
            .collect();
        words.insert(w);
    }
    let mut v: Vec<String> = words.into_iter().collect();
    v.shuffle(rng);
    v
}

fn template(rng: &mut ChaCha8Rng, vocab: &[String]) -> Template {
    let len = rng.gen_range(12..=15);
    Template {
        words: (0..len).map(|_| vocab.choose(rng).unwrap().clone()).collect(),
        slot: rng.gen_range(2..len),
    }
}

fn answer_sentence(answer: u32) -> String {
    format!("So after checking every case carefully the final answer we report is \\boxed{{{answer}}}.")
}

pub fn problem_id(p: usize) -> String {
    format!("p{:02}", p + 1)
}

fn gold_for(p: usize) -> u32 {
    17 + 11 * p as u32
}

pub fn generate(spec: &SynthSpec) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vocab = vocabulary(&mut rng, 400);

    // template 0 is the shared answer sentence
    let per_problem = HUB_TEMPLATES + SPREAD_TEMPLATES;
    let n_templates = 1 + spec.problems * per_problem;
    let templates: Vec<Template> = (0..n_templates).map(|_| template(&mut rng, &vocab)).collect();
    let centres: Vec<Vec<f64>> = (0..n_templates)
        .map(|_| (0..spec.dim).map(|_| rng.gen_range(-10.0..10.0)).collect())
        .collect();

    let mut samples = Vec::new();
    let mut gold = BTreeMap::new();
    let mut routes: BTreeMap<(String, String, usize), Vec<usize>> = BTreeMap::new();
    for p in 0..spec.problems {
        let pid = problem_id(p);
        let answer = gold_for(p);
        gold.insert(pid.clone(), answer.to_string());
        let hub_base = 1 + p * per_problem;
        let spread_base = hub_base + HUB_TEMPLATES;
        for model in [EXPANDED, SQUEEZED] {
            for i in 0..spec.samples {
                let (steps, correct): (Vec<usize>, bool) = if model == SQUEEZED {
                    let family = [0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2][i * 16 / spec.samples];
                    (ROUTES[family].iter().map(|t| hub_base + t).collect(), family != 2)
                } else {
                    let mut steps: Vec<usize> = Vec::with_capacity(SPREAD_STEPS);
                    while steps.len() < SPREAD_STEPS {
                        let t = spread_base + rng.gen_range(0..SPREAD_TEMPLATES);
                        if steps.last() != Some(&t) {
                            steps.push(t);
                        }
                    }
                    (steps, i % 3 != 2)
                };
                let mut text: Vec<String> = steps.iter().map(|&t| templates[t].render(&mut rng)).collect();
                text.push(answer_sentence(if correct { answer } else { answer + 1 }));
                let mut route = steps;
                route.push(0);
                routes.insert((pid.clone(), model.to_owned(), i), route);
                samples.push(TraceSample {
                    problem_id: pid.clone(),
                    model_id: model.to_owned(),
                    sample_index: i,
                    text: text.join(" "),
                    correct,
                    extracted_answer: None,
                    token_count: None,
                });
            }
        }
    }

    let mut embeddings = Vec::new();
    let mut used = BTreeSet::new();
    for s in &samples {
        let route = &routes[&(s.problem_id.clone(), s.model_id.clone(), s.sample_index)];
        let chunks = segment_sample(s, &SegmentParams::default());
        assert_eq!(
            chunks.len(),
            route.len(),
            "sample {} must segment into one chunk per sentence",
            s.key()
        );
        for (c, &t) in chunks.into_iter().zip(route) {
            used.insert(t);
            let vector = centres[t]
                .iter()
                .map(|x| ((x + rng.gen_range(-1e-3..1e-3)) * 1e6).round() / 1e6)
                .collect();
            embeddings.push(EmbeddedSentence { chunk: c.chunk, vector });
        }
    }

    SynthCorpus {
        samples,
        gold,
        embeddings,
        n_templates: used.len(),
    }
}

impl SynthCorpus {
    /// Corpus lines carry no correctness flag; labels come from the gold file.
    pub fn write_corpus<W: Write>(&self, mut w: W) -> io::Result<()> {
        for s in &self.samples {
            let line = json!({
                "problem_id": s.problem_id,
                "model_id": s.model_id,
                "sample_index": s.sample_index,
                "text": s.text,
            });
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn write_problems<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (p, a) in &self.gold {
            writeln!(w, "{}", json!({"problem_id": p, "gold_answer": a}))?;
        }
        Ok(())
    }

    pub fn config_toml(&self) -> String {
        format!(
            "corpus = \"corpus.jsonl\"\n\
             problems = \"problems.jsonl\"\n\
             out = \"out\"\n\
             seed = 0\n\
             threshold = 0.4\n\
             ks = [1, 2, 4, 8, 16]\n\
             \n\
             [embed]\n\
             source = \"file\"\n\
             path = \"embeddings.jsonl\"\n\
             \n\
             [kmeans]\n\
             k = {}\n",
            self.n_templates
        )
    }

    /// Writes corpus.jsonl, problems.jsonl, embeddings.jsonl and config.toml.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let create = |name: &str| std::fs::File::create(dir.join(name)).map(io::BufWriter::new);
        let mut w = create("corpus.jsonl")?;
        self.write_corpus(&mut w)?;
        w.flush()?;
        let mut w = create("problems.jsonl")?;
        self.write_problems(&mut w)?;
        w.flush()?;
        let mut w = create("embeddings.jsonl")?;
        write_embeddings(&mut w, &self.embeddings)?;
        w.flush()?;
        std::fs::write(dir.join("config.toml"), self.config_toml())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_embedding_per_sentence() {
        let spec = SynthSpec {
            problems: 2,
            samples: 8,
            ..Default::default()
        };
        let c = generate(&spec);
        assert_eq!(c.samples.len(), 2 * 2 * 8);
        let sentences: usize = c.samples.iter().map(|s| s.text.matches(". ").count() + 1).sum();
        assert_eq!(c.embeddings.len(), sentences);
        assert!(c.embeddings.iter().all(|e| e.vector.len() == 16));
    }

    #[test]
    fn deterministic() {
        let spec = SynthSpec::default();
        let (a, b) = (generate(&spec), generate(&spec));
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.embeddings, b.embeddings);
    }

    #[test]
    fn labels_follow_boxed_answers() {
        let c = generate(&SynthSpec::default());
        for s in &c.samples {
            let verdict = reasonpath::corpus::verify_sample(&s.text, &c.gold[&s.problem_id]);
            assert_eq!(verdict, s.correct, "{}", s.key());
        }
    }
}
