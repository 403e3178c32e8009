//! N-gram similarity between responses: chrF (character n-grams) and a
//! smoothed sentence BLEU (word n-grams), plus symmetrized pairwise matrices.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{SampleKey, TraceSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Char,
    Word,
}

/// What happens to whitespace before character n-grams are extracted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WhitespacePolicy {
    #[default]
    Strip,
    Keep,
}

/// Multiset of n-grams of a single order.
///
/// Keys are the n-gram rendered as a string: the concatenated characters for
/// [`Unit::Char`], the words joined by one space for [`Unit::Word`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramProfile {
    pub order: usize,
    pub unit: Unit,
    counts: HashMap<String, usize>,
    total: usize,
}

impl NGramProfile {
    pub fn new(text: &str, order: usize, unit: Unit, whitespace: WhitespacePolicy) -> Self {
        assert!(order >= 1, "n-gram order must be at least 1");
        let mut counts = HashMap::new();
        match unit {
            Unit::Char => {
                let chars: Vec<char> = match whitespace {
                    WhitespacePolicy::Strip => text.chars().filter(|c| !c.is_whitespace()).collect(),
                    WhitespacePolicy::Keep => text.chars().collect(),
                };
                for w in chars.windows(order) {
                    *counts.entry(w.iter().collect::<String>()).or_insert(0) += 1;
                }
            }
            Unit::Word => {
                let words: Vec<&str> = text.split_whitespace().collect();
                for w in words.windows(order) {
                    *counts.entry(w.join(" ")).or_insert(0) += 1;
                }
            }
        }
        let total = counts.values().sum();
        Self {
            order,
            unit,
            counts,
            total,
        }
    }

    pub fn count(&self, ngram: &str) -> usize {
        self.counts.get(ngram).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Clipped (multiset) overlap with another profile.
    pub fn overlap(&self, other: &Self) -> usize {
        let (small, large) = if self.counts.len() <= other.counts.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.counts.iter().map(|(k, &c)| c.min(large.count(k))).sum()
    }
}

/// Sliding-window n-gram multiset of `text`; char units strip whitespace.
pub fn ngram_profile(text: &str, order: usize, unit: Unit) -> NGramProfile {
    NGramProfile::new(text, order, unit, WhitespacePolicy::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChrfParams {
    pub beta: f64,
    pub max_order: usize,
    #[serde(default)]
    pub whitespace: WhitespacePolicy,
}

impl Default for ChrfParams {
    fn default() -> Self {
        Self {
            beta: 2.0,
            max_order: 6,
            whitespace: WhitespacePolicy::Strip,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Chrf,
    Bleu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum MetricParams {
    Chrf(ChrfParams),
    Bleu { max_order: usize },
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams::Chrf(ChrfParams::default())
    }
}

impl MetricParams {
    pub fn metric(&self) -> Metric {
        match self {
            MetricParams::Chrf(_) => Metric::Chrf,
            MetricParams::Bleu { .. } => Metric::Bleu,
        }
    }
}

/// Per-order n-gram profiles of one text, computed once and reused for every
/// pair the text takes part in.
#[derive(Debug, Clone)]
pub struct TextProfile {
    orders: Vec<NGramProfile>,
    units: usize,
}

impl TextProfile {
    pub fn new(text: &str, max_order: usize, unit: Unit, whitespace: WhitespacePolicy) -> Self {
        let orders = (1..=max_order)
            .map(|n| NGramProfile::new(text, n, unit, whitespace))
            .collect::<Vec<_>>();
        let units = orders.first().map_or(0, NGramProfile::total);
        Self { orders, units }
    }

    pub fn for_params(text: &str, params: &MetricParams) -> Self {
        match params {
            MetricParams::Chrf(p) => Self::new(text, p.max_order, Unit::Char, p.whitespace),
            MetricParams::Bleu { max_order } => Self::new(text, *max_order, Unit::Word, WhitespacePolicy::Strip),
        }
    }

    /// Number of units (characters or words) in the text.
    pub fn units(&self) -> usize {
        self.units
    }

    pub fn order(&self, n: usize) -> &NGramProfile {
        &self.orders[n - 1]
    }

    pub fn max_order(&self) -> usize {
        self.orders.len()
    }
}

fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let den = b2 * precision + recall;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / den
    }
}

/// Clipped overlap counts per order, shared by both argument orders of a pair.
fn overlaps(a: &TextProfile, b: &TextProfile) -> Vec<usize> {
    a.orders.iter().zip(&b.orders).map(|(x, y)| x.overlap(y)).collect()
}

fn chrf_from_overlaps(hyp: &TextProfile, reference: &TextProfile, matches: &[usize], beta: f64) -> f64 {
    match (hyp.units == 0, reference.units == 0) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let (mut p_sum, mut p_n, mut r_sum, mut r_n) = (0.0, 0usize, 0.0, 0usize);
    for ((h, r), &m) in hyp.orders.iter().zip(&reference.orders).zip(matches) {
        if h.total > 0 {
            p_sum += m as f64 / h.total as f64;
            p_n += 1;
        }
        if r.total > 0 {
            r_sum += m as f64 / r.total as f64;
            r_n += 1;
        }
    }
    let precision = if p_n == 0 { 0.0 } else { p_sum / p_n as f64 };
    let recall = if r_n == 0 { 0.0 } else { r_sum / r_n as f64 };
    f_beta(precision, recall, beta)
}

/// chrF of precomputed profiles.
pub fn chrf_profiles(hyp: &TextProfile, reference: &TextProfile, beta: f64) -> f64 {
    chrf_from_overlaps(hyp, reference, &overlaps(hyp, reference), beta)
}

/// chrF_β between `hyp` and `reference` in [0, 1], macro-averaging
/// character n-gram precision and recall over orders 1..=`max_order`.
///
/// Both texts empty scores 1.0, exactly one empty scores 0.0.
pub fn chrf(hyp: &str, reference: &str, beta: f64, max_order: usize) -> f64 {
    let params = ChrfParams {
        beta,
        max_order,
        ..ChrfParams::default()
    };
    chrf_with(hyp, reference, &params)
}

pub fn chrf_with(hyp: &str, reference: &str, params: &ChrfParams) -> f64 {
    assert!(params.beta > 0.0 && params.max_order >= 1);
    let h = TextProfile::new(hyp, params.max_order, Unit::Char, params.whitespace);
    let r = TextProfile::new(reference, params.max_order, Unit::Char, params.whitespace);
    chrf_profiles(&h, &r, params.beta)
}

fn bleu_from_overlaps(hyp: &TextProfile, reference: &TextProfile, matches: &[usize]) -> f64 {
    if hyp.units == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for (n, (h, &m)) in hyp.orders.iter().zip(matches).enumerate() {
        let p = if n == 0 {
            m as f64 / h.total as f64
        } else {
            (m as f64 + 1.0) / (h.total as f64 + 1.0)
        };
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln();
    }
    let geo = (log_sum / hyp.orders.len() as f64).exp();
    let (c, r) = (hyp.units as f64, reference.units as f64);
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    bp * geo
}

pub fn bleu_profiles(hyp: &TextProfile, reference: &TextProfile) -> f64 {
    bleu_from_overlaps(hyp, reference, &overlaps(hyp, reference))
}

/// Sentence BLEU over whitespace-delimited words with add-one smoothing on
/// orders above one and the usual brevity penalty.
pub fn bleu(hyp: &str, reference: &str, max_order: usize) -> f64 {
    assert!(max_order >= 1);
    let h = TextProfile::new(hyp, max_order, Unit::Word, WhitespacePolicy::Strip);
    let r = TextProfile::new(reference, max_order, Unit::Word, WhitespacePolicy::Strip);
    bleu_profiles(&h, &r)
}

/// Scores `metric(a, b)` and `metric(b, a)` from one overlap computation.
pub fn score_pair(a: &TextProfile, b: &TextProfile, params: &MetricParams) -> (f64, f64) {
    let m = overlaps(a, b);
    match params {
        MetricParams::Chrf(p) => (
            chrf_from_overlaps(a, b, &m, p.beta),
            chrf_from_overlaps(b, a, &m, p.beta),
        ),
        MetricParams::Bleu { .. } => (bleu_from_overlaps(a, b, &m), bleu_from_overlaps(b, a, &m)),
    }
}

/// Dense symmetric pairwise similarity over a list of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub ids: Vec<SampleKey>,
    pub params: MetricParams,
    n: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n.max(1))
    }

    /// `1 - s` for every entry.
    pub fn to_distances(&self) -> Vec<Vec<f64>> {
        self.rows().map(|r| r.iter().map(|s| 1.0 - s).collect()).collect()
    }
}

/// Symmetrized similarity `(m(i,j) + m(j,i)) / 2` for every pair of texts.
///
/// Each unordered pair is scored once, so the result is exactly symmetric and
/// does not depend on how rayon schedules the work.
pub fn similarity_values(texts: &[&str], params: &MetricParams) -> Vec<f64> {
    let n = texts.len();
    let profiles: Vec<TextProfile> = texts.par_iter().map(|t| TextProfile::for_params(t, params)).collect();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let scores: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = score_pair(&profiles[i], &profiles[j], params);
            (a + b) / 2.0
        })
        .collect();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
    }
    for (&(i, j), &s) in pairs.iter().zip(&scores) {
        values[i * n + j] = s;
        values[j * n + i] = s;
    }
    values
}

pub fn similarity_matrix(samples: &[&TraceSample], params: &MetricParams) -> SimilarityMatrix {
    let texts: Vec<&str> = samples.iter().map(|s| s.text.as_str()).collect();
    SimilarityMatrix {
        ids: samples.iter().map(|s| s.key()).collect(),
        params: *params,
        n: samples.len(),
        values: similarity_values(&texts, params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn profile_enumeration() {
        let p = ngram_profile("abab", 2, Unit::Char);
        assert_eq!((p.count("ab"), p.count("ba"), p.total()), (2, 1, 3));
        assert!(ngram_profile("", 3, Unit::Char).is_empty());
        let w = ngram_profile("a b a", 1, Unit::Word);
        assert_eq!((w.count("a"), w.count("b")), (2, 1));
        // whitespace is stripped for char n-grams by default
        assert_eq!(ngram_profile("a b", 2, Unit::Char).count("ab"), 1);
    }

    #[test]
    fn chrf_edge_cases() {
        assert_eq!(chrf("same text", "same text", 2.0, 6), 1.0);
        assert_eq!(chrf("same text", "same text", 0.5, 3), 1.0);
        assert_eq!(chrf("aaaa", "bbbb", 2.0, 2), 0.0);
        assert_eq!(chrf("", "", 2.0, 6), 1.0);
        assert_eq!(chrf("", "x", 2.0, 6), 0.0);
        assert_eq!(chrf("x", "", 2.0, 6), 0.0);
    }

    #[test]
    fn chrf_abcd_abce() {
        // order 1: 3 of 4 match; order 2: ab, bc match of 3.
        let p = (3.0 / 4.0 + 2.0 / 3.0) / 2.0;
        let expected = 5.0 * p * p / (4.0 * p + p);
        assert!((chrf("abcd", "abce", 2.0, 2) - expected).abs() < 1e-15);
    }

    #[test]
    fn bleu_edge_cases() {
        assert_eq!(bleu("the cat sat on the mat", "the cat sat on the mat", 4), 1.0);
        assert_eq!(bleu("a b c", "d e f", 4), 0.0);
        assert_eq!(bleu("", "d e f", 4), 0.0);
    }

    #[test]
    fn bleu_direct_formula() {
        let hyp = "the cat sat";
        let r = "the cat sat on the mat";
        // p1 = 3/3, p2 = (2+1)/(2+1), p3 = (1+1)/(1+1), p4 = (0+1)/(0+1)
        let bp = (1.0f64 - 6.0 / 3.0).exp();
        assert!((bleu(hyp, r, 4) - bp).abs() < 1e-15);
        let hyp = "a cat sat on a hat";
        // p1 = 3/6 (cat sat on); p2: "cat sat","sat on" -> (2+1)/(5+1); p3: "cat sat on" (1+1)/(4+1); p4: (0+1)/(3+1)
        let geo = (0.5f64.ln() + 0.5f64.ln() + 0.4f64.ln() + 0.25f64.ln()) / 4.0;
        assert!((bleu(hyp, r, 4) - geo.exp()).abs() < 1e-15);
    }

    #[test]
    fn matrix_small_cases() {
        let params = MetricParams::default();
        assert_eq!(similarity_values(&["abc", "abc"], &params), vec![1.0; 4]);
        assert_eq!(similarity_values(&["abc"], &params), vec![1.0]);
    }

    #[test]
    fn appended_text_does_not_raise_recall() {
        // chrF(hyp, ref) recall is over ref n-grams; adding unrelated text to
        // ref can only dilute it.
        let hyp = TextProfile::new("the answer is seven", 6, Unit::Char, WhitespacePolicy::Strip);
        let r1 = TextProfile::new("the answer is six", 6, Unit::Char, WhitespacePolicy::Strip);
        let r2 = TextProfile::new("the answer is six qqqq zzzz", 6, Unit::Char, WhitespacePolicy::Strip);
        let recall = |r: &TextProfile| {
            let m = overlaps(&hyp, r);
            (0..6).map(|n| m[n] as f64 / r.orders[n].total as f64).sum::<f64>()
        };
        assert!(recall(&r2) <= recall(&r1));
    }

    proptest! {
        #[test]
        fn scores_in_unit_interval(a in "[a-d ]{0,30}", b in "[a-d ]{0,30}") {
            let c = chrf(&a, &b, 2.0, 6);
            prop_assert!((0.0..=1.0).contains(&c));
            let s = bleu(&a, &b, 4);
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn matrix_exactly_symmetric(texts in proptest::collection::vec("[a-e ]{0,20}", 1..6)) {
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let v = similarity_values(&refs, &MetricParams::default());
            let n = refs.len();
            for i in 0..n {
                prop_assert_eq!(v[i * n + i], 1.0);
                for j in 0..n {
                    prop_assert_eq!(v[i * n + j].to_bits(), v[j * n + i].to_bits());
                }
            }
        }
    }
}
