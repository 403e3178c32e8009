//! Splits a response into reasoning-step sentences.
//!
//! Rules, in order:
//! 1. keep only the text before the first `</think>`;
//! 2. cut after `.`, `?` or `!` when the next character is a space, and at
//!    blank lines (`\n\n`, `\r\n\r\n`); the whitespace after a cut stays with
//!    the preceding chunk, so chunk spans tile the truncated text exactly;
//! 3. chunks under `min_tokens` merge into the previous chunk (the first chunk
//!    merges forward);
//! 4. chunks over `max_tokens` are split at the `max_tokens` word boundary,
//!    repeatedly. A remainder shorter than `min_tokens` borrows words from
//!    the piece before it when both can then stay within bounds, which is
//!    always possible when `max_tokens >= 2 * min_tokens`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::{SampleKey, TraceSample};

pub const THINK_END: &str = "</think>";

/// Counts tokens in a piece of text. Must be monotone under extension.
pub trait TokenCounter: Sync {
    fn count(&self, text: &str) -> usize;
}

/// Whitespace-delimited words.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordCounter;

impl TokenCounter for WordCounter {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

impl<F: Fn(&str) -> usize + Sync> TokenCounter for F {
    fn count(&self, text: &str) -> usize {
        self(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentParams {
    pub max_tokens: usize,
    pub min_tokens: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            max_tokens: 300,
            min_tokens: 10,
        }
    }
}

/// A chunk of the truncated source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment<'a> {
    /// Byte range in the truncated text, trailing delimiter whitespace included.
    pub span: Range<usize>,
    pub raw: &'a str,
    pub approx_tokens: usize,
}

impl Segment<'_> {
    pub fn text(&self) -> &str {
        self.raw.trim()
    }
}

/// Where a sentence came from: sample plus its step position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChunkRef {
    #[serde(flatten)]
    pub sample: SampleKey,
    pub position: usize,
}

impl std::fmt::Display for ChunkRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}#{}", self.sample, self.position)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceChunk {
    #[serde(flatten)]
    pub chunk: ChunkRef,
    pub text: String,
    pub approx_tokens: usize,
}

/// `text` up to (not including) the first `</think>`.
pub fn truncate_at_think(text: &str) -> &str {
    text.find(THINK_END).map_or(text, |i| &text[..i])
}

fn whitespace_run_end(text: &str, from: usize) -> usize {
    text[from..]
        .char_indices()
        .find(|(_, c)| !c.is_whitespace())
        .map_or(text.len(), |(i, _)| from + i)
}

fn delimiter_spans(text: &str) -> Vec<Range<usize>> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        let cut = match bytes[i] {
            b'.' | b'?' | b'!' if bytes.get(i + 1) == Some(&b' ') => Some(i + 1),
            b'\n' if bytes.get(i + 1) == Some(&b'\n') => Some(i),
            b'\r' if text[i..].starts_with("\r\n\r\n") => Some(i),
            _ => None,
        };
        match cut {
            Some(at) => {
                let end = whitespace_run_end(text, at);
                spans.push(start..end);
                start = end;
                i = end;
            }
            None => i += 1,
        }
    }
    if start < text.len() {
        spans.push(start..text.len());
    }
    spans
}

fn word_starts(text: &str, span: &Range<usize>) -> Vec<usize> {
    let mut starts = Vec::new();
    let mut prev_ws = true;
    for (i, c) in text[span.clone()].char_indices() {
        let ws = c.is_whitespace();
        if prev_ws && !ws {
            starts.push(span.start + i);
        }
        prev_ws = ws;
    }
    starts
}

/// Largest `j` in `lo..=hi` with `pred(j)` true, given `pred` is true at `lo`
/// and monotone decreasing.
fn last_true(lo: usize, hi: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (lo, hi);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

fn force_split(
    text: &str,
    span: Range<usize>,
    params: &SegmentParams,
    counter: &dyn TokenCounter,
    out: &mut Vec<Range<usize>>,
) {
    let count = |r: Range<usize>| counter.count(&text[r]);
    let first_piece = out.len();
    let mut rest = span;
    while count(rest.clone()) > params.max_tokens {
        let starts = word_starts(text, &rest);
        if starts.len() < 2 {
            // a single oversized word cannot be split at a word boundary
            break;
        }
        // prefix ending at starts[j] holds words 0..j
        let j = last_true(1, starts.len() - 1, |j| {
            count(rest.start..starts[j]) <= params.max_tokens
        });
        out.push(rest.start..starts[j]);
        rest = starts[j]..rest.end;
    }
    if out.len() > first_piece && count(rest.clone()) < params.min_tokens {
        let prev = out.pop().expect("a piece was split off");
        let joined = prev.start..rest.end;
        let starts = word_starts(text, &joined);
        // latest cut that leaves at least min_tokens in the tail
        let candidates: Vec<usize> = starts
            .iter()
            .copied()
            .filter(|&s| s > joined.start && count(s..joined.end) >= params.min_tokens)
            .collect();
        match candidates.last() {
            Some(&cut)
                if count(joined.start..cut) >= params.min_tokens && count(joined.start..cut) <= params.max_tokens =>
            {
                out.push(joined.start..cut);
                rest = cut..joined.end;
            }
            _ => out.push(prev),
        }
    }
    out.push(rest);
}

/// Segments `text` with whitespace-word token counting.
pub fn segment<'a>(text: &'a str, params: &SegmentParams) -> Vec<Segment<'a>> {
    segment_with(text, params, &WordCounter)
}

/// Segments `text`, counting tokens with `counter`.
pub fn segment_with<'a>(text: &'a str, params: &SegmentParams, counter: &dyn TokenCounter) -> Vec<Segment<'a>> {
    assert!(
        params.max_tokens > params.min_tokens && params.min_tokens >= 1,
        "segmenter needs max_tokens > min_tokens >= 1"
    );
    let text = truncate_at_think(text);
    if text.trim().is_empty() {
        return Vec::new();
    }
    let count = |r: &Range<usize>| counter.count(&text[r.clone()]);

    let mut merged: Vec<Range<usize>> = Vec::new();
    for piece in delimiter_spans(text) {
        match merged.last_mut() {
            Some(last) if count(&piece) < params.min_tokens || count(last) < params.min_tokens => {
                last.end = piece.end;
            }
            _ => merged.push(piece),
        }
    }

    let mut spans = Vec::with_capacity(merged.len());
    for span in merged {
        force_split(text, span, params, counter, &mut spans);
    }

    spans
        .into_iter()
        .map(|span| Segment {
            raw: &text[span.clone()],
            approx_tokens: count(&span),
            span,
        })
        .collect()
}

/// Segments one sample into positioned sentence chunks.
pub fn segment_sample(sample: &TraceSample, params: &SegmentParams) -> Vec<SentenceChunk> {
    let key = sample.key();
    segment(&sample.text, params)
        .into_iter()
        .enumerate()
        .map(|(position, s)| SentenceChunk {
            chunk: ChunkRef {
                sample: key.clone(),
                position,
            },
            text: s.text().to_owned(),
            approx_tokens: s.approx_tokens,
        })
        .collect()
}
