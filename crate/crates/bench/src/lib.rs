//! Seeded input generators shared by the benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reasonpath::gmetrics::{DiGraph, UnGraph};

pub use reasonpath;

const WORDS: &[&str] = &[
    "so",
    "the",
    "sum",
    "of",
    "both",
    "sides",
    "is",
    "even",
    "therefore",
    "we",
    "get",
    "x",
    "equals",
    "two",
    "let",
    "check",
    "this",
    "again",
    "wait",
    "factor",
    "gives",
    "answer",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Whitespace-separated text of `words` words from a small vocabulary.
pub fn text(rng: &mut impl Rng, words: usize) -> String {
    (0..words)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Symmetric distance matrix with a zero diagonal.
pub fn distances(rng: &mut impl Rng, n: usize) -> Vec<Vec<f64>> {
    let upper: Vec<f64> = (0..n * n).map(|_| rng.gen::<f64>()).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match i.cmp(&j) {
                    std::cmp::Ordering::Less => upper[i * n + j],
                    std::cmp::Ordering::Greater => upper[j * n + i],
                    std::cmp::Ordering::Equal => 0.0,
                })
                .collect()
        })
        .collect()
}

fn random_edges(rng: &mut impl Rng, n: usize, m: usize) -> Vec<(usize, usize)> {
    (0..m)
        .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
        .filter(|(a, b)| a != b)
        .collect()
}

pub fn digraph(rng: &mut impl Rng, n: usize, m: usize) -> DiGraph {
    DiGraph::from_edges(n, random_edges(rng, n, m))
}

pub fn ungraph(rng: &mut impl Rng, n: usize, m: usize) -> UnGraph {
    UnGraph::from_edges(n, random_edges(rng, n, m))
}

/// `n` points in `dim` dimensions around `centres` well separated centres.
pub fn blobs(rng: &mut impl Rng, n: usize, dim: usize, centres: usize) -> Vec<Vec<f64>> {
    let c: Vec<Vec<f64>> = (0..centres)
        .map(|_| (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect())
        .collect();
    (0..n)
        .map(|i| c[i % centres].iter().map(|x| x + rng.gen_range(-0.5..0.5)).collect())
        .collect()
}
