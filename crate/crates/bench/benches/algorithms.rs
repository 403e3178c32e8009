use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use reasonpath_bench::reasonpath::embedspace::{kmeans_fit, KMeansParams};
use reasonpath_bench::reasonpath::gmetrics::{betweenness_centrality, global_metrics, graphlet_census};
use reasonpath_bench::reasonpath::textsim::{chrf, similarity_values, MetricParams};
use reasonpath_bench::reasonpath::trajcluster::upgma;
use reasonpath_bench::{blobs, digraph, distances, rng, text, ungraph};

fn text_similarity(c: &mut Criterion) {
    let mut r = rng(1);
    let mut group = c.benchmark_group("chrf");
    for words in [50, 500] {
        let (a, b) = (text(&mut r, words), text(&mut r, words));
        group.bench_with_input(BenchmarkId::from_parameter(words), &(a, b), |bench, (a, b)| {
            bench.iter(|| chrf(black_box(a), black_box(b), 2.0, 6))
        });
    }
    group.finish();

    let texts: Vec<String> = (0..32).map(|_| text(&mut r, 200)).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    c.bench_function("similarity_matrix/32x200", |bench| {
        bench.iter(|| similarity_values(black_box(&refs), &MetricParams::default()))
    });
}

fn clustering(c: &mut Criterion) {
    let mut group = c.benchmark_group("upgma");
    for n in [16, 64, 256] {
        let d = distances(&mut rng(n as u64), n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &d, |bench, d| {
            bench.iter(|| upgma(black_box(d)))
        });
    }
    group.finish();

    let points = blobs(&mut rng(3), 2000, 32, 20);
    let mut params = KMeansParams::new(20, 7);
    params.n_init = 4;
    c.bench_function("kmeans/2000x32/k20", |bench| {
        bench.iter(|| kmeans_fit(black_box(&points), &params))
    });
}

fn graphs(c: &mut Criterion) {
    let mut group = c.benchmark_group("betweenness");
    for n in [100, 1000] {
        let g = digraph(&mut rng(5), n, 4 * n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |bench, g| {
            bench.iter(|| betweenness_centrality(black_box(g)))
        });
    }
    group.finish();

    let g = ungraph(&mut rng(6), 200, 600);
    c.bench_function("graphlets/200", |bench| bench.iter(|| graphlet_census(black_box(&g))));
    c.bench_function("global_metrics/200", |bench| {
        bench.iter(|| global_metrics(black_box(&g)))
    });
}

criterion_group!(benches, text_similarity, clustering, graphs);
criterion_main!(benches);
