//! Slow, direct reference implementations used as test oracles.
//!
//! Each function recomputes its quantity from the textbook definition
//! without sharing code with the library.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

use rand::Rng;

// ---------------------------------------------------------------- chrF

fn char_ngrams(text: &str, n: usize) -> Vec<Vec<char>> {
    let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
    if chars.len() < n {
        return Vec::new();
    }
    (0..=chars.len() - n).map(|i| chars[i..i + n].to_vec()).collect()
}

/// Multiset intersection size: sort both sides and walk them in step.
fn multiset_overlap(a: &[Vec<char>], b: &[Vec<char>]) -> usize {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort();
    b.sort();
    let (mut i, mut j, mut hits) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                hits += 1;
                i += 1;
                j += 1;
            }
        }
    }
    hits
}

pub fn naive_chrf(hyp: &str, reference: &str, beta: f64, max_order: usize) -> f64 {
    let hl = char_ngrams(hyp, 1).len();
    let rl = char_ngrams(reference, 1).len();
    if hl == 0 && rl == 0 {
        return 1.0;
    }
    if hl == 0 || rl == 0 {
        return 0.0;
    }
    let (mut ps, mut pn, mut rs, mut rn) = (0.0, 0, 0.0, 0);
    for n in 1..=max_order {
        let h = char_ngrams(hyp, n);
        let r = char_ngrams(reference, n);
        let m = multiset_overlap(&h, &r) as f64;
        if !h.is_empty() {
            ps += m / h.len() as f64;
            pn += 1;
        }
        if !r.is_empty() {
            rs += m / r.len() as f64;
            rn += 1;
        }
    }
    let p = if pn > 0 { ps / pn as f64 } else { 0.0 };
    let r = if rn > 0 { rs / rn as f64 } else { 0.0 };
    let b2 = beta * beta;
    if b2 * p + r == 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * r / (b2 * p + r)
    }
}

/// Random text over a small alphabet with spaces, newlines and a few
/// multibyte characters, so n-grams repeat often.
pub fn random_text<R: Rng>(rng: &mut R, max_len: usize) -> String {
    const ALPHABET: &[char] = &['a', 'b', 'c', 'd', 'x', '1', '=', ' ', ' ', '\n', 'é', 'λ', '∑', '\t'];
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect()
}

// ---------------------------------------------------------------- UPGMA

/// Average-linkage merges `(a, b, height)` with `a < b`, recomputing every
/// cluster-pair mean from the leaf distances at each step. Returns `None`
/// when two candidate pairs tie at the minimum.
pub fn naive_upgma(d: &[Vec<f64>]) -> Option<Vec<(usize, usize, f64)>> {
    reference_upgma(d, true)
}

/// As [`naive_upgma`], but ties go to the lexicographically smallest id pair.
pub fn naive_upgma_tied(d: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    reference_upgma(d, false).expect("ties allowed")
}

fn reference_upgma(d: &[Vec<f64>], reject_ties: bool) -> Option<Vec<(usize, usize, f64)>> {
    let n = d.len();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut out = Vec::new();
    for k in 0..n.saturating_sub(1) {
        let mut cands = Vec::new();
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut s = 0.0;
                for &x in &clusters[a].1 {
                    for &y in &clusters[b].1 {
                        s += d[x.min(y)][x.max(y)];
                    }
                }
                let h = s / (clusters[a].1.len() * clusters[b].1.len()) as f64;
                let (ia, ib) = (clusters[a].0, clusters[b].0);
                cands.push((h, ia.min(ib), ia.max(ib), a, b));
            }
        }
        cands.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        if reject_ties && cands.len() > 1 && cands[0].0 == cands[1].0 {
            return None;
        }
        let (h, lo, hi, a, b) = cands[0];
        let (_, mb) = clusters.remove(b);
        let (_, mut ma) = clusters.remove(a);
        ma.extend(mb);
        clusters.push((n + k, ma));
        out.push((lo, hi, h));
    }
    Some(out)
}

/// Clusters left when merges below `threshold` are applied.
pub fn naive_cut(merges: &[(usize, usize, f64)], n: usize, threshold: f64) -> usize {
    n - merges.iter().filter(|m| m.2 < threshold).count()
}

/// Symmetric matrix with entries on the grid `k / 2^16`, so sums of up to
/// 2^37 entries are exact in f64.
pub fn random_grid_distances<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.gen_range(1..65536u32) as f64 / 65536.0;
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

// ---------------------------------------------------------------- graphs

/// Adjacency matrix of a directed graph.
pub fn random_digraph<R: Rng>(rng: &mut R, n: usize, p: f64) -> Vec<Vec<bool>> {
    let mut a = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen_bool(p) {
                a[i][j] = true;
            }
        }
    }
    a
}

/// Symmetric adjacency matrix of an Erdos-Renyi graph.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64) -> Vec<Vec<bool>> {
    let mut a = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                a[i][j] = true;
                a[j][i] = true;
            }
        }
    }
    a
}

pub fn edge_list(a: &[Vec<bool>]) -> Vec<(usize, usize)> {
    let n = a.len();
    let mut e = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if a[i][j] {
                e.push((i, j));
            }
        }
    }
    e
}

/// Betweenness by listing every simple path between each ordered pair,
/// keeping the shortest ones and counting those through each node.
pub fn brute_betweenness(a: &[Vec<bool>]) -> Vec<f64> {
    let n = a.len();
    let mut cb = vec![0.0; n];
    if n < 3 {
        return cb;
    }
    fn walk(a: &[Vec<bool>], t: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let v = *path.last().unwrap();
        if v == t {
            out.push(path.clone());
            return;
        }
        for w in 0..a.len() {
            if a[v][w] && !path.contains(&w) {
                path.push(w);
                walk(a, t, path, out);
                path.pop();
            }
        }
    }
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            let mut paths = Vec::new();
            walk(a, t, &mut vec![s], &mut paths);
            let Some(min) = paths.iter().map(Vec::len).min() else {
                continue;
            };
            let shortest: Vec<&Vec<usize>> = paths.iter().filter(|p| p.len() == min).collect();
            let sigma = shortest.len() as f64;
            for v in 0..n {
                if v == s || v == t {
                    continue;
                }
                let through = shortest.iter().filter(|p| p.contains(&v)).count() as f64;
                cb[v] += through / sigma;
            }
        }
    }
    let scale = ((n - 1) * (n - 2)) as f64;
    cb.iter().map(|x| x / scale).collect()
}

/// Graphlet counts G3..G8 (indices 0..6) over all C(n, 4) vertex sets,
/// classified by sorted degree sequence.
pub fn brute_graphlets(a: &[Vec<bool>]) -> [u64; 6] {
    let n = a.len();
    let mut counts = [0u64; 6];
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                for l in k + 1..n {
                    let set = [i, j, k, l];
                    let mut deg = [0usize; 4];
                    for x in 0..4 {
                        for y in 0..4 {
                            if a[set[x]][set[y]] {
                                deg[x] += 1;
                            }
                        }
                    }
                    // connectivity by flood fill inside the set
                    let mut seen = [true, false, false, false];
                    for _ in 0..3 {
                        for x in 0..4 {
                            for y in 0..4 {
                                if seen[x] && a[set[x]][set[y]] {
                                    seen[y] = true;
                                }
                            }
                        }
                    }
                    if seen.contains(&false) {
                        continue;
                    }
                    deg.sort_unstable();
                    let idx = match deg {
                        [1, 1, 2, 2] => 0,
                        [1, 1, 1, 3] => 1,
                        [1, 2, 2, 3] => 2,
                        [2, 2, 2, 2] => 3,
                        [2, 2, 3, 3] => 4,
                        [3, 3, 3, 3] => 5,
                        other => panic!("connected 4-set with degrees {other:?}"),
                    };
                    counts[idx] += 1;
                }
            }
        }
    }
    counts
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut m: Vec<Vec<f64>>) -> Vec<f64> {
    let n = m.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Q for a labelling, straight from the double sum over node pairs.
pub fn matrix_modularity(a: &[Vec<bool>], labels: &[usize]) -> Option<f64> {
    let n = a.len();
    let k: Vec<f64> = a.iter().map(|r| r.iter().filter(|&&x| x).count() as f64).collect();
    let two_m: f64 = k.iter().sum();
    if two_m == 0.0 {
        return None;
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += (a[i][j] as u8 as f64) - k[i] * k[j] / two_m;
            }
        }
    }
    Some(q / two_m)
}

/// Maximum modularity over every partition (restricted growth strings).
pub fn exhaustive_max_modularity(a: &[Vec<bool>]) -> f64 {
    let n = a.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    fn rec(a: &[Vec<bool>], labels: &mut Vec<usize>, i: usize, max: usize, best: &mut f64) {
        if i == labels.len() {
            *best = best.max(matrix_modularity(a, labels).unwrap());
            return;
        }
        for l in 0..=max + 1 {
            labels[i] = l;
            rec(a, labels, i + 1, max.max(l), best);
        }
    }
    if n == 0 {
        return best;
    }
    rec(a, &mut labels, 1, 0, &mut best);
    best
}

/// Global metrics from their defining formulas on the adjacency matrix.
/// Keys follow the library's field names; absent keys are undefined.
pub fn reference_global(a: &[Vec<bool>], labels: &[usize]) -> BTreeMap<&'static str, f64> {
    let n = a.len();
    let mut out = BTreeMap::new();
    let k: Vec<f64> = a.iter().map(|r| r.iter().filter(|&&x| x).count() as f64).collect();
    let two_m: f64 = k.iter().sum();
    let af: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|&x| x as u8 as f64).collect()).collect();

    out.insert("edge_density", if n < 2 { 0.0 } else { two_m / (n * (n - 1)) as f64 });

    // clustering from the diagonal of A^3 (closed walks of length 3)
    let mut c_sum = 0.0;
    for i in 0..n {
        let mut walks = 0.0;
        for j in 0..n {
            for l in 0..n {
                walks += af[i][j] * af[j][l] * af[l][i];
            }
        }
        if k[i] >= 2.0 {
            c_sum += walks / (k[i] * (k[i] - 1.0));
        }
    }
    let c = c_sum / n as f64;
    let mean_k = two_m / n as f64;
    let c_norm = (mean_k > 0.0).then(|| c / (mean_k / n as f64));
    if let Some(x) = c_norm {
        out.insert("clustering_coefficient_norm", x);
    }

    if two_m > 0.0 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let e = k[i] * k[j] / two_m;
                num += (af[i][j] - e) * k[i] * k[j];
                den += ((i == j) as u8 as f64 * k[i] - e) * k[i] * k[j];
            }
        }
        if den.abs() > 1e-9 {
            out.insert("assortativity", num / den);
        }
        out.insert("modularity", matrix_modularity(a, labels).unwrap());
    }

    if n >= 3 {
        let dmax = k.iter().cloned().fold(0.0, f64::max);
        let s: f64 = k.iter().map(|d| dmax - d).sum();
        out.insert("freeman_centralization", s / ((n - 1) * (n - 2)) as f64);
    }

    // Floyd-Warshall
    let inf = f64::INFINITY;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0.0;
        for j in 0..n {
            if a[i][j] {
                d[i][j] = 1.0;
            }
        }
    }
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][m] + d[m][j] < d[i][j] {
                    d[i][j] = d[i][m] + d[m][j];
                }
            }
        }
    }
    if n >= 2 {
        let mut eff = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j && d[i][j].is_finite() {
                    eff += 1.0 / d[i][j];
                }
            }
        }
        out.insert("global_efficiency", eff / (n * (n - 1)) as f64);
    }

    // largest component: biggest reachable set, earliest smallest member
    let mut lcc: Vec<usize> = Vec::new();
    for s in 0..n {
        let comp: Vec<usize> = (0..n).filter(|&t| d[s][t].is_finite()).collect();
        if comp.len() > lcc.len() {
            lcc = comp;
        }
    }
    let path_len = if lcc.len() >= 2 {
        let mut tot = 0.0;
        for &i in &lcc {
            for &j in &lcc {
                tot += d[i][j];
            }
        }
        let l = tot / (lcc.len() * (lcc.len() - 1)) as f64;
        let lk = lcc.iter().map(|&i| k[i]).sum::<f64>() / lcc.len() as f64;
        (lk > 1.0).then(|| l / ((lcc.len() as f64).ln() / lk.ln()))
    } else {
        None
    };
    if let Some(x) = path_len {
        out.insert("avg_path_length_norm", x);
    }
    if let (Some(c), Some(l)) = (c_norm, path_len) {
        out.insert("small_world_sigma", c / l);
    }

    if n >= 2 {
        let mut lap = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                lap[i][j] = if i == j { k[i] } else { -af[i][j] };
            }
        }
        out.insert("algebraic_connectivity", jacobi_eigenvalues(lap)[1].max(0.0));
    }
    out
}
