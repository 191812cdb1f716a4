//! Slow, obviously-correct reference implementations used by the property
//! and acceptance tests. None of them share code with the library algorithms.

#![allow(dead_code)]

use seqlab_core::abstraction::{compress_dss, BehaviorState, DssSequence, StateSequence};
use seqlab_core::dtw::{DistanceMatrix, Linkage, StateCostMatrix};

/// A DSS sequence whose runs have the given states and lengths.
pub fn dss_from_runs(id: &str, runs: &[(BehaviorState, usize)]) -> DssSequence {
    let mut entries = Vec::new();
    for &(s, len) in runs {
        for _ in 0..len {
            entries.push((entries.len() as f64, s));
        }
    }
    compress_dss(&StateSequence { match_id: "m".into(), player_id: id.into(), segment: None, entries })
}

/// A DSS sequence from raw tick states.
pub fn dss_from_ticks(id: &str, ticks: &[BehaviorState]) -> DssSequence {
    let entries = ticks.iter().enumerate().map(|(i, &s)| (i as f64, s)).collect();
    compress_dss(&StateSequence { match_id: "m".into(), player_id: id.into(), segment: None, entries })
}

/// Run-collapsed pattern computed by scanning, without `compress_dss`.
pub fn collapse(ticks: &[BehaviorState]) -> Vec<BehaviorState> {
    let mut out: Vec<BehaviorState> = Vec::new();
    for &s in ticks {
        if out.last() != Some(&s) {
            out.push(s);
        }
    }
    out
}

/// Top-k whole patterns: (pattern, count), count descending then pattern ascending.
pub fn brute_top_k(patterns: &[Vec<BehaviorState>], k: usize) -> Vec<(Vec<BehaviorState>, usize)> {
    let mut distinct: Vec<Vec<BehaviorState>> = Vec::new();
    for p in patterns {
        if !distinct.contains(p) {
            distinct.push(p.clone());
        }
    }
    let mut remaining: Vec<(Vec<BehaviorState>, usize)> = distinct
        .into_iter()
        .map(|p| {
            let c = patterns.iter().filter(|q| **q == p).count();
            (p, c)
        })
        .collect();
    // repeated selection of the best remaining entry
    let mut out = Vec::new();
    while out.len() < k && !remaining.is_empty() {
        let mut best = 0;
        for i in 1..remaining.len() {
            let (ref p, c) = remaining[i];
            let (ref bp, bc) = remaining[best];
            if c > bc || (c == bc && lex_less(p, bp)) {
                best = i;
            }
        }
        out.push(remaining.remove(best));
    }
    out
}

fn lex_less(a: &[BehaviorState], b: &[BehaviorState]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x.index() != y.index() {
            return x.index() < y.index();
        }
    }
    a.len() < b.len()
}

fn occurrences(hay: &[BehaviorState], needle: &[BehaviorState]) -> usize {
    if needle.len() > hay.len() {
        return 0;
    }
    (0..=hay.len() - needle.len()).filter(|&i| hay[i..i + needle.len()] == *needle).count()
}

/// Contiguous n-grams: (ngram, sequences containing, total occurrences),
/// filtered by `sequences >= min_support * N` and in table order.
pub fn brute_ngrams(
    seqs: &[Vec<BehaviorState>],
    min_len: usize,
    max_len: usize,
    min_support: f64,
) -> Vec<(Vec<BehaviorState>, usize, usize)> {
    let mut candidates: Vec<Vec<BehaviorState>> = Vec::new();
    for s in seqs {
        for i in 0..s.len() {
            for j in i + min_len..=(i + max_len).min(s.len()) {
                let g = s[i..j].to_vec();
                if !candidates.contains(&g) {
                    candidates.push(g);
                }
            }
        }
    }
    let n = seqs.len();
    let mut rows: Vec<(Vec<BehaviorState>, usize, usize)> = candidates
        .into_iter()
        .map(|g| {
            let containing = seqs.iter().filter(|s| occurrences(s, &g) > 0).count();
            let occ = seqs.iter().map(|s| occurrences(s, &g)).sum();
            (g, containing, occ)
        })
        // integer form of containing / n >= min_support, up to rounding of the product
        .filter(|(_, c, _)| (*c as f64) >= min_support * n as f64 - 1e-9)
        .collect();
    rows.sort_by(|a, b| {
        b.1.cmp(&a.1).then(a.0.len().cmp(&b.0.len())).then_with(|| {
            if lex_less(&a.0, &b.0) {
                std::cmp::Ordering::Less
            } else if a.0 == b.0 {
                std::cmp::Ordering::Equal
            } else {
                std::cmp::Ordering::Greater
            }
        })
    });
    rows
}

/// Exhaustive DTW: walk every monotone warping path from (0,0) to
/// (n-1,m-1). Returns (min cost, shortest length among min-cost paths).
pub fn brute_dtw(a: &[BehaviorState], b: &[BehaviorState], costs: &StateCostMatrix) -> (f64, usize) {
    fn walk(
        i: usize,
        j: usize,
        acc: f64,
        len: usize,
        a: &[BehaviorState],
        b: &[BehaviorState],
        costs: &StateCostMatrix,
        best: &mut (f64, usize),
    ) {
        let acc = acc + costs.get(a[i], b[j]);
        let len = len + 1;
        if i == a.len() - 1 && j == b.len() - 1 {
            if acc < best.0 || (acc == best.0 && len < best.1) {
                *best = (acc, len);
            }
            return;
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(i + 1, j + 1, acc, len, a, b, costs, best);
        }
        if i + 1 < a.len() {
            walk(i + 1, j, acc, len, a, b, costs, best);
        }
        if j + 1 < b.len() {
            walk(i, j + 1, acc, len, a, b, costs, best);
        }
    }
    let mut best = (f64::INFINITY, usize::MAX);
    walk(0, 0, 0.0, 0, a, b, costs, &mut best);
    best
}

/// Agglomerative clustering recomputing every linkage from member lists.
/// Returns the merge heights, the merged member sets, and labels at `k`.
pub fn brute_cluster(m: &DistanceMatrix, linkage: Linkage, k: usize) -> (Vec<f64>, Vec<Vec<usize>>, Vec<usize>) {
    let n = m.n;
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut heights = Vec::new();
    let mut merged = Vec::new();
    let mut labels_at_k = if k == n { Some(first_member_labels(&clusters, n)) } else { None };
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for x in 0..clusters.len() {
            for y in 0..clusters.len() {
                if x == y {
                    continue;
                }
                let (ra, rb) = (clusters[x][0], clusters[y][0]);
                if ra > rb {
                    continue;
                }
                let mut vals = Vec::new();
                for &p in &clusters[x] {
                    for &q in &clusters[y] {
                        vals.push(m.get(p, q));
                    }
                }
                let v = match linkage {
                    Linkage::Average => vals.iter().sum::<f64>() / vals.len() as f64,
                    Linkage::Complete => vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                };
                let better = match best {
                    None => true,
                    Some((bv, bra, brb, _, _)) => v < bv || (v == bv && (ra, rb) < (bra, brb)),
                };
                if better {
                    best = Some((v, ra, rb, x, y));
                }
            }
        }
        let (v, _, _, x, y) = best.unwrap();
        let mut joined = clusters[x].clone();
        joined.extend(&clusters[y]);
        joined.sort();
        let (hi, lo) = if x > y { (x, y) } else { (y, x) };
        clusters.remove(hi);
        clusters.remove(lo);
        clusters.push(joined.clone());
        clusters.sort_by_key(|c| c[0]);
        heights.push(v);
        merged.push(joined);
        if clusters.len() == k {
            labels_at_k = Some(first_member_labels(&clusters, n));
        }
    }
    (heights, merged, labels_at_k.unwrap_or_else(|| vec![0; n]))
}

fn first_member_labels(clusters: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut sorted: Vec<&Vec<usize>> = clusters.iter().collect();
    sorted.sort_by_key(|c| c[0]);
    let mut labels = vec![0; n];
    for (l, c) in sorted.iter().enumerate() {
        for &i in c.iter() {
            labels[i] = l;
        }
    }
    labels
}

/// Two labelings describe the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len()
        && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

/// Kappa from the textbook formula over raw label vectors.
pub fn textbook_kappa(a: &[&str], b: &[&str]) -> f64 {
    let n = a.len() as f64;
    let po = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let mut cats: Vec<&str> = a.iter().chain(b).copied().collect();
    cats.sort();
    cats.dedup();
    let pe: f64 = cats
        .iter()
        .map(|c| {
            let pa = a.iter().filter(|x| *x == c).count() as f64 / n;
            let pb = b.iter().filter(|x| *x == c).count() as f64 / n;
            pa * pb
        })
        .sum();
    (po - pe) / (1.0 - pe)
}
