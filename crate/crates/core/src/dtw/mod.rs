//! Sequence similarity: dynamic time warping over state patterns, pairwise
//! distance matrices, agglomerative clustering and a planar MDS embedding.

mod cluster;
mod mds;

pub use cluster::{hierarchical_cluster, ClusterAssignment, Linkage, Merge};
pub use mds::{mds_embed, Embedding2D};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{BehaviorState, DssSequence};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DtwError {
    #[error("cannot align an empty sequence")]
    EmptySequence,
    #[error("need at least {0} sequences")]
    TooFewSequences(usize),
    #[error("cluster count {k} out of range 1..={n}")]
    BadK { k: usize, n: usize },
    #[error("invalid cost: {0}")]
    InvalidCost(String),
    #[error("eigen-decomposition did not converge")]
    NoConvergence,
}

/// Symmetric local cost between two states; zero on the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateCostMatrix {
    cost: [[f64; 10]; 10],
}

impl Default for StateCostMatrix {
    fn default() -> Self {
        let mut cost = [[1.0; 10]; 10];
        for (i, row) in cost.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        StateCostMatrix { cost }
    }
}

impl StateCostMatrix {
    pub fn unit() -> Self {
        Self::default()
    }

    pub fn get(&self, a: BehaviorState, b: BehaviorState) -> f64 {
        self.cost[a.index()][b.index()]
    }

    /// Set `cost(a, b) = cost(b, a) = c`.
    pub fn set(&mut self, a: BehaviorState, b: BehaviorState, c: f64) -> Result<(), DtwError> {
        if a == b {
            return Err(DtwError::InvalidCost("diagonal costs are fixed at 0".into()));
        }
        if !(c.is_finite() && c >= 0.0) {
            return Err(DtwError::InvalidCost(format!("{a}/{b}: {c}")));
        }
        self.cost[a.index()][b.index()] = c;
        self.cost[b.index()][a.index()] = c;
        Ok(())
    }

    pub fn max_cost(&self) -> f64 {
        self.cost.iter().flatten().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DtwOptions {
    /// Divide by the warping-path length.
    pub normalize: bool,
    /// Sakoe-Chiba band radius; widened to at least the length difference.
    pub band: Option<usize>,
}

/// DTW cost between two patterns, with symmetric unit steps (match, insert,
/// delete). With `normalize`, the cost is divided by the length of the
/// optimal path; among equal-cost paths the shortest one is used.
pub fn dtw_patterns(
    a: &[BehaviorState],
    b: &[BehaviorState],
    costs: &StateCostMatrix,
    opts: DtwOptions,
) -> Result<f64, DtwError> {
    if a.is_empty() || b.is_empty() {
        return Err(DtwError::EmptySequence);
    }
    let (n, m) = (a.len(), b.len());
    let band = opts.band.map(|r| r.max(n.abs_diff(m)));
    // (cost, path length), minimised lexicographically
    let inf = (f64::INFINITY, usize::MAX);
    let mut prev = vec![inf; m];
    let mut cur = vec![inf; m];
    for i in 0..n {
        for j in 0..m {
            if band.is_some_and(|r| i.abs_diff(j) > r) {
                cur[j] = inf;
                continue;
            }
            let local = costs.get(a[i], b[j]);
            let best = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut best = inf;
                for cand in [
                    (i > 0 && j > 0).then(|| prev[j - 1]),
                    (i > 0).then(|| prev[j]),
                    (j > 0).then(|| cur[j - 1]),
                ]
                .into_iter()
                .flatten()
                {
                    if cand.0 < best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                        best = cand;
                    }
                }
                best
            };
            cur[j] = (best.0 + local, best.1.saturating_add(1));
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (cost, len) = prev[m - 1];
    Ok(if opts.normalize { cost / len as f64 } else { cost })
}

pub fn dtw_distance(
    a: &DssSequence,
    b: &DssSequence,
    costs: &StateCostMatrix,
    normalize: bool,
) -> Result<f64, DtwError> {
    dtw_patterns(&a.pattern(), &b.pattern(), costs, DtwOptions { normalize, band: None })
}

/// Dense symmetric distance matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub ids: Vec<String>,
    pub n: usize,
    /// Row-major `n * n` entries.
    pub d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_fn(ids: Vec<String>, f: impl Fn(usize, usize) -> f64) -> Self {
        let n = ids.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        DistanceMatrix { ids, n, d }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.get(i, i) == 0.0 && (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// The matrix with rows and columns reordered so that new row `i` is old row `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> DistanceMatrix {
        DistanceMatrix::from_fn(perm.iter().map(|&p| self.ids[p].clone()).collect(), |i, j| {
            self.get(perm[i], perm[j])
        })
    }
}

/// DTW over every unordered pair, computed in parallel.
pub fn pairwise_distances(
    corpus: &[DssSequence],
    costs: &StateCostMatrix,
    opts: DtwOptions,
) -> Result<DistanceMatrix, DtwError> {
    let n = corpus.len();
    if n < 2 {
        return Err(DtwError::TooFewSequences(2));
    }
    let patterns: Vec<Vec<BehaviorState>> = corpus.iter().map(|s| s.pattern()).collect();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| dtw_patterns(&patterns[i], &patterns[j], costs, opts))
        .collect::<Result<_, _>>()?;
    let mut d = vec![0.0; n * n];
    for (&(i, j), v) in pairs.iter().zip(values) {
        d[i * n + j] = v;
        d[j * n + i] = v;
    }
    Ok(DistanceMatrix { ids: corpus.iter().map(|s| s.label()).collect(), n, d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use BehaviorState::{Fight as F, Solo as S, Teaming as T};

    fn dtw(a: &[BehaviorState], b: &[BehaviorState], normalize: bool) -> f64 {
        dtw_patterns(a, b, &StateCostMatrix::unit(), DtwOptions { normalize, band: None }).unwrap()
    }

    #[test]
    fn hand_examples() {
        assert_eq!(dtw(&[S, T, F], &[S, T, F], false), 0.0);
        assert_eq!(dtw(&[S], &[T], false), 1.0);
        assert_eq!(dtw(&[S, S, T], &[S, T], false), 0.0);
        // path (0,0),(1,0),(2,1) has length 3
        assert_eq!(dtw(&[S, S, T], &[S, T], true), 0.0);
        // every optimal path costs 2; the shortest of them has length 2
        assert_eq!(dtw(&[S, T], &[T, S], true), 1.0);
    }

    #[test]
    fn empty_is_error() {
        let r = dtw_patterns(&[], &[S], &StateCostMatrix::unit(), DtwOptions::default());
        assert_eq!(r.unwrap_err(), DtwError::EmptySequence);
    }

    #[test]
    fn cost_matrix_stays_symmetric() {
        let mut c = StateCostMatrix::unit();
        c.set(BehaviorState::TeamFight, BehaviorState::Harassed, 0.25).unwrap();
        assert_eq!(c.get(BehaviorState::Harassed, BehaviorState::TeamFight), 0.25);
        assert!(c.set(S, S, 1.0).is_err());
        assert!(c.set(S, T, -1.0).is_err());
    }

    #[test]
    fn band_restricts_warping() {
        let a = [S, S, S, S, T];
        let b = [S, T, T, T, T];
        let free = dtw(&a, &b, false);
        let banded = dtw_patterns(&a, &b, &StateCostMatrix::unit(), DtwOptions { normalize: false, band: Some(0) }).unwrap();
        assert_eq!(free, 0.0);
        assert_eq!(banded, 3.0);
    }
}
