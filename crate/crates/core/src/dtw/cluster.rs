use serde::{Deserialize, Serialize};

use super::{DistanceMatrix, DtwError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
    Complete,
}

impl std::str::FromStr for Linkage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "average" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            other => Err(format!("unknown linkage `{other}`")),
        }
    }
}

/// One agglomeration step. Leaves are numbered `0..n`; the cluster created
/// by step `s` gets id `n + s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    pub ids: Vec<String>,
    /// Cluster of each input row. Clusters are numbered in order of their
    /// smallest member.
    pub labels: Vec<usize>,
    pub merges: Vec<Merge>,
}

impl ClusterAssignment {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == cluster).collect()
    }
}

struct Active {
    id: usize,
    rep: usize,
    size: usize,
}

/// Agglomerative clustering from a precomputed matrix. Among equally close
/// pairs the one whose smallest members are lowest is merged first.
pub fn hierarchical_cluster(m: &DistanceMatrix, linkage: Linkage, k: usize) -> Result<ClusterAssignment, DtwError> {
    let n = m.n;
    if k == 0 || k > n {
        return Err(DtwError::BadK { k, n });
    }
    // Average linkage keeps pairwise sums so the value does not depend on merge order.
    let mut acc: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect();
    let mut active: Vec<Active> = (0..n).map(|i| Active { id: i, rep: i, size: 1 }).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    let linkage_value = |acc: &Vec<Vec<f64>>, a: &Active, b: &Active| match linkage {
        Linkage::Average => acc[a.rep][b.rep] / (a.size * b.size) as f64,
        Linkage::Complete => acc[a.rep][b.rep],
    };

    while active.len() > 1 {
        // `active` is kept sorted by rep, so scanning in order gives the tie-break.
        let mut best: Option<(f64, usize, usize)> = None;
        for x in 0..active.len() {
            for y in x + 1..active.len() {
                let v = linkage_value(&acc, &active[x], &active[y]);
                if best.is_none_or(|(bv, _, _)| v < bv) {
                    best = Some((v, x, y));
                }
            }
        }
        let (height, x, y) = best.expect("at least two clusters");
        let (ra, rb) = (active[x].rep, active[y].rep);
        let new_id = n + merges.len();
        let size = active[x].size + active[y].size;
        merges.push(Merge { a: active[x].id, b: active[y].id, height, size });
        for other in &active {
            let r = other.rep;
            if r == ra || r == rb {
                continue;
            }
            let v = match linkage {
                Linkage::Average => acc[ra][r] + acc[rb][r],
                Linkage::Complete => acc[ra][r].max(acc[rb][r]),
            };
            acc[ra][r] = v;
            acc[r][ra] = v;
        }
        active[x] = Active { id: new_id, rep: ra, size };
        active.remove(y);
    }

    Ok(ClusterAssignment { k, ids: m.ids.clone(), labels: cut(n, &merges, k), merges })
}

/// Labels after applying the first `n - k` merges.
fn cut(n: usize, merges: &[Merge], k: usize) -> Vec<usize> {
    let mut uf: Vec<usize> = (0..2 * n).collect();
    fn find(uf: &mut [usize], mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    for (s, mg) in merges.iter().take(n - k).enumerate() {
        let ra = find(&mut uf, mg.a);
        let rb = find(&mut uf, mg.b);
        uf[ra] = n + s;
        uf[rb] = n + s;
    }
    let mut label_of_root = std::collections::HashMap::new();
    (0..n)
        .map(|i| {
            let r = find(&mut uf, i);
            let next = label_of_root.len();
            *label_of_root.entry(r).or_insert(next)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(n: usize, f: impl Fn(usize, usize) -> f64) -> DistanceMatrix {
        DistanceMatrix::from_fn((0..n).map(|i| format!("s{i}")).collect(), f)
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let m = matrix(4, |i, j| (i + j) as f64);
        let c = hierarchical_cluster(&m, Linkage::Average, 4).unwrap();
        assert_eq!(c.labels, vec![0, 1, 2, 3]);
        assert_eq!(c.merges.len(), 3);
    }

    #[test]
    fn separated_groups_recovered() {
        let group = |i: usize| usize::from(i % 2 == 1);
        let m = matrix(6, |i, j| if group(i) == group(j) { 0.0 } else { 1.0 });
        for linkage in [Linkage::Average, Linkage::Complete] {
            let c = hierarchical_cluster(&m, linkage, 2).unwrap();
            assert_eq!(c.labels, vec![0, 1, 0, 1, 0, 1]);
            assert_eq!(c.merges.last().unwrap().height, 1.0);
        }
    }

    #[test]
    fn scipy_style_ids_and_ties() {
        // all distances equal: merges go by lowest members first
        let m = matrix(3, |_, _| 1.0);
        let c = hierarchical_cluster(&m, Linkage::Average, 1).unwrap();
        assert_eq!((c.merges[0].a, c.merges[0].b), (0, 1));
        assert_eq!((c.merges[1].a, c.merges[1].b), (3, 2));
        assert_eq!(c.merges[1].size, 3);
        assert_eq!(c.labels, vec![0, 0, 0]);
    }

    #[test]
    fn average_and_complete_differ() {
        // 0-1 close; 2 is 2 from 0 and 4 from 1; 3 far from all
        let d = [[0., 1., 2., 9.], [1., 0., 4., 9.], [2., 4., 0., 9.], [9., 9., 9., 0.]];
        let m = matrix(4, |i, j| d[i][j]);
        let avg = hierarchical_cluster(&m, Linkage::Average, 1).unwrap();
        let com = hierarchical_cluster(&m, Linkage::Complete, 1).unwrap();
        assert_eq!(avg.merges[1].height, 3.0);
        assert_eq!(com.merges[1].height, 4.0);
    }

    #[test]
    fn bad_k() {
        let m = matrix(2, |_, _| 1.0);
        assert_eq!(hierarchical_cluster(&m, Linkage::Average, 0).unwrap_err(), DtwError::BadK { k: 0, n: 2 });
        assert!(hierarchical_cluster(&m, Linkage::Average, 3).is_err());
    }
}
