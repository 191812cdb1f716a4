use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{DistanceMatrix, DtwError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedPoint {
    pub id: String,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding2D {
    pub points: Vec<EmbeddedPoint>,
    /// The two eigenvalues used, after clipping at zero.
    pub eigenvalues: [f64; 2],
    /// Set when every input distance is zero.
    pub degenerate: bool,
}

impl Embedding2D {
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.points[i], &self.points[j]);
        (a.u - b.u).hypot(a.v - b.v)
    }
}

/// Classical MDS into the plane.
pub fn mds_embed(m: &DistanceMatrix) -> Result<Embedding2D, DtwError> {
    let n = m.n;
    if n < 2 {
        return Err(DtwError::TooFewSequences(2));
    }
    let degenerate = m.d.iter().all(|&x| x == 0.0);
    if degenerate {
        let points = m.ids.iter().map(|id| EmbeddedPoint { id: id.clone(), u: 0.0, v: 0.0 }).collect();
        return Ok(Embedding2D { points, eigenvalues: [0.0, 0.0], degenerate });
    }

    let sq = DMatrix::from_fn(n, n, |i, j| m.get(i, j).powi(2));
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).mean()).collect();
    let grand = sq.mean();
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));

    let eig = SymmetricEigen::try_new(b, 1e-12, 10_000).ok_or(DtwError::NoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));

    let mut coords = [vec![0.0; n], vec![0.0; n]];
    let mut eigenvalues = [0.0; 2];
    for (axis, &col) in order.iter().take(2).enumerate() {
        let lambda = eig.eigenvalues[col].max(0.0);
        eigenvalues[axis] = lambda;
        let vec = eig.eigenvectors.column(col);
        // fix the sign so the largest-magnitude component is positive
        let pivot = (0..n).fold(0, |p, i| if vec[i].abs() > vec[p].abs() { i } else { p });
        let sign = if vec[pivot] < 0.0 { -1.0 } else { 1.0 };
        let scale = lambda.sqrt() * sign;
        let mean = vec.mean();
        for i in 0..n {
            coords[axis][i] = (vec[i] - mean) * scale;
        }
    }

    let points = (0..n)
        .map(|i| EmbeddedPoint { id: m.ids[i].clone(), u: coords[0][i], v: coords[1][i] })
        .collect();
    Ok(Embedding2D { points, eigenvalues, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(n: usize, f: impl Fn(usize, usize) -> f64) -> DistanceMatrix {
        DistanceMatrix::from_fn((0..n).map(|i| i.to_string()).collect(), f)
    }

    #[test]
    fn two_points() {
        let e = mds_embed(&matrix(2, |_, _| 2.0)).unwrap();
        assert!((e.distance(0, 1) - 2.0).abs() < 1e-9);
        assert!(!e.degenerate);
    }

    #[test]
    fn equilateral_triangle() {
        let e = mds_embed(&matrix(3, |_, _| 1.0)).unwrap();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert!((e.distance(i, j) - 1.0).abs() < 1e-6);
        }
        let cu: f64 = e.points.iter().map(|p| p.u).sum();
        let cv: f64 = e.points.iter().map(|p| p.v).sum();
        assert!(cu.abs() < 1e-12 && cv.abs() < 1e-12);
    }

    #[test]
    fn all_zero_is_flagged() {
        let e = mds_embed(&matrix(4, |_, _| 0.0)).unwrap();
        assert!(e.degenerate);
        assert!(e.points.iter().all(|p| p.u == 0.0 && p.v == 0.0));
    }

    #[test]
    fn single_point_is_error() {
        assert!(mds_embed(&matrix(1, |_, _| 0.0)).is_err());
    }
}
