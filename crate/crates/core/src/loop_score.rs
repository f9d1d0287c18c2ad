//! Local outlier probabilities: density-based scores in [0, 1] from the
//! error-function-normalized probabilistic local outlier factor.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tsne::Embedding2D;

/// Per-point outlier probabilities and the quantities behind them.
#[derive(Debug, Clone)]
pub struct LoopResult<T> {
    /// Outlier probability per point, in [0, 1].
    pub pi: Vec<T>,
    /// Probabilistic local outlier factor per point.
    pub plof: Vec<T>,
    /// Aggregate normalizer: `lambda * sqrt(mean(plof^2))`.
    pub nplof: T,
}

/// Score points of any dimension. For each point x with context set S(x) of
/// its k nearest neighbors (Euclidean, ties broken by index):
///
/// ```text
/// sigma(x) = sqrt(sum_{s in S} d(x,s)^2 / k)
/// pdist(x) = lambda * sigma(x)
/// plof(x)  = pdist(x) / mean_{s in S}(pdist(s)) - 1
/// nplof    = lambda * sqrt(mean_x plof(x)^2)
/// pi(x)    = max(0, erf(plof(x) / (sqrt(2) * nplof)))
/// ```
///
/// The mean-pdist denominator is floored at 1e-12 so exact duplicates stay
/// maximally inlying instead of dividing by zero.
pub fn loop_scores<T: Scalar>(points: &[Vec<T>], k: usize, lambda: T) -> Result<LoopResult<T>> {
    let n = points.len();
    if k < 2 {
        return Err(Error::Param(format!("neighbor count must be >= 2, got {k}")));
    }
    if n <= k {
        return Err(Error::TooFewCandidates { need: k + 1, got: n });
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Misaligned("point dimensions differ".into()));
    }

    let sq_dist = |a: &[T], b: &[T]| -> T {
        a.iter()
            .zip(b.iter())
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum()
    };

    // k nearest neighbors per point, self excluded
    let mut neighbors: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut sigma: Vec<T> = Vec::with_capacity(n);
    for i in 0..n {
        let mut dists: Vec<(T, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (sq_dist(&points[i], &points[j]), j))
            .collect();
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        dists.truncate(k);
        let sum_sq: T = dists.iter().map(|&(d, _)| d).sum();
        sigma.push((sum_sq / T::from_usize_(k)).sqrt());
        neighbors.push(dists.into_iter().map(|(_, j)| j).collect());
    }

    let pdist: Vec<T> = sigma.iter().map(|&s| lambda * s).collect();
    let floor = T::from_f64_(1e-12);
    let plof: Vec<T> = (0..n)
        .map(|i| {
            let mean_neighbor_pdist = neighbors[i]
                .iter()
                .map(|&j| pdist[j])
                .sum::<T>()
                / T::from_usize_(k);
            pdist[i] / mean_neighbor_pdist.max(floor) - T::one()
        })
        .collect();

    let mean_sq = plof.iter().map(|&p| p * p).sum::<T>() / T::from_usize_(n);
    let nplof = lambda * mean_sq.sqrt();

    let pi: Vec<T> = if nplof <= floor {
        vec![T::zero(); n]
    } else {
        let sqrt2 = T::from_f64_(std::f64::consts::SQRT_2);
        plof.iter()
            .map(|&p| (p / (sqrt2 * nplof)).erf().max(T::zero()))
            .collect()
    };

    Ok(LoopResult { pi, plof, nplof })
}

/// Convenience wrapper over a 2D embedding.
pub fn loop_scores_2d<T: Scalar>(
    embedding: &Embedding2D<T>,
    k: usize,
    lambda: T,
) -> Result<LoopResult<T>> {
    let pts: Vec<Vec<T>> = embedding.points.iter().map(|&(u, v)| vec![u, v]).collect();
    loop_scores(&pts, k, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts2(coords: &[(f64, f64)]) -> Vec<Vec<f64>> {
        coords.iter().map(|&(x, y)| vec![x, y]).collect()
    }

    /// Dense 10x10 cluster plus one point about ten cluster diameters away.
    fn cluster_plus_outlier() -> Vec<Vec<f64>> {
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push((i as f64 * 0.1, j as f64 * 0.1));
            }
        }
        pts.push((13.0, 0.45));
        pts2(&pts)
    }

    /// Jittered cluster plus far point: no exact distance ties, so neighbor
    /// selection is permutation-covariant.
    fn jittered_cluster() -> Vec<Vec<f64>> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut pts: Vec<(f64, f64)> = (0..40)
            .map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
            .collect();
        pts.push((11.0, 7.0));
        pts2(&pts)
    }

    #[test]
    fn far_point_scores_high_cluster_scores_low() {
        let pts = cluster_plus_outlier();
        let r = loop_scores(&pts, 5, 3.0).unwrap();
        let n = pts.len();
        assert!(r.pi[n - 1] > 0.95, "outlier pi {}", r.pi[n - 1]);
        for i in 0..n - 1 {
            assert!(r.pi[i] < 0.3, "cluster point {i} pi {}", r.pi[i]);
        }
    }

    #[test]
    fn scores_stay_in_unit_interval() {
        let pts = cluster_plus_outlier();
        let r = loop_scores(&pts, 4, 3.0).unwrap();
        assert!(r.pi.iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert!(r.nplof >= 0.0);
    }

    #[test]
    fn regular_grid_interior_is_inlying() {
        let mut pts = Vec::new();
        for i in 0..7 {
            for j in 0..7 {
                pts.push((i as f64, j as f64));
            }
        }
        let pts = pts2(&pts);
        let r = loop_scores(&pts, 4, 3.0).unwrap();
        // interior points: indices with i,j in 2..5of the 7x7 grid
        for i in 2..5 {
            for j in 2..5 {
                let idx = i * 7 + j;
                assert!(r.pi[idx] < 0.1, "interior ({i},{j}) pi {}", r.pi[idx]);
            }
        }
    }

    #[test]
    fn permuting_points_permutes_scores() {
        let pts = jittered_cluster();
        let n = pts.len();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let a = loop_scores(&pts, 5, 3.0).unwrap();
        let b = loop_scores(&permuted, 5, 3.0).unwrap();
        for (new_idx, &old_idx) in perm.iter().enumerate() {
            assert!((a.pi[old_idx] - b.pi[new_idx]).abs() < 1e-12);
        }
    }

    #[test]
    fn rigid_motion_leaves_scores_unchanged() {
        let pts = jittered_cluster();
        let angle: f64 = 0.83;
        let (s, c) = angle.sin_cos();
        let moved: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| vec![c * p[0] - s * p[1] + 12.0, s * p[0] + c * p[1] - 4.5])
            .collect();
        let a = loop_scores(&pts, 5, 3.0).unwrap();
        let b = loop_scores(&moved, 5, 3.0).unwrap();
        for i in 0..pts.len() {
            assert!((a.pi[i] - b.pi[i]).abs() < 1e-9, "point {i}");
        }
    }

    #[test]
    fn duplicates_are_maximally_inlying() {
        let mut coords = vec![(0.0, 0.0); 6]; // six exact duplicates
        coords.push((4.0, 0.0));
        let pts = pts2(&coords);
        let r = loop_scores(&pts, 3, 3.0).unwrap();
        for i in 0..6 {
            assert!(r.pi[i] <= r.pi[6], "duplicate {i} should not outrank the far point");
            assert!(r.pi[i] < 0.05);
        }
    }

    #[test]
    fn k_bounds_enforced() {
        let pts = pts2(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        assert!(loop_scores(&pts, 3, 3.0).is_err());
        assert!(loop_scores(&pts, 1, 3.0).is_err());
        assert!(loop_scores(&pts, 2, 3.0).is_ok());
    }
}
