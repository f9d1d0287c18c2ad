//! Seeded two-cluster k-means on 2D score vectors, used to turn outlier
//! scores into label probabilities.

use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct KMeans2<T> {
    pub centroids: [(T, T); 2],
    pub assignment: Vec<usize>,
    pub inertia: T,
}

fn sq_dist<T: Scalar>(a: (T, T), b: (T, T)) -> T {
    let (dx, dy) = (a.0 - b.0, a.1 - b.1);
    dx * dx + dy * dy
}

fn lloyd<T: Scalar>(points: &[(T, T)], mut centroids: [(T, T); 2]) -> KMeans2<T> {
    let n = points.len();
    let mut assignment = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, &p) in points.iter().enumerate() {
            let a = if sq_dist(p, centroids[0]) <= sq_dist(p, centroids[1]) {
                0
            } else {
                1
            };
            if assignment[i] != a {
                assignment[i] = a;
                changed = true;
            }
        }
        // recompute centroids; an emptied cluster takes the point farthest
        // from the other centroid
        for c in 0..2 {
            let members: Vec<(T, T)> = points
                .iter()
                .zip(assignment.iter())
                .filter(|(_, &a)| a == c)
                .map(|(&p, _)| p)
                .collect();
            if members.is_empty() {
                let other = centroids[1 - c];
                let far = points
                    .iter()
                    .enumerate()
                    .max_by(|a, b| {
                        sq_dist(*a.1, other)
                            .partial_cmp(&sq_dist(*b.1, other))
                            .unwrap()
                            .then(b.0.cmp(&a.0))
                    })
                    .map(|(_, &p)| p)
                    .unwrap();
                centroids[c] = far;
                changed = true;
            } else {
                let k = T::from_usize_(members.len());
                let sum = members
                    .iter()
                    .fold((T::zero(), T::zero()), |acc, p| (acc.0 + p.0, acc.1 + p.1));
                centroids[c] = (sum.0 / k, sum.1 / k);
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(assignment.iter())
        .map(|(&p, &a)| sq_dist(p, centroids[a]))
        .sum();
    KMeans2 {
        centroids,
        assignment,
        inertia,
    }
}

/// Run `restarts` seeded random initializations and keep the lowest-inertia
/// fit. Initial centroids are two distinct data points.
pub fn kmeans2<T: Scalar>(points: &[(T, T)], restarts: usize, seed: u64) -> KMeans2<T> {
    assert!(points.len() >= 2, "k-means needs at least 2 points");
    let mut best: Option<KMeans2<T>> = None;
    for r in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let i = rng.random_range(0..points.len());
        let mut j = rng.random_range(0..points.len());
        let mut guard = 0;
        while points[j] == points[i] && guard < 64 {
            j = rng.random_range(0..points.len());
            guard += 1;
        }
        let fit = lloyd(points, [points[i], points[j]]);
        if best.as_ref().map_or(true, |b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    best.unwrap()
}
