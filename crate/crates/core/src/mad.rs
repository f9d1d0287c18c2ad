//! Geometric outlier scores from the median absolute deviation of the
//! candidate-to-skin distances.

use crate::boundary::CandidateBoundary;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Scores and filter decisions of the geometric stage.
#[derive(Debug, Clone)]
pub struct MadResult<T> {
    /// Deviation-to-MAD ratio per candidate, aligned with the input order.
    pub scores: Vec<T>,
    pub median_distance: T,
    pub mad: T,
    pub inlier: Vec<bool>,
    pub threshold: T,
}

/// Median of a slice; an even count averages the two central values.
fn median<T: Scalar>(values: &[T]) -> T {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / T::from_f64_(2.0)
    }
}

/// Score every candidate: `|d - med(d)| / med(|d - med(d)|)` over the skin
/// distances. When the MAD itself is zero (at least half the distances
/// coincide) every score is defined as 0 and all candidates are inliers.
pub fn mad_scores<T: Scalar>(
    candidates: &CandidateBoundary<T>,
    threshold: T,
) -> Result<MadResult<T>> {
    let n = candidates.len();
    if n < 3 {
        return Err(Error::TooFewCandidates { need: 3, got: n });
    }
    let distances: Vec<T> = candidates
        .candidates
        .iter()
        .map(|c| c.skin_distance)
        .collect();
    let med = median(&distances);
    let deviations: Vec<T> = distances.iter().map(|&d| (d - med).abs()).collect();
    let mad = median(&deviations);
    let scores: Vec<T> = if mad == T::zero() {
        vec![T::zero(); n]
    } else {
        deviations.iter().map(|&d| d / mad).collect()
    };
    let inlier = scores.iter().map(|&s| s <= threshold).collect();
    Ok(MadResult {
        scores,
        median_distance: med,
        mad,
        inlier,
        threshold,
    })
}

/// Split candidates into kept (score <= threshold) and removed, both carrying
/// their geometric score so the fusion stage can still see every hypothesis.
pub fn filter_by_mad<T: Scalar>(
    candidates: &CandidateBoundary<T>,
    result: &MadResult<T>,
) -> Result<(CandidateBoundary<T>, CandidateBoundary<T>)> {
    if result.scores.len() != candidates.len() {
        return Err(Error::Misaligned(format!(
            "{} scores for {} candidates",
            result.scores.len(),
            candidates.len()
        )));
    }
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (cand, (&score, &keep)) in candidates
        .candidates
        .iter()
        .zip(result.scores.iter().zip(result.inlier.iter()))
    {
        let mut annotated = cand.clone();
        annotated.geo_score = Some(score);
        if keep {
            kept.push(annotated);
        } else {
            removed.push(annotated);
        }
    }
    Ok((
        CandidateBoundary { candidates: kept },
        CandidateBoundary {
            candidates: removed,
        },
    ))
}

/// Write the geometric score onto every candidate in place.
pub fn annotate_geo_scores<T: Scalar>(
    candidates: &mut CandidateBoundary<T>,
    result: &MadResult<T>,
) -> Result<()> {
    if result.scores.len() != candidates.len() {
        return Err(Error::Misaligned(format!(
            "{} scores for {} candidates",
            result.scores.len(),
            candidates.len()
        )));
    }
    for (cand, &score) in candidates.candidates.iter_mut().zip(result.scores.iter()) {
        cand.geo_score = Some(score);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::Candidate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn candidates_with_distances(d: &[f64]) -> CandidateBoundary<f64> {
        CandidateBoundary {
            candidates: d
                .iter()
                .enumerate()
                .map(|(i, &dist)| Candidate {
                    ray: i,
                    position: (dist, 0.0),
                    skin_distance: dist,
                    ray_angle: 0.0,
                    geo_score: None,
                    app_score: None,
                    label: None,
                })
                .collect(),
        }
    }

    /// Independent brute-force scorer used as the oracle.
    pub(crate) fn oracle_scores(d: &[f64]) -> Vec<f64> {
        let med = |xs: &[f64]| -> f64 {
            let mut s = xs.to_vec();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = s.len();
            if n % 2 == 1 {
                s[n / 2]
            } else {
                (s[n / 2 - 1] + s[n / 2]) / 2.0
            }
        };
        let m = med(d);
        let dev: Vec<f64> = d.iter().map(|x| (x - m).abs()).collect();
        let mad = med(&dev);
        if mad == 0.0 {
            vec![0.0; d.len()]
        } else {
            dev.iter().map(|x| x / mad).collect()
        }
    }

    #[test]
    fn worked_example() {
        let c = candidates_with_distances(&[3.0, 4.0, 5.0, 6.0, 100.0]);
        let r = mad_scores(&c, 2.5).unwrap();
        assert_eq!(r.median_distance, 5.0);
        assert_eq!(r.mad, 1.0);
        assert_eq!(r.scores, vec![2.0, 1.0, 0.0, 1.0, 95.0]);
        assert_eq!(r.inlier, vec![true, true, true, true, false]);

        let (kept, removed) = filter_by_mad(&c, &r).unwrap();
        assert_eq!(kept.len(), 4);
        assert_eq!(removed.len(), 1);
        assert_eq!(removed.candidates[0].geo_score, Some(95.0));
    }

    #[test]
    fn constant_distances_hit_degenerate_branch() {
        let c = candidates_with_distances(&[7.0; 6]);
        let r = mad_scores(&c, 2.5).unwrap();
        assert_eq!(r.mad, 0.0);
        assert!(r.scores.iter().all(|&s| s == 0.0));
        assert!(r.inlier.iter().all(|&b| b));
        let (kept, removed) = filter_by_mad(&c, &r).unwrap();
        assert_eq!(kept.len(), 6);
        assert!(removed.is_empty());
    }

    #[test]
    fn fewer_than_three_rejected() {
        let c = candidates_with_distances(&[1.0, 2.0]);
        assert!(matches!(
            mad_scores(&c, 2.5),
            Err(Error::TooFewCandidates { need: 3, got: 2 })
        ));
    }

    #[test]
    fn infinite_threshold_keeps_everything() {
        let c = candidates_with_distances(&[3.0, 4.0, 5.0, 6.0, 100.0]);
        let r = mad_scores(&c, f64::INFINITY).unwrap();
        let (kept, removed) = filter_by_mad(&c, &r).unwrap();
        assert_eq!(kept.len(), 5);
        assert!(removed.is_empty());
    }

    #[test]
    fn shuffle_permutes_scores() {
        let d = [3.0, 4.0, 5.0, 6.0, 100.0, 5.5, 4.5];
        let shuffled = [100.0, 5.5, 3.0, 4.5, 6.0, 5.0, 4.0];
        let a = mad_scores(&candidates_with_distances(&d), 2.5).unwrap();
        let b = mad_scores(&candidates_with_distances(&shuffled), 2.5).unwrap();
        let mut sa = a.scores.clone();
        let mut sb = b.scores.clone();
        sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
        sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(sa, sb);
    }

    #[test]
    fn scores_invariant_to_shift_and_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(3..40);
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..100.0)).collect();
            let base = mad_scores(&candidates_with_distances(&d), 2.5).unwrap();
            let shifted: Vec<f64> = d.iter().map(|x| x + 17.25).collect();
            let scaled: Vec<f64> = d.iter().map(|x| x * 3.5).collect();
            let rs = mad_scores(&candidates_with_distances(&shifted), 2.5).unwrap();
            let rc = mad_scores(&candidates_with_distances(&scaled), 2.5).unwrap();
            for i in 0..n {
                assert!((base.scores[i] - rs.scores[i]).abs() < 1e-9);
                assert!((base.scores[i] - rc.scores[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn matches_bruteforce_oracle_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let n = rng.random_range(3..60);
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..200.0)).collect();
            let r = mad_scores(&candidates_with_distances(&d), 2.5).unwrap();
            assert_eq!(r.scores, oracle_scores(&d));
        }
    }

    #[test]
    fn removing_unique_max_never_flips_zero_score_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut checked = 0;
        while checked < 50 {
            let n = rng.random_range(5..30);
            let mut d: Vec<f64> = (0..n).map(|_| rng.random_range(10.0..20.0)).collect();
            d[0] = 500.0; // unique maximum, far out
            let before = oracle_scores(&d);
            if before[0] <= 2.5 {
                continue;
            }
            let zero_idx: Vec<usize> =
                (1..n).filter(|&i| before[i] == 0.0).collect();
            let after_d: Vec<f64> = d[1..].to_vec();
            let after = oracle_scores(&after_d);
            for &i in &zero_idx {
                assert!(
                    after[i - 1] <= 2.5,
                    "former zero-score point became outlier"
                );
            }
            checked += 1;
        }
    }

    #[test]
    fn generic_over_f32() {
        let c = CandidateBoundary::<f32> {
            candidates: [3.0f32, 4.0, 5.0, 6.0, 100.0]
                .iter()
                .enumerate()
                .map(|(i, &dist)| Candidate {
                    ray: i,
                    position: (dist, 0.0),
                    skin_distance: dist,
                    ray_angle: 0.0,
                    geo_score: None,
                    app_score: None,
                    label: None,
                })
                .collect(),
        };
        let r = mad_scores(&c, 2.5f32).unwrap();
        assert_eq!(r.scores, vec![2.0f32, 1.0, 0.0, 1.0, 95.0]);
    }
}
