//! Appearance stage orchestration: descriptors at every candidate, the 2D
//! embedding, and local outlier probabilities written back onto the
//! candidates.

use crate::boundary::CandidateBoundary;
use crate::error::Result;
use crate::hog::{hog_at, HogDescriptor};
use crate::loop_score::{loop_scores, LoopResult};
use crate::scalar::Scalar;
use crate::tsne::{pairwise_ncd, tsne_embed, Embedding2D, TsneParams};
use crate::IntensitySlice;
use rayon::prelude::*;

/// Which space the local outlier scores are computed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopSpace {
    /// The 2D embedding (default).
    Embedding,
    /// The raw descriptor space.
    RawHog,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AppearanceParams {
    pub tsne: TsneParams,
    /// Neighbor count for the outlier scores, clamped to n-1.
    pub loop_k: usize,
    /// Density smoothing factor.
    pub lambda: f64,
    pub space: LoopSpace,
}

impl Default for AppearanceParams {
    fn default() -> Self {
        Self {
            tsne: TsneParams::default(),
            loop_k: 20,
            lambda: 3.0,
            space: LoopSpace::Embedding,
        }
    }
}

/// Everything the appearance stage produced, kept for the fusion stage and
/// for stage dumps.
#[derive(Debug, Clone)]
pub struct AppearanceArtifacts<T> {
    pub descriptors: Vec<HogDescriptor<T>>,
    pub embedding: Option<Embedding2D<T>>,
    pub loop_result: Option<LoopResult<T>>,
}

/// Annotate every candidate with its appearance outlier probability. With
/// fewer than 4 candidates there is no meaningful density context, so every
/// probability falls back to 0.
pub fn score_candidates<T: Scalar>(
    candidates: &mut CandidateBoundary<T>,
    slice: &IntensitySlice,
    params: &AppearanceParams,
    seed: u64,
) -> Result<AppearanceArtifacts<T>> {
    let n = candidates.len();
    let descriptors: Vec<HogDescriptor<T>> = candidates
        .candidates
        .par_iter()
        .map(|c| hog_at(slice, c.position))
        .collect();

    if n < 4 {
        for c in candidates.candidates.iter_mut() {
            c.app_score = Some(T::zero());
        }
        return Ok(AppearanceArtifacts {
            descriptors,
            embedding: None,
            loop_result: None,
        });
    }

    let distances = pairwise_ncd(&descriptors)?;
    // default clamp: perplexity = min(requested, floor((n-1)/3)), at least 1
    let mut tsne_params = params.tsne;
    tsne_params.perplexity = tsne_params.perplexity.min(((n - 1) / 3) as f64).max(1.0);
    let embedding = tsne_embed(&distances, &tsne_params, seed)?;

    let k = params.loop_k.min(n - 1).max(2);
    let lambda = T::from_f64_(params.lambda);
    let loop_result = match params.space {
        LoopSpace::Embedding => {
            let pts: Vec<Vec<T>> = embedding.points.iter().map(|&(u, v)| vec![u, v]).collect();
            loop_scores(&pts, k, lambda)?
        }
        LoopSpace::RawHog => {
            let pts: Vec<Vec<T>> = descriptors.iter().map(|d| d.values.clone()).collect();
            loop_scores(&pts, k, lambda)?
        }
    };
    for (c, &pi) in candidates
        .candidates
        .iter_mut()
        .zip(loop_result.pi.iter())
    {
        c.app_score = Some(pi);
    }
    Ok(AppearanceArtifacts {
        descriptors,
        embedding: Some(embedding),
        loop_result: Some(loop_result),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::Candidate;
    use crate::grid::Grid2;

    fn textured_slice(w: usize, h: usize) -> IntensitySlice {
        let mut g = Grid2::filled(w, h, 0i16);
        for y in 0..h {
            for x in 0..w {
                let v = ((x as f64 * 0.3).sin() * 90.0 + (y as f64 * 0.2).cos() * 70.0) as i16;
                g.set(x, y, v);
            }
        }
        g
    }

    fn candidates_at(positions: &[(f64, f64)]) -> CandidateBoundary<f64> {
        CandidateBoundary {
            candidates: positions
                .iter()
                .enumerate()
                .map(|(i, &p)| Candidate {
                    ray: i,
                    position: p,
                    skin_distance: 10.0,
                    ray_angle: 0.0,
                    geo_score: None,
                    app_score: None,
                    label: None,
                })
                .collect(),
        }
    }

    #[test]
    fn tiny_candidate_sets_fall_back_to_zero() {
        let slice = textured_slice(64, 64);
        let mut c = candidates_at(&[(20.0, 20.0), (30.0, 30.0), (40.0, 25.0)]);
        let art = score_candidates(&mut c, &slice, &AppearanceParams::default(), 3).unwrap();
        assert!(art.embedding.is_none());
        assert_eq!(art.descriptors.len(), 3);
        assert!(c.candidates.iter().all(|c| c.app_score == Some(0.0)));
    }

    #[test]
    fn scores_land_on_every_candidate_deterministically() {
        let slice = textured_slice(96, 96);
        let positions: Vec<(f64, f64)> = (0..24)
            .map(|i| {
                let a = i as f64 / 24.0 * std::f64::consts::TAU;
                (48.0 + 20.0 * a.cos(), 48.0 + 20.0 * a.sin())
            })
            .collect();
        let mut params = AppearanceParams::default();
        params.tsne.iters = 150;
        let mut c1 = candidates_at(&positions);
        let mut c2 = candidates_at(&positions);
        score_candidates(&mut c1, &slice, &params, 11).unwrap();
        score_candidates(&mut c2, &slice, &params, 11).unwrap();
        for (a, b) in c1.candidates.iter().zip(c2.candidates.iter()) {
            let pa = a.app_score.unwrap();
            assert!((0.0..=1.0).contains(&pa));
            assert_eq!(a.app_score, b.app_score);
        }
    }

    #[test]
    fn raw_descriptor_space_switch_works() {
        let slice = textured_slice(96, 96);
        let positions: Vec<(f64, f64)> = (0..16)
            .map(|i| (15.0 + 4.0 * i as f64, 40.0 + ((i * 13) % 11) as f64))
            .collect();
        let mut params = AppearanceParams::default();
        params.tsne.iters = 100;
        params.space = LoopSpace::RawHog;
        let mut c = candidates_at(&positions);
        let art = score_candidates(&mut c, &slice, &params, 5).unwrap();
        assert!(art.loop_result.is_some());
        assert!(c.candidates.iter().all(|c| c.app_score.is_some()));
    }
}
