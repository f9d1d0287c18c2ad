//! Initial SAT–VAT boundary hypotheses: rays from the skin contour toward the
//! abdominal center, stopping at the first fat→non-fat transition.

use crate::contour::Contour;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::BinarySlice;

/// A transition needs this many consecutive fat samples first, which keeps
/// single-pixel skin-line noise from triggering it.
const MIN_FAT_RUN: usize = 2;

/// One ray of the fan: starts on the skin contour, aims at the center.
#[derive(Debug, Clone, Copy)]
pub struct Ray<T> {
    pub start: (T, T),
    /// Unit direction toward the center.
    pub dir: (T, T),
    /// Distance from start to the center.
    pub span: T,
}

/// Rays cast from uniformly spaced skin points toward the abdominal center.
#[derive(Debug, Clone)]
pub struct RayFan<T> {
    pub center: (T, T),
    pub rays: Vec<Ray<T>>,
    /// Walk step along each ray, in pixels.
    pub step: T,
}

/// Decision of the label-fusion stage for one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionLabel {
    /// Kept as part of the SAT–VAT separating boundary.
    Boundary,
    Outlier,
}

/// One boundary hypothesis with its per-stage annotations.
#[derive(Debug, Clone)]
pub struct Candidate<T> {
    /// Index of the ray that produced this hypothesis.
    pub ray: usize,
    pub position: (T, T),
    /// Euclidean distance from the hypothesis to its ray's skin point.
    pub skin_distance: T,
    /// Angle of the ray direction, radians.
    pub ray_angle: T,
    /// Geometric outlier score, filled by the MAD stage.
    pub geo_score: Option<T>,
    /// Appearance outlier probability, filled by the local-outlier stage.
    pub app_score: Option<T>,
    /// Final fused decision.
    pub label: Option<FusionLabel>,
}

/// Ordered boundary hypotheses for one slice.
#[derive(Debug, Clone, Default)]
pub struct CandidateBoundary<T> {
    pub candidates: Vec<Candidate<T>>,
}

impl<T> CandidateBoundary<T> {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

impl<T: Scalar> CandidateBoundary<T> {
    /// Positions of candidates the fusion stage kept (or all candidates when
    /// no labels are set yet).
    pub fn boundary_positions(&self) -> Vec<(T, T)> {
        self.candidates
            .iter()
            .filter(|c| c.label != Some(FusionLabel::Outlier))
            .map(|c| c.position)
            .collect()
    }
}

/// Build a fan of `n_rays` rays starting at contour points uniformly spaced
/// by arc position, each pointing at the centroid of the contour vertices.
pub fn build_ray_fan<T: Scalar>(contour: &Contour, n_rays: usize, step: T) -> Result<RayFan<T>> {
    if n_rays < 8 {
        return Err(Error::Param(format!("n_rays must be >= 8, got {n_rays}")));
    }
    if step <= T::zero() || !step.is_finite() {
        return Err(Error::Param("ray step must be positive".into()));
    }
    if contour.len() < 3 || contour.area() < 1.0 {
        return Err(Error::DegenerateContour(format!(
            "contour with {} points and area {:.3} cannot anchor a ray fan",
            contour.len(),
            contour.area()
        )));
    }
    let (cx, cy) = contour.centroid();
    let center = (T::from_f64_(cx), T::from_f64_(cy));

    // cumulative arc length at each vertex
    let pts = &contour.points;
    let n = pts.len();
    let mut arc = Vec::with_capacity(n + 1);
    arc.push(0.0f64);
    for i in 0..n {
        let (x0, y0) = pts[i];
        let (x1, y1) = pts[(i + 1) % n];
        let d = (((x1 - x0).pow(2) + (y1 - y0).pow(2)) as f64).sqrt();
        arc.push(arc[i] + d);
    }
    let total = arc[n];

    let mut rays = Vec::with_capacity(n_rays);
    let mut cursor = 0usize;
    let mut last_start: Option<(i32, i32)> = None;
    for k in 0..n_rays {
        let target = total * k as f64 / n_rays as f64;
        while cursor + 1 < n && arc[cursor + 1] <= target {
            cursor += 1;
        }
        // nearer of the two bracketing vertices
        let pick = if cursor + 1 < n && (arc[cursor + 1] - target).abs() < (target - arc[cursor]).abs()
        {
            cursor + 1
        } else {
            cursor
        };
        let p = pts[pick];
        if last_start == Some(p) {
            continue; // short contours: skip duplicate starts
        }
        last_start = Some(p);
        let start = (T::from_f64_(p.0 as f64), T::from_f64_(p.1 as f64));
        let (vx, vy) = (center.0 - start.0, center.1 - start.1);
        let span = (vx * vx + vy * vy).sqrt();
        if span <= T::zero() {
            continue; // start coincides with the center
        }
        rays.push(Ray {
            start,
            dir: (vx / span, vy / span),
            span,
        });
    }
    if rays.is_empty() {
        return Err(Error::DegenerateContour("no usable rays".into()));
    }
    Ok(RayFan {
        center,
        rays,
        step,
    })
}

/// Walk every ray inward and record the first fat→non-fat transition after a
/// run of at least [`MIN_FAT_RUN`] fat samples. The candidate sits at the
/// first non-fat sample, which keeps the separating hull on the muscle side
/// of the interface. Rays with no transition yield no candidate.
pub fn detect_transitions<T: Scalar>(
    fan: &RayFan<T>,
    fat_mask: &BinarySlice,
) -> CandidateBoundary<T> {
    let mut candidates = Vec::new();
    for (ray_idx, ray) in fan.rays.iter().enumerate() {
        let mut t = T::zero();
        let mut fat_run = 0usize;
        while t <= ray.span {
            let x = ray.start.0 + ray.dir.0 * t;
            let y = ray.start.1 + ray.dir.1 * t;
            let (px, py) = (
                x.round().to_f64().unwrap_or(-1.0) as i64,
                y.round().to_f64().unwrap_or(-1.0) as i64,
            );
            if !fat_mask.in_bounds(px, py) {
                break;
            }
            let is_fat = fat_mask.get(px as usize, py as usize);
            if is_fat {
                fat_run += 1;
            } else if fat_run >= MIN_FAT_RUN {
                let angle = ray.dir.1.to_f64().unwrap().atan2(ray.dir.0.to_f64().unwrap());
                candidates.push(Candidate {
                    ray: ray_idx,
                    position: (x, y),
                    skin_distance: t,
                    ray_angle: T::from_f64_(angle),
                    geo_score: None,
                    app_score: None,
                    label: None,
                });
                break;
            } else {
                fat_run = 0;
            }
            t = t + fan.step;
        }
    }
    CandidateBoundary { candidates }
}
