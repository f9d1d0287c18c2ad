//! End-to-end slice pipeline and the volume-level driver with its
//! deterministic worker pool.

use crate::appearance::{score_candidates, AppearanceParams};
use crate::boundary::{build_ray_fan, detect_transitions, FusionLabel};
use crate::contour::extract_skin_contour;
use crate::crf::{
    build_edges, fusion_features, minimize_energy, unary_potentials, EdgeSpec, FusionGraph,
};
use crate::error::{Error, Result};
use crate::evaluate::dice_labels;
use crate::grid::Grid2;
use crate::mad::{annotate_geo_scores, mad_scores};
use crate::partition::{all_fat_sat, convex_hull, partition_slice, quantify, HullPolygon};
use crate::preprocess::{fat_mask, PreprocessParams};
use crate::ransac::ransac_ellipse_inliers;
use crate::tsne::Embedding2D;
use crate::volume::{MaskGrid, MaskLabel, VolumeGrid};
use crate::{Candidates, IntensitySlice, Real};
use rayon::prelude::*;

/// Every tunable of the pipeline, with the defaults the method ships with.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PipelineConfig {
    pub preprocess: PreprocessParams,
    /// Rays cast from the skin contour.
    pub n_rays: usize,
    /// Walk step along each ray, pixels.
    pub sample_step: f64,
    /// Geometric score above this is an outlier.
    pub mad_threshold: f64,
    pub appearance: AppearanceParams,
    /// Pairwise weight of the fusion energy.
    pub crf_weight: f64,
    /// Neighbors per node in the fusion graph.
    pub crf_knn: usize,
    /// Appearance probability cut used by the outlier-probability-only
    /// selection.
    pub loop_threshold: f64,
    pub ransac_tolerance: f64,
    pub ransac_iterations: usize,
    pub seed: u64,
    /// Slice worker count; 0 uses every core.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessParams::default(),
            n_rays: 360,
            sample_step: 0.5,
            mad_threshold: 2.5,
            appearance: AppearanceParams::default(),
            crf_weight: 1.0,
            crf_knn: 5,
            loop_threshold: 0.5,
            ransac_tolerance: 3.0,
            ransac_iterations: 500,
            seed: 42,
            workers: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        if self.n_rays < 8 {
            return Err(Error::Param("n_rays must be >= 8".into()));
        }
        if !(self.sample_step > 0.0 && self.sample_step.is_finite()) {
            return Err(Error::Param("sample_step must be positive".into()));
        }
        if self.mad_threshold < 0.0 {
            return Err(Error::Param("mad_threshold must be >= 0".into()));
        }
        if self.crf_weight < 0.0 {
            return Err(Error::Param("crf_w must be >= 0".into()));
        }
        if self.appearance.loop_k < 2 {
            return Err(Error::Param("loop_k must be >= 2".into()));
        }
        if self.appearance.lambda <= 0.0 {
            return Err(Error::Param("lambda must be positive".into()));
        }
        Ok(())
    }
}

/// Which stage decides the final boundary inliers the hull is fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    /// Full fusion of geometric and appearance evidence.
    Fusion,
    /// Geometric scores only.
    MadOnly,
    /// Appearance outlier probabilities only.
    LoopOnly,
    /// Ellipse-consensus baseline.
    RansacEllipse,
}

impl SelectionMethod {
    pub fn name(self) -> &'static str {
        match self {
            SelectionMethod::Fusion => "CRF fusion",
            SelectionMethod::MadOnly => "Geometric MAD",
            SelectionMethod::LoopOnly => "Appearance LoOP",
            SelectionMethod::RansacEllipse => "RANSAC ellipse",
        }
    }

    fn needs_appearance(self) -> bool {
        matches!(self, SelectionMethod::Fusion | SelectionMethod::LoopOnly)
    }
}

/// Intermediate products of one slice, kept for stage dumps and overlays.
#[derive(Debug, Clone)]
pub struct SliceArtifacts {
    pub fat_mask: crate::BinarySlice,
    /// Candidates with all annotations the run produced.
    pub candidates: Candidates,
    pub embedding: Option<Embedding2D<Real>>,
    pub edges: Vec<EdgeSpec<Real>>,
    pub hull: Option<HullPolygon<Real>>,
    /// True when the fusion path had no usable hull and fell back to
    /// labeling every fat pixel SAT.
    pub degenerate_hull: bool,
}

/// Per-slice labels for each requested method plus shared artifacts.
pub struct SliceOutcome {
    pub per_method: Vec<Grid2<MaskLabel>>,
    pub artifacts: SliceArtifacts,
}

fn empty_artifacts(mask: crate::BinarySlice, degenerate: bool) -> SliceArtifacts {
    SliceArtifacts {
        fat_mask: mask,
        candidates: Candidates::default(),
        embedding: None,
        edges: Vec::new(),
        hull: None,
        degenerate_hull: degenerate,
    }
}

/// Run the per-slice pipeline once and derive one label grid per requested
/// method. Shared stages (mask, rays, scores) are computed a single time.
pub fn segment_slice_methods(
    slice: &IntensitySlice,
    cfg: &PipelineConfig,
    seed: u64,
    methods: &[SelectionMethod],
) -> Result<SliceOutcome> {
    let mask = fat_mask(slice, &cfg.preprocess).map_err(|e| e.at_stage(0, "preprocess"))?;

    // no fat at all: everything stays background
    if mask.count_true() == 0 {
        let bg = Grid2::filled(slice.width(), slice.height(), MaskLabel::Background);
        return Ok(SliceOutcome {
            per_method: vec![bg; methods.len()],
            artifacts: empty_artifacts(mask, false),
        });
    }

    let fail_soft = |mask: crate::BinarySlice| -> SliceOutcome {
        let sat = all_fat_sat(&mask);
        SliceOutcome {
            per_method: vec![sat; methods.len()],
            artifacts: empty_artifacts(mask, true),
        }
    };

    let contour = match extract_skin_contour(&mask) {
        Ok(c) => c,
        Err(Error::NoSubject) | Err(Error::DegenerateContour(_)) => return Ok(fail_soft(mask)),
        Err(e) => return Err(e),
    };
    let fan = match build_ray_fan::<Real>(&contour, cfg.n_rays, cfg.sample_step) {
        Ok(f) => f,
        Err(Error::DegenerateContour(_)) => return Ok(fail_soft(mask)),
        Err(e) => return Err(e),
    };
    let mut candidates = detect_transitions(&fan, &mask);
    if candidates.len() < 3 {
        return Ok(fail_soft(mask));
    }

    let mad = mad_scores(&candidates, cfg.mad_threshold).map_err(|e| e.at_stage(0, "mad"))?;
    annotate_geo_scores(&mut candidates, &mad)?;

    let needs_app = methods.iter().any(|m| m.needs_appearance());
    let app_artifacts = if needs_app {
        Some(
            score_candidates(&mut candidates, slice, &cfg.appearance, seed)
                .map_err(|e| e.at_stage(0, "appearance"))?,
        )
    } else {
        None
    };

    let positions: Vec<(Real, Real)> = candidates.candidates.iter().map(|c| c.position).collect();

    let mut fusion_edges: Vec<EdgeSpec<Real>> = Vec::new();
    let mut fusion_hull: Option<HullPolygon<Real>> = None;
    let mut fusion_degenerate = false;

    let mut per_method = Vec::with_capacity(methods.len());
    for &method in methods {
        let keep: Vec<bool> = match method {
            SelectionMethod::MadOnly => mad.inlier.clone(),
            SelectionMethod::LoopOnly => candidates
                .candidates
                .iter()
                .map(|c| c.app_score.unwrap_or(0.0) < cfg.loop_threshold)
                .collect(),
            SelectionMethod::RansacEllipse => {
                if positions.len() < 5 {
                    vec![true; positions.len()]
                } else {
                    ransac_ellipse_inliers(
                        &positions,
                        cfg.ransac_tolerance,
                        cfg.ransac_iterations,
                        seed,
                    )
                    .map_err(|e| e.at_stage(0, "ransac"))?
                }
            }
            SelectionMethod::Fusion => {
                let unary =
                    unary_potentials(&candidates, seed).map_err(|e| e.at_stage(0, "fusion"))?;
                let descriptors = &app_artifacts
                    .as_ref()
                    .expect("fusion requires appearance artifacts")
                    .descriptors;
                let feats = fusion_features(&candidates, descriptors)?;
                let edges = build_edges(&feats, cfg.crf_knn);
                let graph = FusionGraph {
                    unary,
                    edges: edges.clone(),
                    pairwise_weight: cfg.crf_weight,
                };
                let labeling = minimize_energy(&graph).map_err(|e| e.at_stage(0, "fusion"))?;
                for (cand, &label) in candidates
                    .candidates
                    .iter_mut()
                    .zip(labeling.labels.iter())
                {
                    cand.label = Some(label);
                }
                fusion_edges = edges;
                labeling
                    .labels
                    .iter()
                    .map(|&l| l == FusionLabel::Boundary)
                    .collect()
            }
        };

        let kept: Vec<(Real, Real)> = positions
            .iter()
            .zip(keep.iter())
            .filter(|(_, &k)| k)
            .map(|(&p, _)| p)
            .collect();
        let labels = match convex_hull(&kept) {
            Ok(hull) => {
                let grid = partition_slice(&mask, &hull);
                if method == SelectionMethod::Fusion {
                    fusion_hull = Some(hull);
                }
                grid
            }
            Err(Error::DegenerateHull(_)) => {
                if method == SelectionMethod::Fusion {
                    fusion_degenerate = true;
                }
                all_fat_sat(&mask)
            }
            Err(e) => return Err(e),
        };
        per_method.push(labels);
    }

    Ok(SliceOutcome {
        per_method,
        artifacts: SliceArtifacts {
            fat_mask: mask,
            candidates,
            embedding: app_artifacts.and_then(|a| a.embedding),
            edges: fusion_edges,
            hull: fusion_hull,
            degenerate_hull: fusion_degenerate,
        },
    })
}

/// Per-slice detail row of a segmentation report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SliceReport {
    pub z: usize,
    pub sat_area_mm2: f64,
    pub vat_area_mm2: f64,
    pub fat_area_mm2: f64,
    pub candidates: usize,
    pub degenerate_hull: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dice_sat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dice_vat: Option<f64>,
}

/// Deterministic segmentation report (no timing data; timings are reported
/// separately so identical inputs give identical report bytes).
#[derive(Debug, Clone, serde::Serialize)]
pub struct SegmentReport {
    pub sat_ml: f64,
    pub vat_ml: f64,
    pub total_fat_ml: f64,
    pub slices: Vec<SliceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dice_sat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dice_vat: Option<f64>,
    pub params: PipelineConfig,
}

/// Wall-clock timings, reported next to (never inside) the deterministic
/// report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Timings {
    pub per_slice_ms: Vec<f64>,
    pub total_ms: f64,
}

pub struct SegmentOutput {
    pub mask: MaskGrid,
    pub report: SegmentReport,
    pub timings: Timings,
    pub artifacts: Vec<SliceArtifacts>,
}

fn with_pool<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if workers == 0 {
        Ok(f())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Param(format!("cannot build worker pool: {e}")))?;
        Ok(pool.install(f))
    }
}

/// Segment a whole volume with the fusion pipeline. Slices run on the worker
/// pool and are merged by index, so the output is identical for any worker
/// count. `truth` adds Dice scores to the report.
pub fn run_segment(
    vol: &VolumeGrid,
    cfg: &PipelineConfig,
    truth: Option<&MaskGrid>,
) -> Result<SegmentOutput> {
    cfg.validate()?;
    if let Some(t) = truth {
        if t.dims() != vol.dims() {
            return Err(Error::Misaligned("truth dims do not match volume".into()));
        }
    }
    let started = std::time::Instant::now();
    let (nx, ny, nz) = vol.dims();
    let outcomes = with_pool(cfg.workers, || {
        (0..nz)
            .into_par_iter()
            .map(|z| {
                let t0 = std::time::Instant::now();
                let slice = vol.extract_slice(z)?;
                let out = segment_slice_methods(
                    &slice,
                    cfg,
                    cfg.seed.wrapping_add(z as u64),
                    &[SelectionMethod::Fusion],
                )
                .map_err(|e| match e {
                    Error::Stage { stage, source, .. } => Error::Stage {
                        slice: z,
                        stage,
                        source,
                    },
                    other => other.at_stage(z, "pipeline"),
                })?;
                Ok((out, t0.elapsed().as_secs_f64() * 1e3))
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut mask = MaskGrid::background((nx, ny, nz), vol.spacing())?;
    let mut artifacts = Vec::with_capacity(nz);
    let mut per_slice_ms = Vec::with_capacity(nz);
    for (z, (mut outcome, ms)) in outcomes.into_iter().enumerate() {
        mask.set_slice(z, &outcome.per_method[0])?;
        artifacts.push(outcome.per_method.pop().map(|_| outcome.artifacts).unwrap());
        per_slice_ms.push(ms);
    }

    let quant = quantify(&mask);
    let plane = nx * ny;
    let slices = quant
        .slices
        .iter()
        .map(|s| {
            let (dice_sat, dice_vat) = match truth {
                Some(t) => {
                    let range = s.z * plane..(s.z + 1) * plane;
                    (
                        Some(dice_labels(
                            &mask.data()[range.clone()],
                            &t.data()[range.clone()],
                            MaskLabel::Sat,
                        )),
                        Some(dice_labels(
                            &mask.data()[range.clone()],
                            &t.data()[range],
                            MaskLabel::Vat,
                        )),
                    )
                }
                None => (None, None),
            };
            SliceReport {
                z: s.z,
                sat_area_mm2: s.sat_area_mm2,
                vat_area_mm2: s.vat_area_mm2,
                fat_area_mm2: s.fat_area_mm2,
                candidates: artifacts[s.z].candidates.len(),
                degenerate_hull: artifacts[s.z].degenerate_hull,
                dice_sat,
                dice_vat,
            }
        })
        .collect();

    let report = SegmentReport {
        sat_ml: quant.sat_ml,
        vat_ml: quant.vat_ml,
        total_fat_ml: quant.total_fat_ml,
        slices,
        dice_sat: truth.map(|t| dice_labels(mask.data(), t.data(), MaskLabel::Sat)),
        dice_vat: truth.map(|t| dice_labels(mask.data(), t.data(), MaskLabel::Vat)),
        params: cfg.clone(),
    };
    Ok(SegmentOutput {
        mask,
        report,
        timings: Timings {
            per_slice_ms,
            total_ms: started.elapsed().as_secs_f64() * 1e3,
        },
        artifacts,
    })
}

/// Segment a volume once per selection method, sharing the per-slice stages.
/// Returns one mask per method, aligned with `methods`.
pub fn run_methods(
    vol: &VolumeGrid,
    cfg: &PipelineConfig,
    methods: &[SelectionMethod],
) -> Result<Vec<MaskGrid>> {
    cfg.validate()?;
    let (nx, ny, nz) = vol.dims();
    let outcomes = with_pool(cfg.workers, || {
        (0..nz)
            .into_par_iter()
            .map(|z| {
                let slice = vol.extract_slice(z)?;
                segment_slice_methods(&slice, cfg, cfg.seed.wrapping_add(z as u64), methods)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut out = Vec::with_capacity(methods.len());
    for (m, _) in methods.iter().enumerate() {
        let mut mask = MaskGrid::background((nx, ny, nz), vol.spacing())?;
        for (z, outcome) in outcomes.iter().enumerate() {
            mask.set_slice(z, &outcome.per_method[m])?;
        }
        out.push(mask);
    }
    Ok(out)
}
