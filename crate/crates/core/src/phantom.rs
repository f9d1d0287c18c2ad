//! Synthetic abdominal slices with exact SAT/VAT ground truth: an elliptical
//! body with a subcutaneous fat ring, a thin (optionally gapped) muscle wall,
//! and visceral fat blobs in an organ-intensity cavity.

use crate::error::{Error, Result};
use crate::volume::{MaskGrid, MaskLabel, VolumeGrid, VoxelSpacing};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhantomParams {
    pub width: usize,
    pub height: usize,
    pub slices: usize,
    pub spacing: VoxelSpacing,
    /// Skin ellipse semi-axes in pixels.
    pub skin_a: f64,
    pub skin_b: f64,
    /// Subcutaneous fat ring thickness in pixels.
    pub sat_thickness: f64,
    /// Muscle wall thickness in pixels.
    pub wall_thickness: f64,
    /// Number of angular gaps in the muscle wall.
    pub gap_count: usize,
    /// Angular width of each gap, degrees.
    pub gap_width_deg: f64,
    /// Visceral fat blobs inside the cavity.
    pub blob_count: usize,
    /// Mean blob radius in pixels (individual radii vary around it).
    pub blob_radius: f64,
    pub hu_air: f64,
    pub hu_fat: f64,
    pub hu_muscle: f64,
    pub hu_organ: f64,
    /// Gaussian intensity noise, HU.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PhantomParams {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            slices: 1,
            spacing: VoxelSpacing::new(1.17, 1.17, 5.0).unwrap(),
            skin_a: 100.0,
            skin_b: 85.0,
            sat_thickness: 22.0,
            wall_thickness: 5.0,
            gap_count: 3,
            gap_width_deg: 25.0,
            blob_count: 5,
            blob_radius: 12.0,
            hu_air: -1000.0,
            hu_fat: -100.0,
            hu_muscle: 40.0,
            hu_organ: 50.0,
            noise_sigma: 15.0,
            seed: 42,
        }
    }
}

impl PhantomParams {
    pub fn validate(&self) -> Result<()> {
        if self.sat_thickness <= 0.0 || self.wall_thickness <= 0.0 {
            return Err(Error::Param("thicknesses must be positive".into()));
        }
        // HU ordering: air < fat < fat-window high edge < muscle
        if !(self.hu_air < self.hu_fat && self.hu_fat < -30.0 && -30.0 < self.hu_muscle) {
            return Err(Error::Param(
                "HU means must satisfy air < fat < -30 < muscle".into(),
            ));
        }
        let margin = 4.0;
        if self.skin_a + margin >= self.width as f64 / 2.0
            || self.skin_b + margin >= self.height as f64 / 2.0
        {
            return Err(Error::Param(format!(
                "skin ellipse ({}, {}) does not fit a {}x{} grid",
                self.skin_a, self.skin_b, self.width, self.height
            )));
        }
        let cavity = self.skin_a.min(self.skin_b) - self.sat_thickness - self.wall_thickness;
        if cavity < 8.0 {
            return Err(Error::Param(
                "cavity too small: reduce ring/wall thickness".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Blob {
    x: f64,
    y: f64,
    r: f64,
}

/// Radius of the ellipse with semi-axes (a, b) along direction `theta`.
fn ellipse_radius(a: f64, b: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    a * b / ((b * c).powi(2) + (a * s).powi(2)).sqrt()
}

fn inside(a: f64, b: f64, dx: f64, dy: f64) -> bool {
    (dx / a).powi(2) + (dy / b).powi(2) <= 1.0
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Rasterize the phantom: returns the noisy volume and its exact truth mask.
/// Wall-gap fat is split by the wall centerline: outside it is SAT, inside it
/// is VAT. With zero noise the fat-labeled truth pixels are exactly the
/// pixels whose intensity equals the fat mean.
pub fn generate(params: &PhantomParams) -> Result<(VolumeGrid, MaskGrid)> {
    params.validate()?;
    let (w, h, nz) = (params.width, params.height, params.slices);
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);

    let sat_a = params.skin_a - params.sat_thickness;
    let sat_b = params.skin_b - params.sat_thickness;
    let wall_a = sat_a - params.wall_thickness;
    let wall_b = sat_b - params.wall_thickness;
    let mid_a = sat_a - params.wall_thickness / 2.0;
    let mid_b = sat_b - params.wall_thickness / 2.0;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    // gap sectors: evenly spaced with seeded jitter
    let gap_half = params.gap_width_deg.to_radians() / 2.0;
    let gaps: Vec<f64> = (0..params.gap_count)
        .map(|g| {
            let base = std::f64::consts::TAU * g as f64 / params.gap_count.max(1) as f64;
            let jitter_span =
                (std::f64::consts::TAU / params.gap_count.max(1) as f64 - 2.0 * gap_half).max(0.0);
            base + rng.random_range(-0.5..0.5) * jitter_span * 0.5
        })
        .collect();
    let in_gap = |theta: f64| -> bool {
        gaps.iter().any(|&g| {
            let mut d = (theta - g).rem_euclid(std::f64::consts::TAU);
            if d > std::f64::consts::PI {
                d -= std::f64::consts::TAU;
            }
            d.abs() <= gap_half
        })
    };

    // visceral blobs: even indices hug the wall (they often touch the gaps),
    // odd ones sit deeper in the cavity
    let mut blobs: Vec<Blob> = Vec::with_capacity(params.blob_count);
    for b in 0..params.blob_count {
        let r = (params.blob_radius * rng.random_range(0.6..1.4)).max(3.0);
        let theta = if b % 2 == 0 && !gaps.is_empty() {
            // aim near a gap so connected fat bridges appear
            gaps[b / 2 % gaps.len()] + rng.random_range(-0.3..0.3)
        } else {
            rng.random_range(0.0..std::f64::consts::TAU)
        };
        let wall_r = ellipse_radius(wall_a, wall_b, theta);
        let dist = if b % 2 == 0 {
            (wall_r - r - rng.random_range(0.0..4.0)).max(r + 4.0)
        } else {
            rng.random_range(0.15..0.55) * wall_r
        };
        let dist = dist.min(wall_r - r - 1.0).max(0.0);
        blobs.push(Blob {
            x: dist * theta.cos(),
            y: dist * theta.sin(),
            r,
        });
    }

    let plane = w * h;
    let mut volume = vec![0i16; plane * nz];
    let mut truth = vec![MaskLabel::Background; plane * nz];

    // clean geometry of one slice (identical across slices)
    let mut clean = vec![0.0f64; plane];
    let mut labels = vec![MaskLabel::Background; plane];
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let idx = y * w + x;
            if !inside(params.skin_a, params.skin_b, dx, dy) {
                clean[idx] = params.hu_air;
                continue;
            }
            if !inside(sat_a, sat_b, dx, dy) {
                clean[idx] = params.hu_fat;
                labels[idx] = MaskLabel::Sat;
                continue;
            }
            if !inside(wall_a, wall_b, dx, dy) {
                let theta = dy.atan2(dx);
                if in_gap(theta) {
                    clean[idx] = params.hu_fat;
                    labels[idx] = if inside(mid_a, mid_b, dx, dy) {
                        MaskLabel::Vat
                    } else {
                        MaskLabel::Sat
                    };
                } else {
                    clean[idx] = params.hu_muscle;
                }
                continue;
            }
            let in_blob = blobs
                .iter()
                .any(|b| (dx - b.x).powi(2) + (dy - b.y).powi(2) <= b.r * b.r);
            if in_blob {
                clean[idx] = params.hu_fat;
                labels[idx] = MaskLabel::Vat;
            } else {
                clean[idx] = params.hu_organ;
            }
        }
    }

    for z in 0..nz {
        for i in 0..plane {
            let noisy = clean[i]
                + if params.noise_sigma > 0.0 {
                    params.noise_sigma * gaussian(&mut rng)
                } else {
                    0.0
                };
            volume[z * plane + i] = noisy.round().clamp(-32768.0, 32767.0) as i16;
            truth[z * plane + i] = labels[i];
        }
    }

    Ok((
        VolumeGrid::new((w, h, nz), params.spacing, volume)?,
        MaskGrid::new((w, h, nz), params.spacing, truth)?,
    ))
}

/// The fixed 20-phantom battery: SAT ring thickness sweeps 5..40 px, wall
/// gaps 0..6, eccentricity 1.0..1.6, with seeded per-phantom geometry.
pub fn suite(seed: u64) -> Vec<PhantomParams> {
    (0..20)
        .map(|i| {
            let frac = i as f64 / 19.0;
            let ecc = 1.0 + 0.6 * ((i * 7) % 20) as f64 / 19.0;
            let skin_a = 96.0 + 10.0 * (((i * 3) % 20) as f64 / 19.0);
            PhantomParams {
                sat_thickness: 5.0 + 35.0 * frac,
                skin_a,
                skin_b: (skin_a / ecc).max(58.0),
                wall_thickness: 4.0 + ((i % 3) as f64),
                gap_count: i % 7,
                gap_width_deg: 12.0 + 28.0 * (((i * 11) % 20) as f64 / 19.0),
                blob_count: 4 + i % 4,
                blob_radius: 9.0 + ((i * 5) % 9) as f64,
                slices: 3,
                seed: seed.wrapping_add(i as u64),
                ..PhantomParams::default()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_volume() {
        let p = PhantomParams::default();
        let (v1, t1) = generate(&p).unwrap();
        let (v2, t2) = generate(&p).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn clean_truth_matches_fat_intensity_exactly() {
        let p = PhantomParams {
            noise_sigma: 0.0,
            ..PhantomParams::default()
        };
        let (vol, truth) = generate(&p).unwrap();
        for (v, t) in vol.data().iter().zip(truth.data().iter()) {
            let is_fat_hu = *v == p.hu_fat as i16;
            let is_fat_label = matches!(t, MaskLabel::Sat | MaskLabel::Vat);
            assert_eq!(is_fat_hu, is_fat_label);
        }
    }

    #[test]
    fn no_gaps_no_blobs_means_vat_empty() {
        let p = PhantomParams {
            noise_sigma: 0.0,
            gap_count: 0,
            blob_count: 0,
            ..PhantomParams::default()
        };
        let (_, truth) = generate(&p).unwrap();
        assert_eq!(truth.count(MaskLabel::Vat), 0);
        assert!(truth.count(MaskLabel::Sat) > 0);
    }

    #[test]
    fn geometry_that_does_not_fit_is_rejected()  {
        let p = PhantomParams {
            skin_a: 130.0,
            ..PhantomParams::default()
        };
        assert!(generate(&p).is_err());
        let q = PhantomParams {
            sat_thickness: 70.0,
            wall_thickness: 20.0,
            ..PhantomParams::default()
        };
        assert!(generate(&q).is_err());
    }

    #[test]
    fn histogram_modes_near_configured_means() {
        let p = PhantomParams {
            noise_sigma: 10.0,
            ..PhantomParams::default()
        };
        let (vol, _) = generate(&p).unwrap();
        // count voxels within one sigma of each configured mean
        for (mean, min_frac) in [(p.hu_air, 0.2), (p.hu_fat, 0.1)] {
            let close = vol
                .data()
                .iter()
                .filter(|&&v| (v as f64 - mean).abs() <= p.noise_sigma)
                .count();
            let frac = close as f64 / vol.data().len() as f64;
            assert!(frac > min_frac, "mode at {mean}: fraction {frac}");
        }
    }

    #[test]
    fn suite_is_deterministic_and_covers_range() {
        let a = suite(42);
        let b = suite(42);
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        let thick_min = a
            .iter()
            .map(|p| p.sat_thickness)
            .fold(f64::INFINITY, f64::min);
        let thick_max = a
            .iter()
            .map(|p| p.sat_thickness)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(thick_min <= 5.0 + 1e-9 && thick_max >= 40.0 - 1e-9);
        assert!(a.iter().any(|p| p.gap_count == 0));
        assert!(a.iter().any(|p| p.gap_count == 6));
        let ecc_max = a
            .iter()
            .map(|p| p.skin_a / p.skin_b)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(ecc_max > 1.5);
        for p in &a {
            let (_, truth) = generate(p).expect("battery phantom generates");
            assert_eq!(truth.dims(), (p.width, p.height, p.slices));
        }
    }
}
