//! Oriented-gradient appearance descriptor sampled around a boundary
//! candidate.
//!
//! Construction, pinned for bit-exact determinism: a 32x32 patch (edge
//! replication past the slice border), central-difference gradients on the
//! raw intensities, and a 3x3 grid of 14x14 cells at 9-pixel stride (5-pixel
//! overlap). Per cell: 18 signed + 9 unsigned orientation projections and 4
//! block-energy sums in the reduced-HOG style, truncated at 0.2 against the
//! four 2x2 neighborhood energies, then the 31-vector is scaled to unit L2
//! norm. 9 cells x 31 = 279 values.

use crate::scalar::Scalar;
use crate::IntensitySlice;

pub const PATCH: usize = 32;
pub const CELL: usize = 14;
pub const STRIDE: usize = 9;
pub const CELLS_PER_SIDE: usize = 3;
pub const SIGNED_BINS: usize = 18;
pub const UNSIGNED_BINS: usize = 9;
pub const CELL_DIM: usize = SIGNED_BINS + UNSIGNED_BINS + 4;
pub const DESCRIPTOR_DIM: usize = CELLS_PER_SIDE * CELLS_PER_SIDE * CELL_DIM;

const TRUNCATION: f64 = 0.2;
// energy-feature weight from the reduced-HOG construction
const ENERGY_WEIGHT: f64 = 0.2357;

/// 279-dimensional appearance descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct HogDescriptor<T> {
    pub values: Vec<T>,
}

/// Compute the descriptor for the patch centered at `center` (rounded to the
/// nearest pixel). A constant patch has no gradient energy and yields the
/// all-zero descriptor.
pub fn hog_at<T: Scalar>(slice: &IntensitySlice, center: (T, T)) -> HogDescriptor<T> {
    let cx = center.0.round().to_f64().unwrap_or(0.0) as i64;
    let cy = center.1.round().to_f64().unwrap_or(0.0) as i64;
    let x0 = cx - (PATCH as i64) / 2;
    let y0 = cy - (PATCH as i64) / 2;

    // gradient magnitude and signed orientation bin per patch pixel
    let mut mag = [0.0f64; PATCH * PATCH];
    let mut bin = [0usize; PATCH * PATCH];
    for py in 0..PATCH {
        for px in 0..PATCH {
            let (sx, sy) = (x0 + px as i64, y0 + py as i64);
            let gx = (slice.get_clamped(sx + 1, sy) as f64 - slice.get_clamped(sx - 1, sy) as f64)
                * 0.5;
            let gy = (slice.get_clamped(sx, sy + 1) as f64 - slice.get_clamped(sx, sy - 1) as f64)
                * 0.5;
            let m = (gx * gx + gy * gy).sqrt();
            let mut theta = gy.atan2(gx);
            if theta < 0.0 {
                theta += std::f64::consts::TAU;
            }
            let b = ((theta / std::f64::consts::TAU) * SIGNED_BINS as f64) as usize;
            let idx = py * PATCH + px;
            mag[idx] = m;
            bin[idx] = b.min(SIGNED_BINS - 1);
        }
    }

    // per-cell signed histograms (cells overlap, pixels count in each)
    let ncells = CELLS_PER_SIDE * CELLS_PER_SIDE;
    let mut hist = vec![[0.0f64; SIGNED_BINS]; ncells];
    for cj in 0..CELLS_PER_SIDE {
        for ci in 0..CELLS_PER_SIDE {
            let h = &mut hist[cj * CELLS_PER_SIDE + ci];
            for py in cj * STRIDE..cj * STRIDE + CELL {
                for px in ci * STRIDE..ci * STRIDE + CELL {
                    let idx = py * PATCH + px;
                    h[bin[idx]] += mag[idx];
                }
            }
        }
    }

    // unsigned fold and cell energies
    let mut unsigned = vec![[0.0f64; UNSIGNED_BINS]; ncells];
    let mut energy = vec![0.0f64; ncells];
    for c in 0..ncells {
        for b in 0..UNSIGNED_BINS {
            unsigned[c][b] = hist[c][b] + hist[c][b + UNSIGNED_BINS];
        }
        energy[c] = unsigned[c].iter().map(|v| v * v).sum();
    }

    let clamp_cell = |i: i64, j: i64| -> usize {
        let ci = i.clamp(0, CELLS_PER_SIDE as i64 - 1) as usize;
        let cj = j.clamp(0, CELLS_PER_SIDE as i64 - 1) as usize;
        cj * CELLS_PER_SIDE + ci
    };

    let mut values = vec![0.0f64; DESCRIPTOR_DIM];
    for cj in 0..CELLS_PER_SIDE as i64 {
        for ci in 0..CELLS_PER_SIDE as i64 {
            let c = (cj as usize) * CELLS_PER_SIDE + ci as usize;
            // block energies of the four diagonal 2x2 neighborhoods, with
            // neighbor cells clamped at the grid edge
            let mut norms = [0.0f64; 4];
            for (k, (di, dj)) in [(-1i64, -1i64), (-1, 1), (1, -1), (1, 1)].iter().enumerate() {
                let e = energy[clamp_cell(ci, cj)]
                    + energy[clamp_cell(ci + di, cj)]
                    + energy[clamp_cell(ci, cj + dj)]
                    + energy[clamp_cell(ci + di, cj + dj)];
                norms[k] = (e + 1e-12).sqrt();
            }

            let cell_off = c * CELL_DIM;
            for b in 0..SIGNED_BINS {
                let mut acc = 0.0;
                for &nrm in &norms {
                    acc += (hist[c][b] / nrm).min(TRUNCATION);
                }
                values[cell_off + b] = 0.5 * acc;
            }
            for b in 0..UNSIGNED_BINS {
                let mut acc = 0.0;
                for &nrm in &norms {
                    acc += (unsigned[c][b] / nrm).min(TRUNCATION);
                }
                values[cell_off + SIGNED_BINS + b] = 0.5 * acc;
            }
            for (k, &nrm) in norms.iter().enumerate() {
                let mut acc = 0.0;
                for b in 0..SIGNED_BINS {
                    acc += (hist[c][b] / nrm).min(TRUNCATION);
                }
                values[cell_off + SIGNED_BINS + UNSIGNED_BINS + k] = ENERGY_WEIGHT * acc;
            }

            // unit-norm the cell block (zero cells stay zero)
            let norm: f64 = values[cell_off..cell_off + CELL_DIM]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            if norm > 1e-12 {
                for v in &mut values[cell_off..cell_off + CELL_DIM] {
                    *v /= norm;
                }
            }
        }
    }

    HogDescriptor {
        values: values.into_iter().map(T::from_f64_).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2;

    fn slice_from_fn(w: usize, h: usize, f: impl Fn(usize, usize) -> i16) -> IntensitySlice {
        let mut g = Grid2::filled(w, h, 0i16);
        for y in 0..h {
            for x in 0..w {
                g.set(x, y, f(x, y));
            }
        }
        g
    }

    #[test]
    fn descriptor_has_pinned_length() {
        assert_eq!(DESCRIPTOR_DIM, 279);
        let s = slice_from_fn(64, 64, |x, y| ((x * 7 + y * 13) % 200) as i16 - 100);
        let d: HogDescriptor<f64> = hog_at(&s, (32.0, 32.0));
        assert_eq!(d.values.len(), 279);
        assert!(d.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn constant_patch_gives_zero_descriptor() {
        let s = slice_from_fn(64, 64, |_, _| -100);
        let d: HogDescriptor<f64> = hog_at(&s, (32.0, 32.0));
        assert!(d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cell_blocks_have_unit_or_zero_norm() {
        let s = slice_from_fn(64, 64, |x, y| ((x * 3 + y * y) % 400) as i16 - 200);
        let d: HogDescriptor<f64> = hog_at(&s, (30.0, 28.0));
        for c in 0..9 {
            let blk = &d.values[c * CELL_DIM..(c + 1) * CELL_DIM];
            let norm: f64 = blk.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= 1.0 + 1e-9, "cell {c} norm {norm}");
            assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn vertical_step_edge_peaks_in_horizontal_gradient_bin() {
        // intensity jumps along x: gradient points in +x, orientation bin 0
        let s = slice_from_fn(32, 32, |x, _| if x < 16 { -150 } else { 50 });
        let d: HogDescriptor<f64> = hog_at(&s, (16.0, 16.0));
        let (argmax, _) = d
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let within_cell = argmax % CELL_DIM;
        assert!(
            within_cell == 0 || within_cell == SIGNED_BINS,
            "max at cell offset {within_cell}, expected orientation bin 0"
        );
    }

    #[test]
    fn unsigned_histograms_match_under_half_turn() {
        let s = slice_from_fn(32, 32, |x, y| {
            (((x as f64 * 0.7).sin() * 80.0 + (y as f64 * 0.45).cos() * 60.0) as i16).saturating_add(
                ((x * y) % 37) as i16,
            )
        });
        let rot = slice_from_fn(32, 32, |x, y| s.get(31 - x, 31 - y));
        let d: HogDescriptor<f64> = hog_at(&s, (16.0, 16.0));
        let dr: HogDescriptor<f64> = hog_at(&rot, (16.0, 16.0));
        // cell (i, j) maps to cell (2-i, 2-j)
        for cj in 0..3 {
            for ci in 0..3 {
                let a = (cj * 3 + ci) * CELL_DIM + SIGNED_BINS;
                let b = ((2 - cj) * 3 + (2 - ci)) * CELL_DIM + SIGNED_BINS;
                for k in 0..UNSIGNED_BINS {
                    let (va, vb) = (d.values[a + k], dr.values[b + k]);
                    assert!(
                        (va - vb).abs() < 1e-9,
                        "cell ({ci},{cj}) bin {k}: {va} vs {vb}"
                    );
                }
            }
        }
    }

    #[test]
    fn identical_patch_identical_descriptor() {
        let s = slice_from_fn(64, 64, |x, y| ((x * 11 + y * 5) % 300) as i16 - 120);
        let a: HogDescriptor<f64> = hog_at(&s, (25.0, 33.0));
        let b: HogDescriptor<f64> = hog_at(&s, (25.0, 33.0));
        assert_eq!(a, b);
    }

    #[test]
    fn border_centers_use_edge_replication() {
        let s = slice_from_fn(40, 40, |x, y| ((x + y) % 90) as i16);
        let d: HogDescriptor<f64> = hog_at(&s, (1.0, 1.0));
        assert_eq!(d.values.len(), 279);
        assert!(d.values.iter().all(|v| v.is_finite()));
    }
}
