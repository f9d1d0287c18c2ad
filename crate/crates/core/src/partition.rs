//! Fused boundary points to SAT/VAT masks: convex hull of the kept boundary,
//! VAT inside, SAT outside, volumes in milliliters.

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::scalar::Scalar;
use crate::volume::{MaskGrid, MaskLabel};
use crate::BinarySlice;

/// Tolerance for the on-boundary test of the hull.
pub const HULL_BOUNDARY_TOL: f64 = 1e-9;

/// Convex polygon, vertices in counterclockwise order, no three collinear.
#[derive(Debug, Clone, PartialEq)]
pub struct HullPolygon<T> {
    pub vertices: Vec<(T, T)>,
}

fn cross<T: Scalar>(o: (T, T), a: (T, T), b: (T, T)) -> T {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Monotone-chain convex hull. Collinear points along an edge are dropped.
/// Fewer than 3 points, or an all-collinear set, is a degenerate hull.
pub fn convex_hull<T: Scalar>(points: &[(T, T)]) -> Result<HullPolygon<T>> {
    if points.len() < 3 {
        return Err(Error::DegenerateHull(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    if pts.len() < 3 {
        return Err(Error::DegenerateHull("fewer than 3 distinct points".into()));
    }

    let mut lower: Vec<(T, T)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2
            && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= T::zero()
        {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(T, T)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2
            && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= T::zero()
        {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(Error::DegenerateHull("all points collinear".into()));
    }
    Ok(HullPolygon { vertices: lower })
}

impl<T: Scalar> HullPolygon<T> {
    /// True when `p` lies inside or on the hull (within [`HULL_BOUNDARY_TOL`]).
    pub fn contains(&self, p: (T, T)) -> bool {
        let tol = T::from_f64_(HULL_BOUNDARY_TOL);
        let n = self.vertices.len();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if cross(a, b, p) < -tol {
                return false;
            }
        }
        true
    }

    pub fn area(&self) -> T {
        let n = self.vertices.len();
        let mut acc = T::zero();
        for i in 0..n {
            let (x0, y0) = self.vertices[i];
            let (x1, y1) = self.vertices[(i + 1) % n];
            acc = acc + x0 * y1 - x1 * y0;
        }
        (acc / T::from_f64_(2.0)).abs()
    }
}

/// Label the fat pixels of one slice: inside-or-on the hull is VAT, outside
/// is SAT; non-fat pixels stay background.
pub fn partition_slice<T: Scalar>(
    fat_mask: &BinarySlice,
    hull: &HullPolygon<T>,
) -> Grid2<MaskLabel> {
    let mut out = Grid2::filled(fat_mask.width(), fat_mask.height(), MaskLabel::Background);
    for y in 0..fat_mask.height() {
        for x in 0..fat_mask.width() {
            if !fat_mask.get(x, y) {
                continue;
            }
            let p = (T::from_usize_(x), T::from_usize_(y));
            out.set(
                x,
                y,
                if hull.contains(p) {
                    MaskLabel::Vat
                } else {
                    MaskLabel::Sat
                },
            );
        }
    }
    out
}

/// Fallback when no hull exists: every fat pixel is SAT.
pub fn all_fat_sat(fat_mask: &BinarySlice) -> Grid2<MaskLabel> {
    fat_mask.map(|b| if b { MaskLabel::Sat } else { MaskLabel::Background })
}

/// Per-slice label areas in square millimeters.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SliceQuant {
    pub z: usize,
    pub sat_area_mm2: f64,
    pub vat_area_mm2: f64,
    pub fat_area_mm2: f64,
}

/// Volumes in milliliters with their per-slice breakdown.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct QuantReport {
    pub sat_ml: f64,
    pub vat_ml: f64,
    /// All fat labels combined (SAT + VAT + undivided).
    pub total_fat_ml: f64,
    pub slices: Vec<SliceQuant>,
}

impl QuantReport {
    pub fn label_ml(&self, label: MaskLabel) -> f64 {
        match label {
            MaskLabel::Sat => self.sat_ml,
            MaskLabel::Vat => self.vat_ml,
            _ => self.total_fat_ml,
        }
    }
}

/// Count labels and convert to physical volume: `count * dx*dy*dz / 1000`.
pub fn quantify(mask: &MaskGrid) -> QuantReport {
    let spacing = mask.spacing();
    let voxel_mm3 = spacing.voxel_mm3();
    let pixel_mm2 = spacing.dx * spacing.dy;
    let (nx, ny, nz) = mask.dims();
    let plane = nx * ny;
    let mut slices = Vec::with_capacity(nz);
    let (mut sat, mut vat, mut undiv) = (0usize, 0usize, 0usize);
    for z in 0..nz {
        let (mut s, mut v, mut u) = (0usize, 0usize, 0usize);
        for &l in &mask.data()[z * plane..(z + 1) * plane] {
            match l {
                MaskLabel::Sat => s += 1,
                MaskLabel::Vat => v += 1,
                MaskLabel::FatUndivided => u += 1,
                MaskLabel::Background => {}
            }
        }
        slices.push(SliceQuant {
            z,
            sat_area_mm2: s as f64 * pixel_mm2,
            vat_area_mm2: v as f64 * pixel_mm2,
            fat_area_mm2: (s + v + u) as f64 * pixel_mm2,
        });
        sat += s;
        vat += v;
        undiv += u;
    }
    QuantReport {
        sat_ml: sat as f64 * voxel_mm3 / 1000.0,
        vat_ml: vat as f64 * voxel_mm3 / 1000.0,
        total_fat_ml: (sat + vat + undiv) as f64 * voxel_mm3 / 1000.0,
        slices,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::VoxelSpacing;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn square_hull_excludes_center() {
        let pts = vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)];
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.vertices.len(), 4);
        assert!(!hull.vertices.contains(&(0.5, 0.5)));
    }

    #[test]
    fn circle_points_all_on_hull() {
        let pts: Vec<(f64, f64)> = (0..24)
            .map(|i| {
                let a = i as f64 / 24.0 * std::f64::consts::TAU;
                (a.cos(), a.sin())
            })
            .collect();
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.vertices.len(), 24);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(convex_hull(&[(0.0, 0.0), (1.0, 1.0)]).is_err());
        let collinear: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 * i as f64)).collect();
        assert!(matches!(
            convex_hull(&collinear),
            Err(Error::DegenerateHull(_))
        ));
    }

    /// O(n^3) hull oracle: a point is a hull vertex iff some line through it
    /// keeps all other points strictly on one side (plus endpoints).
    fn oracle_hull_vertices(pts: &[(f64, f64)]) -> std::collections::BTreeSet<usize> {
        let n = pts.len();
        let mut on_hull = std::collections::BTreeSet::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                // edge i->j is a hull edge iff every other point is on the
                // left side (or on the segment)
                let mut ok = true;
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    let c = cross(pts[i], pts[j], pts[k]);
                    if c < 0.0 {
                        ok = false;
                        break;
                    }
                    if c == 0.0 {
                        // collinear: only accept if k is between i and j
                        let within = |a: f64, b: f64, x: f64| x >= a.min(b) && x <= a.max(b);
                        if !(within(pts[i].0, pts[j].0, pts[k].0)
                            && within(pts[i].1, pts[j].1, pts[k].1))
                        {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    on_hull.insert(i);
                    on_hull.insert(j);
                }
            }
        }
        on_hull
    }

    #[test]
    fn hull_matches_bruteforce_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let n = rng.random_range(4..30);
            let pts: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)))
                .collect();
            let hull = match convex_hull(&pts) {
                Ok(h) => h,
                Err(_) => continue,
            };
            let oracle = oracle_hull_vertices(&pts);
            let got: std::collections::BTreeSet<usize> = hull
                .vertices
                .iter()
                .map(|v| pts.iter().position(|p| p == v).unwrap())
                .collect();
            // the oracle includes collinear edge-interior points, the
            // monotone chain drops them; got must be a subset and every
            // strict corner must appear in both
            assert!(got.is_subset(&oracle), "hull {got:?} oracle {oracle:?}");
            for &v in &oracle {
                if !got.contains(&v) {
                    // must be collinear with some hull edge
                    let p = pts[v];
                    assert!(hull.contains(p));
                }
            }
        }
    }

    #[test]
    fn hull_vertices_turn_left_and_contain_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..20 {
            let n = rng.random_range(5..40);
            let pts: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0)))
                .collect();
            if let Ok(hull) = convex_hull(&pts) {
                let m = hull.vertices.len();
                for i in 0..m {
                    let c = cross(
                        hull.vertices[i],
                        hull.vertices[(i + 1) % m],
                        hull.vertices[(i + 2) % m],
                    );
                    assert!(c > 0.0, "non-convex corner");
                }
                for &p in &pts {
                    assert!(hull.contains(p), "input point outside hull");
                }
            }
        }
    }

    #[test]
    fn hull_area_dominates_any_input_triangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let pts: Vec<(f64, f64)> = (0..15)
            .map(|_| (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)))
            .collect();
        let hull = convex_hull(&pts).unwrap();
        let hull_area = hull.area();
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                for k in (j + 1)..pts.len() {
                    let t = cross(pts[i], pts[j], pts[k]).abs() / 2.0;
                    assert!(hull_area >= t - 1e-9);
                }
            }
        }
    }

    #[test]
    fn partition_conserves_fat_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let mut fat = Grid2::filled(30, 30, false);
        for _ in 0..200 {
            fat.set(rng.random_range(0..30), rng.random_range(0..30), true);
        }
        let hull = convex_hull(&[(5.0, 5.0), (25.0, 6.0), (20.0, 24.0), (6.0, 22.0)]).unwrap();
        let labels = partition_slice(&fat, &hull);
        let sat = labels.data().iter().filter(|&&l| l == MaskLabel::Sat).count();
        let vat = labels.data().iter().filter(|&&l| l == MaskLabel::Vat).count();
        assert_eq!(sat + vat, fat.count_true());
    }

    #[test]
    fn hull_covering_slice_marks_all_fat_vat() {
        let fat = Grid2::filled(10, 10, true);
        let hull =
            convex_hull(&[(-1.0, -1.0), (10.0, -1.0), (10.0, 10.0), (-1.0, 10.0)]).unwrap();
        let labels = partition_slice(&fat, &hull);
        assert!(labels.data().iter().all(|&l| l == MaskLabel::Vat));
    }

    #[test]
    fn degenerate_fallback_marks_all_fat_sat() {
        let mut fat = Grid2::filled(6, 6, false);
        fat.set(1, 1, true);
        fat.set(4, 2, true);
        let labels = all_fat_sat(&fat);
        assert_eq!(
            labels.data().iter().filter(|&&l| l == MaskLabel::Sat).count(),
            2
        );
        assert!(!labels.data().contains(&MaskLabel::Vat));
    }

    #[test]
    fn boundary_pixels_count_as_vat() {
        let mut fat = Grid2::filled(5, 5, false);
        for i in 0..5 {
            fat.set(i, 2, true);
        }
        // hull edge passes exactly through y=2 between x=1 and x=3
        let hull = convex_hull(&[(1.0, 2.0), (3.0, 2.0), (2.0, 4.0)]).unwrap();
        let labels = partition_slice(&fat, &hull);
        assert_eq!(labels.get(1, 2), MaskLabel::Vat);
        assert_eq!(labels.get(2, 2), MaskLabel::Vat);
        assert_eq!(labels.get(3, 2), MaskLabel::Vat);
        assert_eq!(labels.get(0, 2), MaskLabel::Sat);
        assert_eq!(labels.get(4, 2), MaskLabel::Sat);
    }

    #[test]
    fn quantify_examples() {
        // 1000 VAT voxels at 1 mm spacing = 1 ml
        let spacing = VoxelSpacing::new(1.0, 1.0, 1.0).unwrap();
        let mut mask = MaskGrid::background((10, 10, 10), spacing).unwrap();
        mask.data_mut().fill(MaskLabel::Vat);
        assert_eq!(quantify(&mask).vat_ml, 1.0);

        // single voxel at CT spacing
        let ct = VoxelSpacing::new(1.17, 1.17, 5.0).unwrap();
        let mut one = MaskGrid::background((1, 1, 1), ct).unwrap();
        one.data_mut()[0] = MaskLabel::Vat;
        let q = quantify(&one);
        assert!((q.vat_ml - 0.0068445).abs() < 1e-12);

        // empty mask
        let empty = MaskGrid::background((4, 4, 2), ct).unwrap();
        let qe = quantify(&empty);
        assert_eq!(qe.sat_ml, 0.0);
        assert_eq!(qe.vat_ml, 0.0);
        assert_eq!(qe.total_fat_ml, 0.0);
    }

    #[test]
    fn quant_totals_are_consistent() {
        let spacing = VoxelSpacing::new(2.0, 1.5, 3.0).unwrap();
        let mut mask = MaskGrid::background((8, 8, 2), spacing).unwrap();
        for (i, l) in mask.data_mut().iter_mut().enumerate() {
            *l = MaskLabel::from_code((i % 4) as u8).unwrap();
        }
        let q = quantify(&mask);
        let per_label = 32.0 * spacing.voxel_mm3() / 1000.0;
        assert!((q.sat_ml - per_label).abs() < 1e-12);
        assert!((q.vat_ml - per_label).abs() < 1e-12);
        assert!((q.total_fat_ml - 3.0 * per_label).abs() < 1e-12);
    }
}
