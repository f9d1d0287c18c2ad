//! Seeded RANSAC ellipse fit over boundary candidates, the comparison
//! baseline for the outlier-rejection stages.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Conic `a x^2 + b xy + c y^2 + d x + e y + f = 0`.
#[derive(Debug, Clone, Copy)]
struct Conic {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    e: f64,
    f: f64,
}

impl Conic {
    fn is_ellipse(&self) -> bool {
        self.b * self.b - 4.0 * self.a * self.c < 0.0
    }

    /// First-order (Sampson) approximation of the point-to-curve distance.
    fn sampson_distance(&self, x: f64, y: f64) -> f64 {
        let value = self.a * x * x + self.b * x * y + self.c * y * y + self.d * x + self.e * y + self.f;
        let gx = 2.0 * self.a * x + self.b * y + self.d;
        let gy = self.b * x + 2.0 * self.c * y + self.e;
        let grad = (gx * gx + gy * gy).sqrt();
        if grad < 1e-12 {
            f64::INFINITY
        } else {
            value.abs() / grad
        }
    }
}

/// Solve for the conic through 5 points by Gaussian elimination on the 5x6
/// homogeneous system, pinning the free coefficient to 1.
fn conic_through(points: &[(f64, f64)]) -> Option<Conic> {
    debug_assert_eq!(points.len(), 5);
    let mut m = [[0.0f64; 6]; 5];
    for (row, &(x, y)) in points.iter().enumerate() {
        m[row] = [x * x, x * y, y * y, x, y, 1.0];
    }
    // forward elimination with partial pivoting over the first 5 columns
    let mut pivot_cols = [0usize; 5];
    let mut col = 0;
    for row in 0..5 {
        let mut best = None;
        while col < 6 {
            let (mut max_abs, mut max_row) = (1e-9, None);
            for r in row..5 {
                if m[r][col].abs() > max_abs {
                    max_abs = m[r][col].abs();
                    max_row = Some(r);
                }
            }
            if let Some(r) = max_row {
                best = Some((col, r));
                break;
            }
            col += 1;
        }
        let (pcol, prow) = best?;
        pivot_cols[row] = pcol;
        m.swap(row, prow);
        let p = m[row][pcol];
        for c in 0..6 {
            m[row][c] /= p;
        }
        for r in 0..5 {
            if r != row && m[r][pcol].abs() > 0.0 {
                let factor = m[r][pcol];
                for c in 0..6 {
                    m[r][c] -= factor * m[row][c];
                }
            }
        }
        col = pcol + 1;
    }
    // free column = any column that is not a pivot; set it to 1
    let free = (0..6).find(|c| !pivot_cols.contains(c))?;
    let mut coeffs = [0.0f64; 6];
    coeffs[free] = 1.0;
    for row in 0..5 {
        coeffs[pivot_cols[row]] = -m[row][free];
    }
    let conic = Conic {
        a: coeffs[0],
        b: coeffs[1],
        c: coeffs[2],
        d: coeffs[3],
        e: coeffs[4],
        f: coeffs[5],
    };
    if conic.a.abs() + conic.b.abs() + conic.c.abs() < 1e-12 {
        return None; // degenerate: a line, not a conic
    }
    Some(conic)
}

/// Fit an ellipse to the candidate positions with seeded RANSAC; a point is
/// an inlier when its approximate distance to the ellipse is at most
/// `tolerance` pixels. Returns one flag per input point. Same seed, same
/// flags.
pub fn ransac_ellipse_inliers<T: Scalar>(
    positions: &[(T, T)],
    tolerance: f64,
    iterations: usize,
    seed: u64,
) -> Result<Vec<bool>> {
    let n = positions.len();
    if n < 5 {
        return Err(Error::TooFewCandidates { need: 5, got: n });
    }
    let pts: Vec<(f64, f64)> = positions
        .iter()
        .map(|&(x, y)| (x.to_f64().unwrap(), y.to_f64().unwrap()))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_count = 0usize;
    let mut best_flags: Option<Vec<bool>> = None;
    for _ in 0..iterations {
        // five distinct indices
        let mut idx = [0usize; 5];
        let mut filled = 0;
        let mut guard = 0;
        while filled < 5 && guard < 1000 {
            let cand = rng.random_range(0..n);
            if !idx[..filled].contains(&cand) {
                idx[filled] = cand;
                filled += 1;
            }
            guard += 1;
        }
        if filled < 5 {
            break;
        }
        let sample: Vec<(f64, f64)> = idx.iter().map(|&i| pts[i]).collect();
        let conic = match conic_through(&sample) {
            Some(c) if c.is_ellipse() => c,
            _ => continue,
        };
        let flags: Vec<bool> = pts
            .iter()
            .map(|&(x, y)| conic.sampson_distance(x, y) <= tolerance)
            .collect();
        let count = flags.iter().filter(|&&b| b).count();
        if count > best_count {
            best_count = count;
            best_flags = Some(flags);
        }
    }
    // no valid ellipse found: keep every point (baseline stays fail-soft)
    Ok(best_flags.unwrap_or_else(|| vec![true; n]))
}
