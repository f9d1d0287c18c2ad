//! Denoised binary fat mask per slice: Hounsfield-window thresholding,
//! morphological closing with a disk, then median filtering.

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::{BinarySlice, IntensitySlice};

/// Tunables of the fat-mask stage.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PreprocessParams {
    /// Lower edge of the fat Hounsfield window, inclusive.
    pub hu_low: i16,
    /// Upper edge of the fat Hounsfield window, inclusive.
    pub hu_high: i16,
    /// Radius of the closing disk in pixels.
    pub disk_radius: usize,
    /// Median filter window side; must be odd.
    pub median_window: usize,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            hu_low: -190,
            hu_high: -30,
            disk_radius: 10,
            median_window: 3,
        }
    }
}

impl PreprocessParams {
    pub fn validate(&self) -> Result<()> {
        if self.hu_low >= self.hu_high {
            return Err(Error::Param(format!(
                "hu_low {} must be below hu_high {}",
                self.hu_low, self.hu_high
            )));
        }
        if self.median_window % 2 == 0 || self.median_window == 0 {
            return Err(Error::Param(format!(
                "median_window must be odd and >= 1, got {}",
                self.median_window
            )));
        }
        Ok(())
    }
}

/// Mark pixels whose intensity falls inside `[hu_low, hu_high]`, both ends
/// inclusive.
pub fn threshold_fat(slice: &IntensitySlice, p: &PreprocessParams) -> Result<BinarySlice> {
    if slice.is_empty() {
        return Err(Error::Param("cannot threshold an empty slice".into()));
    }
    p.validate()?;
    Ok(slice.map(|v| v >= p.hu_low && v <= p.hu_high))
}

/// Morphological closing by the discrete disk `{(u,v): u^2+v^2 <= r^2}`.
///
/// Computed on a canvas padded with background so the intermediate dilation
/// never clips; the result equals the closing taken over the whole plane,
/// which makes it extensive and idempotent.
pub fn morph_close_disk(mask: &BinarySlice, radius: usize) -> BinarySlice {
    if radius == 0 || mask.is_empty() {
        return mask.clone();
    }
    let pad = radius + 1;
    let (w, h) = (mask.width(), mask.height());
    let (pw, ph) = (w + 2 * pad, h + 2 * pad);
    let mut canvas = Grid2::filled(pw, ph, false);
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                canvas.set(x + pad, y + pad, true);
            }
        }
    }

    let r2 = (radius * radius) as f64;
    // dilate: foreground wherever a set pixel lies within the disk
    let d2_fg = squared_edt(&canvas, true);
    let dilated = Grid2::from_vec(
        pw,
        ph,
        d2_fg.data().iter().map(|&d| d <= r2).collect(),
    );
    // erode: keep pixels whose whole disk stayed foreground
    let d2_bg = squared_edt(&dilated, false);
    let mut out = Grid2::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let inside = dilated.get(x + pad, y + pad) && d2_bg.get(x + pad, y + pad) > r2;
            out.set(x, y, inside);
        }
    }
    out
}

/// Median filter with edge replication; `window` must be odd.
///
/// On a binary grid the median is a majority vote over the window.
pub fn median_filter<T: Copy + Ord>(grid: &Grid2<T>, window: usize) -> Result<Grid2<T>> {
    if window % 2 == 0 || window == 0 {
        return Err(Error::Param(format!(
            "median window must be odd and >= 1, got {window}"
        )));
    }
    if window == 1 || grid.is_empty() {
        return Ok(grid.clone());
    }
    let r = (window / 2) as i64;
    let mut out = grid.clone();
    let mut buf = Vec::with_capacity(window * window);
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            buf.clear();
            for dy in -r..=r {
                for dx in -r..=r {
                    buf.push(grid.get_clamped(x as i64 + dx, y as i64 + dy));
                }
            }
            let mid = buf.len() / 2;
            let (_, m, _) = buf.select_nth_unstable(mid);
            out.set(x, y, *m);
        }
    }
    Ok(out)
}

/// The full fat-mask stage: threshold, close, median-filter.
pub fn fat_mask(slice: &IntensitySlice, p: &PreprocessParams) -> Result<BinarySlice> {
    let thresholded = threshold_fat(slice, p)?;
    let closed = morph_close_disk(&thresholded, p.disk_radius);
    median_filter(&closed, p.median_window)
}

/// Exact squared Euclidean distance to the nearest pixel equal to `site`.
fn squared_edt(grid: &Grid2<bool>, site: bool) -> Grid2<f64> {
    const INF: f64 = 1e20;
    let (w, h) = (grid.width(), grid.height());
    let mut field = Grid2::filled(w, h, INF);

    // column pass: distance along y to the nearest site in the same column
    let mut col_in = vec![0.0f64; h];
    let mut col_out = vec![0.0f64; h];
    for x in 0..w {
        for y in 0..h {
            col_in[y] = if grid.get(x, y) == site { 0.0 } else { INF };
        }
        dt_1d(&col_in, &mut col_out);
        for y in 0..h {
            field.set(x, y, col_out[y]);
        }
    }
    // row pass over the column distances
    let mut row_in = vec![0.0f64; w];
    let mut row_out = vec![0.0f64; w];
    for y in 0..h {
        for x in 0..w {
            row_in[x] = field.get(x, y);
        }
        dt_1d(&row_in, &mut row_out);
        for x in 0..w {
            field.set(x, y, row_out[x]);
        }
    }
    field
}

/// 1D lower envelope of parabolas: `out[q] = min_p (q-p)^2 + f[p]`.
fn dt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    debug_assert_eq!(out.len(), n);
    if n == 0 {
        return;
    }
    let intersect = |q: usize, p: usize| -> f64 {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2 * (q - p)) as f64
    };
    let mut v = vec![0usize; n]; // parabola vertices
    let mut z = vec![0.0f64; n + 1]; // envelope breakpoints
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s = intersect(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = intersect(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0usize;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        out[q] = d * d + f[v[k]];
    }
}
