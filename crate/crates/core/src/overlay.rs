//! Overlay rendering: slice intensities in gray, SAT green, VAT red,
//! boundary points marked, written as a binary portable pixmap.

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::volume::MaskLabel;
use crate::IntensitySlice;
use std::path::Path;

const SAT_RGB: [u8; 3] = [0, 190, 0];
const VAT_RGB: [u8; 3] = [210, 0, 0];
const POINT_RGB: [u8; 3] = [255, 220, 0];

/// Display window for the gray background.
const WINDOW_LOW: f64 = -200.0;
const WINDOW_HIGH: f64 = 250.0;

fn gray(hu: i16) -> u8 {
    let t = (hu as f64 - WINDOW_LOW) / (WINDOW_HIGH - WINDOW_LOW);
    (t.clamp(0.0, 1.0) * 255.0) as u8
}

/// Render the overlay into PPM (P6) bytes; same inputs give identical bytes.
pub fn render_overlay(
    slice: &IntensitySlice,
    labels: &Grid2<MaskLabel>,
    boundary_points: &[(f64, f64)],
) -> Result<Vec<u8>> {
    if !slice.same_dims(labels) {
        return Err(Error::Misaligned("slice and labels differ in size".into()));
    }
    let (w, h) = (slice.width(), slice.height());
    let mut rgb = vec![0u8; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let px = match labels.get(x, y) {
                MaskLabel::Sat => SAT_RGB,
                MaskLabel::Vat => VAT_RGB,
                _ => {
                    let g = gray(slice.get(x, y));
                    [g, g, g]
                }
            };
            rgb[(y * w + x) * 3..(y * w + x) * 3 + 3].copy_from_slice(&px);
        }
    }
    for &(px, py) in boundary_points {
        let (cx, cy) = (px.round() as i64, py.round() as i64);
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let (x, y) = (cx + dx, cy + dy);
                if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                    let off = (y as usize * w + x as usize) * 3;
                    rgb[off..off + 3].copy_from_slice(&POINT_RGB);
                }
            }
        }
    }
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(&rgb);
    Ok(out)
}

/// Render and write the overlay image.
pub fn emit_overlay(
    slice: &IntensitySlice,
    labels: &Grid2<MaskLabel>,
    boundary_points: &[(f64, f64)],
    path: impl AsRef<Path>,
) -> Result<()> {
    let bytes = render_overlay(slice, labels, boundary_points)?;
    std::fs::write(path.as_ref(), bytes)
        .map_err(|e| Error::io(path.as_ref().display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_mask_renders_grayscale() {
        let slice = Grid2::filled(8, 8, -100i16);
        let labels = Grid2::filled(8, 8, MaskLabel::Background);
        let bytes = render_overlay(&slice, &labels, &[]).unwrap();
        assert!(bytes.starts_with(b"P6\n8 8\n255\n"));
        let pixels = &bytes[b"P6\n8 8\n255\n".len()..];
        for p in pixels.chunks(3) {
            assert_eq!(p[0], p[1]);
            assert_eq!(p[1], p[2]);
        }
    }

    #[test]
    fn labels_colorize_and_bytes_are_deterministic() {
        let slice = Grid2::filled(4, 4, 0i16);
        let mut labels = Grid2::filled(4, 4, MaskLabel::Background);
        labels.set(0, 0, MaskLabel::Sat);
        labels.set(1, 0, MaskLabel::Vat);
        let a = render_overlay(&slice, &labels, &[(3.0, 3.0)]).unwrap();
        let b = render_overlay(&slice, &labels, &[(3.0, 3.0)]).unwrap();
        assert_eq!(a, b);
        let head = b"P6\n4 4\n255\n".len();
        assert_eq!(&a[head..head + 3], &SAT_RGB);
        assert_eq!(&a[head + 3..head + 6], &VAT_RGB);
        assert_eq!(&a[a.len() - 3..], &POINT_RGB);
    }

    #[test]
    fn size_mismatch_rejected() {
        let slice = Grid2::filled(4, 4, 0i16);
        let labels = Grid2::filled(5, 4, MaskLabel::Background);
        assert!(render_overlay(&slice, &labels, &[]).is_err());
    }
}
