//! Skin contour extraction: hole filling, connected components, and
//! Moore-neighbor boundary tracing.

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::BinarySlice;
use std::collections::VecDeque;

/// Closed boundary polyline in pixel coordinates; consecutive points are
/// 8-connected and the last point neighbors the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    pub points: Vec<(i32, i32)>,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Mean of the contour vertices.
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.points.len() as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(ax, ay), &(x, y)| (ax + x as f64, ay + y as f64));
        (sx / n, sy / n)
    }

    /// Shoelace area of the closed polyline, absolute value.
    pub fn area(&self) -> f64 {
        let pts = &self.points;
        let n = pts.len();
        let mut acc = 0.0;
        for i in 0..n {
            let (x0, y0) = pts[i];
            let (x1, y1) = pts[(i + 1) % n];
            acc += (x0 as f64) * (y1 as f64) - (x1 as f64) * (y0 as f64);
        }
        acc.abs() * 0.5
    }
}

/// Turn background regions that do not touch the image border into
/// foreground. Background connectivity is 4-connected.
pub fn fill_holes(mask: &BinarySlice) -> BinarySlice {
    let (w, h) = (mask.width(), mask.height());
    if mask.is_empty() {
        return mask.clone();
    }
    let mut reach = Grid2::filled(w, h, false);
    let mut queue = VecDeque::new();
    let push = |q: &mut VecDeque<(usize, usize)>, r: &mut Grid2<bool>, x: usize, y: usize| {
        if !mask.get(x, y) && !r.get(x, y) {
            r.set(x, y, true);
            q.push_back((x, y));
        }
    };
    for x in 0..w {
        push(&mut queue, &mut reach, x, 0);
        push(&mut queue, &mut reach, x, h - 1);
    }
    for y in 0..h {
        push(&mut queue, &mut reach, 0, y);
        push(&mut queue, &mut reach, w - 1, y);
    }
    while let Some((x, y)) = queue.pop_front() {
        let neighbors = [
            (x.wrapping_sub(1), y),
            (x + 1, y),
            (x, y.wrapping_sub(1)),
            (x, y + 1),
        ];
        for (nx, ny) in neighbors {
            if nx < w && ny < h {
                push(&mut queue, &mut reach, nx, ny);
            }
        }
    }
    let mut out = mask.clone();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) && !reach.get(x, y) {
                out.set(x, y, true);
            }
        }
    }
    out
}

/// Label 8-connected foreground components; returns (labels, count) with
/// label 0 = background and components numbered from 1 in raster order.
pub fn connected_components(mask: &BinarySlice) -> (Grid2<u32>, usize) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = Grid2::filled(w, h, 0u32);
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for sy in 0..h {
        for sx in 0..w {
            if !mask.get(sx, sy) || labels.get(sx, sy) != 0 {
                continue;
            }
            next += 1;
            labels.set(sx, sy, next);
            queue.push_back((sx as i64, sy as i64));
            while let Some((x, y)) = queue.pop_front() {
                for dy in -1..=1i64 {
                    for dx in -1..=1i64 {
                        let (nx, ny) = (x + dx, y + dy);
                        if mask.in_bounds(nx, ny)
                            && mask.get(nx as usize, ny as usize)
                            && labels.get(nx as usize, ny as usize) == 0
                        {
                            labels.set(nx as usize, ny as usize, next);
                            queue.push_back((nx, ny));
                        }
                    }
                }
            }
        }
    }
    (labels, next as usize)
}

// Moore neighborhood in clockwise order starting west, for a y-down raster.
const MOORE: [(i32, i32); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

/// Trace the outer boundary of the component containing `start` (which must
/// be its raster-first pixel, so its west neighbor is outside the component)
/// with Moore-neighbor tracing and Jacob's stopping criterion: stop when the
/// start pixel is re-entered with the same backtrack pixel.
fn trace_boundary(
    is_set: &impl Fn(i32, i32) -> bool,
    start: (i32, i32),
    max_steps: usize,
) -> Vec<(i32, i32)> {
    let dir_of = |from: (i32, i32), to: (i32, i32)| -> usize {
        MOORE
            .iter()
            .position(|&(dx, dy)| (from.0 + dx, from.1 + dy) == to)
            .expect("backtrack pixel is Moore-adjacent")
    };
    let mut points = vec![start];
    let mut pixel = start;
    let mut backtrack = (start.0 - 1, start.1);
    let initial_state = (pixel, backtrack);
    for _ in 0..max_steps {
        let from = dir_of(pixel, backtrack);
        let mut moved = false;
        for step in 1..=8 {
            let d = (from + step) % 8;
            let n = (pixel.0 + MOORE[d].0, pixel.1 + MOORE[d].1);
            if is_set(n.0, n.1) {
                let prev = (from + step - 1) % 8;
                backtrack = (pixel.0 + MOORE[prev].0, pixel.1 + MOORE[prev].1);
                pixel = n;
                moved = true;
                break;
            }
        }
        if !moved {
            break; // single-pixel component
        }
        if (pixel, backtrack) == initial_state {
            break;
        }
        points.push(pixel);
    }
    points
}

/// Trace every foreground component's outer contour on the hole-filled mask
/// and return the one with the most points.
pub fn extract_skin_contour(mask: &BinarySlice) -> Result<Contour> {
    if mask.count_true() == 0 {
        return Err(Error::NoSubject);
    }
    let filled = fill_holes(mask);
    let (labels, count) = connected_components(&filled);
    let mut best: Option<Vec<(i32, i32)>> = None;
    for comp in 1..=count as u32 {
        // raster-first pixel of this component
        let mut start = None;
        'scan: for y in 0..labels.height() {
            for x in 0..labels.width() {
                if labels.get(x, y) == comp {
                    start = Some((x as i32, y as i32));
                    break 'scan;
                }
            }
        }
        let start = start.expect("component exists");
        let is_set = |x: i32, y: i32| {
            labels.in_bounds(x as i64, y as i64) && labels.get(x as usize, y as usize) == comp
        };
        let cap = 4 * labels.len() + 16;
        let trace = trace_boundary(&is_set, start, cap);
        if best.as_ref().map_or(true, |b| trace.len() > b.len()) {
            best = Some(trace);
        }
    }
    let points = best.expect("at least one component");
    if points.len() < 3 {
        return Err(Error::DegenerateContour(format!(
            "largest contour has only {} points",
            points.len()
        )));
    }
    Ok(Contour { points })
}
