//! Seed selection: radius non-maximum suppression over match confidence.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::types::{KeypointSet, Point2, PutativeMatch};

/// Returns the indices of matches that have the highest confidence
/// (`1 - ratio`) among all matches within `r1` pixels in image 1.
///
/// Equal confidences are resolved in favour of the lower match index. The
/// output is sorted ascending.
pub fn select_seeds(matches: &[PutativeMatch], k1: &KeypointSet, r1: f64) -> Result<Vec<usize>> {
    if !(r1.is_finite() && r1 > 0.0) {
        return Err(invalid(format!("seed radius must be positive, got {r1}")));
    }
    let mut pts = Vec::with_capacity(matches.len());
    for m in matches {
        let kp = k1.get(m.idx1).ok_or_else(|| {
            invalid(format!(
                "match refers to image-1 keypoint {} but only {} exist",
                m.idx1,
                k1.len()
            ))
        })?;
        pts.push(kp.pos());
    }
    let conf: Vec<f64> = matches.iter().map(|m| 1.0 - m.ratio).collect();
    Ok(nms(&pts, &conf, r1))
}

fn cell(p: Point2, size: f64) -> (i64, i64) {
    ((p[0] / size).floor() as i64, (p[1] / size).floor() as i64)
}

/// Radius NMS on a uniform grid whose cell side equals the radius, so every
/// neighbour lies in the 3×3 block of cells around a point.
pub(crate) fn nms(pts: &[Point2], conf: &[f64], radius: f64) -> Vec<usize> {
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &p) in pts.iter().enumerate() {
        grid.entry(cell(p, radius)).or_default().push(i);
    }
    let r2 = radius * radius;
    (0..pts.len())
        .into_par_iter()
        .filter(|&i| {
            let (cx, cy) = cell(pts[i], radius);
            let ci = conf[i];
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let Some(bucket) = grid.get(&(cx + dx, cy + dy)) else {
                        continue;
                    };
                    for &j in bucket {
                        if j == i {
                            continue;
                        }
                        let cj = conf[j];
                        if cj < ci || (cj == ci && j > i) {
                            continue;
                        }
                        let ex = pts[j][0] - pts[i][0];
                        let ey = pts[j][1] - pts[i][1];
                        if ex * ex + ey * ey <= r2 {
                            return false;
                        }
                    }
                }
            }
            true
        })
        .collect()
}
