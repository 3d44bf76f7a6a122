//! The locally-affine match filter.
//!
//! 1. Seeds: matches that are the most distinctive within radius `R1`.
//! 2. Neighbourhoods: matches near each seed in both images (`λ·R1`,
//!    `λ·R2`), optionally agreeing with the seed's orientation and scale.
//! 3. Verification: a fixed budget of deterministic two-point samples per
//!    neighbourhood, with inliers chosen by an adaptive confidence
//!    threshold rather than a pixel tolerance.
//!
//! The output is the union of the inliers of all accepted seeds.

mod affine;
mod neighborhood;
mod seeds;
mod verify;

use std::f64::consts::PI;

use rayon::prelude::*;

pub use affine::{fit_affine_lsq, fit_affine_minimal};
pub use neighborhood::assemble_neighborhood;
pub use seeds::select_seeds;
pub use verify::{
    confidences, residuals, select_inliers, verify_seed, IterationOutcome, Verification,
};

use crate::error::{invalid, Result};
use crate::types::{
    AdalamParams, FilterResult, ImageSize, KeypointSet, PutativeMatch, Seed, SeedReport,
};
use neighborhood::MatchGeometry;

/// Seed suppression radius `√(w·h / (π·r_a))`: the disk covers `1/r_a` of
/// the image.
pub fn compute_radius(size: ImageSize, area_ratio: f64) -> Result<f64> {
    if !(area_ratio.is_finite() && area_ratio > 0.0) {
        return Err(invalid(format!(
            "area ratio must be positive, got {area_ratio}"
        )));
    }
    Ok((size.area() / (PI * area_ratio)).sqrt())
}

/// Filters `matches`, returning the indices of those that are locally
/// consistent with an affine map supported by enough other matches.
///
/// An empty match list yields an empty result. Out-of-range keypoint
/// indices and invalid parameters are reported as errors.
pub fn adalam_filter(
    k1: &KeypointSet,
    k2: &KeypointSet,
    size1: ImageSize,
    size2: ImageSize,
    matches: &[PutativeMatch],
    params: &AdalamParams,
) -> Result<FilterResult> {
    params.validate()?;
    if matches.is_empty() {
        return Ok(FilterResult::default());
    }
    let r1 = compute_radius(size1, params.area_ratio)?;
    let r2 = compute_radius(size2, params.area_ratio)?;
    let geometry = MatchGeometry::new(matches, k1, k2)?;
    let conf: Vec<f64> = matches.iter().map(|m| 1.0 - m.ratio).collect();
    let seeds = seeds::nms(&geometry.p1, &conf, r1);

    let verdicts: Vec<(usize, Vec<usize>, SeedReport)> = seeds
        .par_iter()
        .map(|&s| {
            let seed = Seed {
                match_index: s,
                r1,
                r2,
            };
            let nb = geometry.assemble(seed, params);
            let verdict = verify_seed(&nb, params);
            let best = verdict.best();
            let report = SeedReport {
                seed_match: s,
                best_iteration: best.map(|o| o.iteration_index),
                inlier_count: best.map_or(0, |o| o.inlier_member_indices.len()),
                accepted: verdict.is_accepted(),
            };
            let inliers = match &verdict {
                Verification::Accepted(o) => o
                    .inlier_member_indices
                    .iter()
                    .map(|&k| nb.members[k])
                    .collect(),
                Verification::Rejected { .. } => Vec::new(),
            };
            (s, inliers, report)
        })
        .collect();

    let mut keep = vec![false; matches.len()];
    let mut seed_reports = Vec::with_capacity(verdicts.len());
    for (_, inliers, report) in verdicts {
        for m in inliers {
            keep[m] = true;
        }
        seed_reports.push(report);
    }
    let selected = keep
        .iter()
        .enumerate()
        .filter_map(|(i, &k)| k.then_some(i))
        .collect();
    Ok(FilterResult {
        selected,
        seed_reports,
    })
}
