//! Adaptive affine verification of one neighbourhood.
//!
//! Minimal samples are enumerated deterministically from the most
//! distinctive members outwards. Each residual is turned into a confidence:
//! the number of members at least as good, divided by the number expected
//! if outliers were spread uniformly over a disk of radius `R2`. Inliers
//! are the residual-sorted prefix up to the last rank whose confidence
//! clears `t_c`.

use crate::filter::affine::{fit_affine_minimal, lsq_from_iter};
use crate::types::{AdalamParams, AffineModel, Neighborhood};

/// Best sample found for a neighbourhood.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationOutcome {
    /// Index of the sample among the non-degenerate ones drawn.
    pub iteration_index: usize,
    pub model: AffineModel,
    /// Inlier positions in the neighbourhood member list, in residual order.
    pub inlier_member_indices: Vec<usize>,
    /// Confidence of the last (worst) inlier; zero when there are none.
    pub confidence_of_worst_inlier: f64,
}

/// Outcome of verifying one seed.
#[derive(Debug, Clone, PartialEq)]
pub enum Verification {
    Accepted(IterationOutcome),
    /// `best` is `None` when no non-degenerate sample existed.
    Rejected {
        best: Option<IterationOutcome>,
    },
}

impl Verification {
    pub fn best(&self) -> Option<&IterationOutcome> {
        match self {
            Verification::Accepted(o) => Some(o),
            Verification::Rejected { best } => best.as_ref(),
        }
    }

    pub fn is_accepted(&self) -> bool {
        matches!(self, Verification::Accepted(_))
    }
}

/// `‖A·u_k − v_k‖` for every member, in member order.
pub fn residuals(model: &AffineModel, neighborhood: &Neighborhood) -> Vec<f64> {
    let mut out = Vec::with_capacity(neighborhood.len());
    residuals_into(model, neighborhood, &mut out);
    out
}

fn residuals_into(model: &AffineModel, nb: &Neighborhood, out: &mut Vec<f64>) {
    out.clear();
    out.extend(nb.centered1.iter().zip(&nb.centered2).map(|(&u, v)| {
        let p = model.apply(u);
        let dx = p[0] - v[0];
        let dy = p[1] - v[1];
        (dx * dx + dy * dy).sqrt()
    }));
}

#[inline]
fn confidence(rank: usize, n: usize, residual: f64, r2: f64, eps_residual: f64) -> f64 {
    let q = residual.max(eps_residual * r2) / r2;
    (rank + 1) as f64 / (n as f64 * q * q)
}

fn sort_by_residual(order: &mut [usize], residuals: &[f64]) {
    order.sort_unstable_by(|&a, &b| residuals[a].total_cmp(&residuals[b]).then(a.cmp(&b)));
}

/// Confidence of every residual, returned as `(member index, c_k)` sorted by
/// ascending residual (ties by member index).
///
/// `c_k = (k + 1) / (|R| · r_k² / R2²)` for rank `k`, with `r_k` clamped
/// below at `eps_residual · R2`.
pub fn confidences(residuals: &[f64], r2: f64, eps_residual: f64) -> Vec<(usize, f64)> {
    let n = residuals.len();
    let mut order: Vec<usize> = (0..n).collect();
    sort_by_residual(&mut order, residuals);
    order
        .into_iter()
        .enumerate()
        .map(|(k, m)| (m, confidence(k, n, residuals[m], r2, eps_residual)))
        .collect()
}

/// Picks inliers from the output of [`confidences`].
///
/// Adaptive mode keeps every member up to the largest rank whose confidence
/// reaches `t_c`. With `fixed_threshold` set, members whose residual is at
/// most that many pixels are kept instead. Either way the result is a
/// prefix of the residual-sorted order, returned as member indices.
pub fn select_inliers(
    confidences: &[(usize, f64)],
    t_c: f64,
    fixed_threshold: Option<f64>,
    residuals: &[f64],
) -> Vec<usize> {
    let end = match fixed_threshold {
        Some(t) => confidences
            .iter()
            .rposition(|&(m, _)| residuals[m] <= t)
            .map_or(0, |k| k + 1),
        None => confidences
            .iter()
            .rposition(|&(_, c)| c >= t_c)
            .map_or(0, |k| k + 1),
    };
    confidences[..end].iter().map(|&(m, _)| m).collect()
}

/// Reusable buffers for the per-sample inner loop.
#[derive(Default)]
struct Scratch {
    residuals: Vec<f64>,
    order: Vec<usize>,
}

/// Inlier selection that only sorts the residuals able to qualify.
///
/// A rank can reach `t_c` only if `(r/R2)² ≤ 1/t_c`, and the members
/// passing that test form a prefix of the sorted order, so ranks computed
/// within it equal the global ranks. In fixed mode the prefix is simply
/// `r ≤ threshold`.
fn select_fast(
    residuals: &[f64],
    r2: f64,
    params: &AdalamParams,
    order: &mut Vec<usize>,
) -> (usize, f64) {
    let n = residuals.len();
    order.clear();
    match params.fixed_threshold {
        Some(t) => order.extend((0..n).filter(|&m| residuals[m] <= t)),
        None => {
            // Slightly generous bound; exact confidences are computed below.
            let bound = r2 / params.t_c.sqrt() * (1.0 + 1e-9);
            order.extend((0..n).filter(|&m| residuals[m] <= bound));
        }
    }
    sort_by_residual(order, residuals);
    let conf = |k: usize| confidence(k, n, residuals[order[k]], r2, params.eps_residual);
    let end = match params.fixed_threshold {
        Some(_) => order.len(),
        None => (0..order.len())
            .rev()
            .find(|&k| conf(k) >= params.t_c)
            .map_or(0, |k| k + 1),
    };
    let worst = if end == 0 { 0.0 } else { conf(end - 1) };
    order.truncate(end);
    (end, worst)
}

/// Minimal sample pairs `(i, n)`, `i < n`, ordered by `n` then `i`.
fn prosac_pairs(len: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..len).flat_map(|n| (0..n).map(move |i| (i, n)))
}

/// Runs the fixed-budget sampling loop on one neighbourhood.
///
/// Members must already be in sampling order (see
/// [`crate::assemble_neighborhood`]). Degenerate pairs are skipped without
/// consuming the budget. The sample with the largest final inlier count
/// wins, the earlier one on ties, and the seed is accepted when that count
/// reaches `t_n`.
pub fn verify_seed(neighborhood: &Neighborhood, params: &AdalamParams) -> Verification {
    let nb = neighborhood;
    let r2 = nb.seed.r2;
    if nb.len() < 2 {
        return Verification::Rejected { best: None };
    }
    let mut scratch = Scratch::default();
    let mut best: Option<IterationOutcome> = None;
    let mut best_count = 0usize;

    let samples = prosac_pairs(nb.len())
        .filter_map(|(i, j)| {
            fit_affine_minimal(
                (nb.centered1[i], nb.centered2[i]),
                (nb.centered1[j], nb.centered2[j]),
            )
        })
        .take(params.iterations);

    for (iteration, mut model) in samples.enumerate() {
        residuals_into(&model, nb, &mut scratch.residuals);
        let (mut count, mut worst) =
            select_fast(&scratch.residuals, r2, params, &mut scratch.order);

        if params.use_refit && count >= 2 {
            let refit = lsq_from_iter(
                scratch
                    .order
                    .iter()
                    .map(|&m| (nb.centered1[m], nb.centered2[m])),
            );
            if let Some(refined) = refit {
                model = refined;
                residuals_into(&model, nb, &mut scratch.residuals);
                (count, worst) = select_fast(&scratch.residuals, r2, params, &mut scratch.order);
            }
        }

        if best.is_none() || count > best_count {
            best_count = count;
            best = Some(IterationOutcome {
                iteration_index: iteration,
                model,
                inlier_member_indices: scratch.order.clone(),
                confidence_of_worst_inlier: worst,
            });
        }
    }

    match best {
        Some(o) if o.inlier_member_indices.len() >= params.t_n => Verification::Accepted(o),
        best => Verification::Rejected { best },
    }
}
