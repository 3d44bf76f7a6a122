//! Match-level precision/recall and pose-error summaries.
//!
//! The pose metrics consume precomputed angular errors in degrees; a failed
//! pose is encoded as `f64::INFINITY`. An error counts as recalled at
//! threshold `x` when it is `<= x`.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EvalReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// Scores a selected set of match indices against per-match ground truth.
/// Duplicate indices are counted once.
pub fn match_prf(selected: &[usize], gt_inlier: &[bool]) -> Result<EvalReport> {
    let mut chosen = vec![false; gt_inlier.len()];
    for &i in selected {
        *chosen.get_mut(i).ok_or_else(|| {
            invalid(format!(
                "selected index {i} out of range for {} matches",
                gt_inlier.len()
            ))
        })? = true;
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&c, &g) in chosen.iter().zip(gt_inlier) {
        match (c, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(EvalReport::from_counts(tp, fp, fn_))
}

fn check_errors(errors: &[f64], threshold: f64) -> Result<()> {
    if errors.is_empty() {
        return Err(invalid("error list is empty"));
    }
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(invalid(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    if let Some(e) = errors.iter().find(|e| e.is_nan() || **e < 0.0) {
        return Err(invalid(format!(
            "pose errors must be >= 0 or infinite, got {e}"
        )));
    }
    Ok(())
}

/// Normalised area under the recall curve on `[0, threshold]`.
///
/// Recall is a step function that rises by `1/N` at each sorted error, so
/// the integral is `Σ (threshold - e_i) / N` over errors below the
/// threshold.
pub fn exact_auc(errors: &[f64], threshold: f64) -> Result<f64> {
    check_errors(errors, threshold)?;
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut area = 0.0;
    let mut prev_x = 0.0;
    let mut recall = 0.0;
    for (i, &e) in sorted.iter().enumerate() {
        if e > threshold {
            break;
        }
        area += recall * (e - prev_x);
        prev_x = e;
        recall = (i + 1) as f64 / n;
    }
    area += recall * (threshold - prev_x);
    Ok(area / threshold)
}

/// Cumulative histogram approximation of [`exact_auc`]: the mean of the
/// recall sampled at the right edge of each bin.
pub fn hist_auc(errors: &[f64], threshold: f64, bin_width: f64) -> Result<f64> {
    check_errors(errors, threshold)?;
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(invalid(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    let bins_f = threshold / bin_width;
    let bins = bins_f.round();
    if bins < 1.0 || (bins_f - bins).abs() > 1e-9 * bins_f.max(1.0) {
        return Err(invalid(format!(
            "threshold {threshold} is not a positive multiple of bin width {bin_width}"
        )));
    }
    let bins = bins as usize;
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let sum: f64 = (1..=bins)
        .map(|b| {
            let x = if b == bins {
                threshold
            } else {
                b as f64 * bin_width
            };
            sorted.partition_point(|&e| e <= x) as f64 / n
        })
        .sum();
    Ok(sum / bins as f64)
}

/// Fraction of errors at or below `threshold`.
pub fn map_at(errors: &[f64], threshold: f64) -> Result<f64> {
    check_errors(errors, threshold)?;
    Ok(errors.iter().filter(|&&e| e <= threshold).count() as f64 / errors.len() as f64)
}
