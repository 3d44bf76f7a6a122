//! Centred affine fits. The seed correspondence anchors the translation, so
//! a model is a plain 2×2 matrix and two correspondences determine it.

use crate::types::{AffineModel, Point2};

/// Relative determinant below which two source points count as collinear.
const MINIMAL_DEGENERACY: f64 = 1e-9;
/// Same test for the least-squares scatter matrix (determinant squared).
const SCATTER_DEGENERACY: f64 = 1e-18;

/// Solves `A u_p = v_p`, `A u_q = v_q`.
///
/// Returns `None` when the source points are (numerically) linearly
/// dependent, i.e. `|det[u_p u_q]| < 1e-9 · max(|u_p|, |u_q|)²`.
pub fn fit_affine_minimal(p: (Point2, Point2), q: (Point2, Point2)) -> Option<AffineModel> {
    let ([upx, upy], [vpx, vpy]) = p;
    let ([uqx, uqy], [vqx, vqy]) = q;
    let scale = (upx * upx + upy * upy).max(uqx * uqx + uqy * uqy);
    let det = upx * uqy - uqx * upy;
    if scale == 0.0 || det.is_nan() || det.abs() < MINIMAL_DEGENERACY * scale {
        return None;
    }
    let m = AffineModel {
        a11: (vpx * uqy - vqx * upy) / det,
        a12: (vqx * upx - vpx * uqx) / det,
        a21: (vpy * uqy - vqy * upy) / det,
        a22: (vqy * upx - vpy * uqx) / det,
    };
    m.is_finite().then_some(m)
}

/// Least-squares fit of `A` minimising `Σ |A u_k - v_k|²`.
///
/// Returns `None` with fewer than two correspondences or when the source
/// scatter matrix is rank deficient.
pub fn fit_affine_lsq(pairs: &[(Point2, Point2)]) -> Option<AffineModel> {
    lsq_from_iter(pairs.iter().copied())
}

pub(crate) fn lsq_from_iter(pairs: impl Iterator<Item = (Point2, Point2)>) -> Option<AffineModel> {
    // Scatter S = Σ u uᵀ and cross term B = Σ v uᵀ; A = B S⁻¹.
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    let (mut bxx, mut bxy, mut byx, mut byy) = (0.0, 0.0, 0.0, 0.0);
    let mut n = 0usize;
    for ([ux, uy], [vx, vy]) in pairs {
        sxx += ux * ux;
        sxy += ux * uy;
        syy += uy * uy;
        bxx += vx * ux;
        bxy += vx * uy;
        byx += vy * ux;
        byy += vy * uy;
        n += 1;
    }
    if n < 2 {
        return None;
    }
    let det = sxx * syy - sxy * sxy;
    let trace = sxx + syy;
    if trace == 0.0 || det.is_nan() || det < SCATTER_DEGENERACY * trace * trace {
        return None;
    }
    let m = AffineModel {
        a11: (bxx * syy - bxy * sxy) / det,
        a12: (bxy * sxx - bxx * sxy) / det,
        a21: (byx * syy - byy * sxy) / det,
        a22: (byy * sxx - byx * sxy) / det,
    };
    m.is_finite().then_some(m)
}
