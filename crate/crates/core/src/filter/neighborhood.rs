//! Neighbourhood assembly around a seed: spatial gating in both images plus
//! the optional orientation/scale agreement check.

use crate::error::{invalid, Result};
use crate::types::{
    wrap_finite, AdalamParams, KeypointSet, Neighborhood, Point2, PutativeMatch, Seed,
};

/// Per-match quantities used by every seed, computed once.
pub(crate) struct MatchGeometry {
    pub p1: Vec<Point2>,
    pub p2: Vec<Point2>,
    /// `wrap(α2 - α1)`.
    pub angle: Vec<f64>,
    /// `σ2 / σ1`.
    pub scale: Vec<f64>,
    pub ratio: Vec<f64>,
}

impl MatchGeometry {
    pub fn new(matches: &[PutativeMatch], k1: &KeypointSet, k2: &KeypointSet) -> Result<Self> {
        let n = matches.len();
        let mut g = Self {
            p1: Vec::with_capacity(n),
            p2: Vec::with_capacity(n),
            angle: Vec::with_capacity(n),
            scale: Vec::with_capacity(n),
            ratio: Vec::with_capacity(n),
        };
        for (i, m) in matches.iter().enumerate() {
            m.validate()
                .map_err(|e| invalid(format!("match {i}: {e}")))?;
            let (Some(a), Some(b)) = (k1.get(m.idx1), k2.get(m.idx2)) else {
                return Err(invalid(format!(
                    "match {i} ({} -> {}) is out of range for keypoint sets of size {} and {}",
                    m.idx1,
                    m.idx2,
                    k1.len(),
                    k2.len()
                )));
            };
            g.p1.push(a.pos());
            g.p2.push(b.pos());
            g.angle.push(wrap_finite(b.alpha - a.alpha));
            g.scale.push(b.sigma / a.sigma);
            g.ratio.push(m.ratio);
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.p1.len()
    }

    pub fn assemble(&self, seed: Seed, params: &AdalamParams) -> Neighborhood {
        let s = seed.match_index;
        let (s1, s2) = (self.p1[s], self.p2[s]);
        let (sa, ss) = (self.angle[s], self.scale[s]);
        let lim1 = params.lambda * seed.r1;
        let lim2 = params.lambda * seed.r2;
        let (lim1, lim2) = (lim1 * lim1, lim2 * lim2);

        let mut members: Vec<usize> = (0..self.len())
            .filter(|&k| {
                if k == s {
                    return true;
                }
                let d1 = sq_dist(s1, self.p1[k]);
                let d2 = sq_dist(s2, self.p2[k]);
                if d1 > lim1 || d2 > lim2 {
                    return false;
                }
                !params.use_side_info
                    || (wrap_finite(sa - self.angle[k]).abs() <= params.t_alpha
                        && (ss / self.scale[k]).ln().abs() <= params.t_sigma)
            })
            .collect();
        members.sort_by(|&a, &b| self.ratio[a].total_cmp(&self.ratio[b]).then(a.cmp(&b)));

        let centered1 = members.iter().map(|&k| sub(self.p1[k], s1)).collect();
        let centered2 = members.iter().map(|&k| sub(self.p2[k], s2)).collect();
        Neighborhood {
            seed,
            members,
            centered1,
            centered2,
        }
    }
}

#[inline]
fn sq_dist(a: Point2, b: Point2) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

#[inline]
fn sub(a: Point2, b: Point2) -> Point2 {
    [a[0] - b[0], a[1] - b[1]]
}

/// Collects the matches compatible with `seed`.
///
/// A match joins when it lies within `λ·R1` of the seed in image 1 and
/// within `λ·R2` in image 2; with side information enabled its relative
/// orientation must also agree with the seed's within `t_alpha` and its
/// relative scale within `t_sigma` in log space. Members are ordered by
/// ascending ratio, ties by match index, and carry seed-centred
/// coordinates. The seed is always a member.
pub fn assemble_neighborhood(
    seed: Seed,
    matches: &[PutativeMatch],
    k1: &KeypointSet,
    k2: &KeypointSet,
    params: &AdalamParams,
) -> Result<Neighborhood> {
    if seed.match_index >= matches.len() {
        return Err(invalid(format!(
            "seed index {} out of range for {} matches",
            seed.match_index,
            matches.len()
        )));
    }
    let g = MatchGeometry::new(matches, k1, k2)?;
    Ok(g.assemble(seed, params))
}
