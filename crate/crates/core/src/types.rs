//! Domain types shared by matching, filtering, synthesis and evaluation.
//!
//! Keypoints live in one array per image; matches refer to them by index so
//! every stage works on the same storage.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// A 2-vector in pixels.
pub type Point2 = [f64; 2];

/// Wraps an angle into `(-π, π]`. Odd multiples of π map to `+π`.
pub fn wrap_angle(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(invalid(format!("angle must be finite, got {theta}")));
    }
    Ok(wrap_finite(theta))
}

/// Infallible variant for values already known to be finite.
pub(crate) fn wrap_finite(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let two_pi = 2.0 * PI;
    let mut r = theta.rem_euclid(two_pi);
    if r > PI {
        r -= two_pi;
    }
    if r <= -PI {
        r += two_pi;
    }
    r
}

/// Image extent in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ImageSize {
    width: u32,
    height: u32,
}

impl ImageSize {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid(format!(
                "image size must be positive, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn area(&self) -> f64 {
        f64::from(self.width) * f64::from(self.height)
    }
}

/// A detected feature: position, local frame (scale and orientation) and
/// descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Feature scale, strictly positive.
    pub sigma: f64,
    /// Feature orientation in radians, in `(-π, π]`.
    pub alpha: f64,
    pub descriptor: Vec<f32>,
}

impl Keypoint {
    /// Builds a keypoint, checking the frame and descriptor invariants.
    pub fn new(x: f64, y: f64, sigma: f64, alpha: f64, descriptor: Vec<f32>) -> Result<Self> {
        let kp = Self {
            x,
            y,
            sigma,
            alpha,
            descriptor,
        };
        kp.validate()?;
        Ok(kp)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.x.is_finite() || !self.y.is_finite() {
            return Err(invalid("keypoint position must be finite"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(invalid(format!(
                "keypoint scale must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.alpha > -PI && self.alpha <= PI) {
            return Err(invalid(format!(
                "keypoint orientation must lie in (-pi, pi], got {}",
                self.alpha
            )));
        }
        if self.descriptor.is_empty() {
            return Err(invalid("descriptor must have at least one entry"));
        }
        if self.descriptor.iter().any(|v| !v.is_finite()) {
            return Err(invalid("descriptor entries must be finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn pos(&self) -> Point2 {
        [self.x, self.y]
    }
}

/// The keypoints of one image. All descriptors share one dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KeypointSet {
    keypoints: Vec<Keypoint>,
    dim: usize,
}

impl KeypointSet {
    pub fn new(keypoints: Vec<Keypoint>) -> Result<Self> {
        let dim = keypoints.first().map_or(0, |k| k.descriptor.len());
        for (i, kp) in keypoints.iter().enumerate() {
            kp.validate()
                .map_err(|e| invalid(format!("keypoint {i}: {e}")))?;
            if kp.descriptor.len() != dim {
                return Err(invalid(format!(
                    "keypoint {i} has descriptor dimension {}, expected {dim}",
                    kp.descriptor.len()
                )));
            }
        }
        Ok(Self { keypoints, dim })
    }

    /// Descriptor dimension; zero for an empty set.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn as_slice(&self) -> &[Keypoint] {
        &self.keypoints
    }

    pub fn into_inner(self) -> Vec<Keypoint> {
        self.keypoints
    }

    pub fn get(&self, i: usize) -> Option<&Keypoint> {
        self.keypoints.get(i)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Keypoint> {
        self.keypoints.iter()
    }
}

impl std::ops::Index<usize> for KeypointSet {
    type Output = Keypoint;

    fn index(&self, i: usize) -> &Keypoint {
        &self.keypoints[i]
    }
}

/// A nearest-neighbour correspondence from image 1 to image 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PutativeMatch {
    pub idx1: usize,
    pub idx2: usize,
    /// Descriptor distance to the nearest neighbour.
    pub dist: f64,
    /// Nearest over second-nearest distance, in `[0, 1]`.
    pub ratio: f64,
}

impl PutativeMatch {
    pub fn new(idx1: usize, idx2: usize, dist: f64, ratio: f64) -> Result<Self> {
        let m = Self {
            idx1,
            idx2,
            dist,
            ratio,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dist.is_finite() && self.dist >= 0.0) {
            return Err(invalid(format!(
                "match distance must be finite and >= 0, got {}",
                self.dist
            )));
        }
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(invalid(format!(
                "match ratio must lie in [0, 1], got {}",
                self.ratio
            )));
        }
        Ok(())
    }
}

/// Checks that no two matches share an image-1 keypoint.
pub fn check_unique_idx1(matches: &[PutativeMatch]) -> Result<()> {
    let mut idx: Vec<usize> = matches.iter().map(|m| m.idx1).collect();
    idx.sort_unstable();
    if let Some(w) = idx.windows(2).find(|w| w[0] == w[1]) {
        return Err(invalid(format!(
            "image-1 keypoint {} appears in more than one match",
            w[0]
        )));
    }
    Ok(())
}

/// Hyperparameters of the filter, including the ablation switches.
#[derive(Debug, Clone, PartialEq)]
pub struct AdalamParams {
    /// Ratio between image area and the area of the seed suppression disk.
    pub area_ratio: f64,
    /// Neighbourhood radius as a multiple of the seed radius.
    pub lambda: f64,
    /// Number of minimal samples evaluated per seed.
    pub iterations: usize,
    /// Orientation agreement threshold, radians.
    pub t_alpha: f64,
    /// Scale agreement threshold on the absolute log-ratio.
    pub t_sigma: f64,
    /// Confidence threshold for inliers.
    pub t_c: f64,
    /// Minimum inlier count for a seed to be accepted.
    pub t_n: usize,
    /// Apply the orientation/scale consistency check when building
    /// neighbourhoods.
    pub use_side_info: bool,
    /// Refit the affine model on the inliers and reselect once.
    pub use_refit: bool,
    /// When set, inliers are residuals within this many pixels instead of
    /// the adaptive confidence rule.
    pub fixed_threshold: Option<f64>,
    /// Residuals are clamped below at `eps_residual * R2` before computing
    /// confidences.
    pub eps_residual: f64,
}

impl Default for AdalamParams {
    fn default() -> Self {
        Self {
            area_ratio: 100.0,
            lambda: 4.0,
            iterations: 128,
            t_alpha: PI / 6.0,
            t_sigma: 1.5,
            t_c: 200.0,
            t_n: 6,
            use_side_info: true,
            use_refit: true,
            fixed_threshold: None,
            eps_residual: 1e-6,
        }
    }
}

impl AdalamParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area_ratio", self.area_ratio),
            ("t_alpha", self.t_alpha),
            ("t_sigma", self.t_sigma),
            ("t_c", self.t_c),
            ("eps_residual", self.eps_residual),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lambda.is_finite() && self.lambda >= 1.0) {
            return Err(invalid(format!("lambda must be >= 1, got {}", self.lambda)));
        }
        if self.iterations == 0 {
            return Err(invalid("iterations must be >= 1"));
        }
        if self.t_n < 2 {
            return Err(invalid(format!("t_n must be >= 2, got {}", self.t_n)));
        }
        if let Some(t) = self.fixed_threshold {
            if !(t.is_finite() && t > 0.0) {
                return Err(invalid(format!(
                    "fixed_threshold must be positive, got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// A seed correspondence together with the suppression radii of both images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seed {
    pub match_index: usize,
    pub r1: f64,
    pub r2: f64,
}

impl Seed {
    pub fn new(match_index: usize, r1: f64, r2: f64) -> Result<Self> {
        if !(r1 > 0.0 && r2 > 0.0 && r1.is_finite() && r2.is_finite()) {
            return Err(invalid(format!(
                "seed radii must be positive, got {r1}, {r2}"
            )));
        }
        Ok(Self {
            match_index,
            r1,
            r2,
        })
    }
}

/// The correspondences assigned to a seed, in seed-centred coordinates.
///
/// Members are ordered by ascending ratio (ties by match index), which is
/// the order minimal samples are drawn in.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub seed: Seed,
    pub members: Vec<usize>,
    pub centered1: Vec<Point2>,
    pub centered2: Vec<Point2>,
}

impl Neighborhood {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// A 2×2 linear map acting on seed-centred coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineModel {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl AffineModel {
    pub const IDENTITY: Self = Self {
        a11: 1.0,
        a12: 0.0,
        a21: 0.0,
        a22: 1.0,
    };

    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Result<Self> {
        let m = Self { a11, a12, a21, a22 };
        if !m.is_finite() {
            return Err(invalid("affine entries must be finite"));
        }
        Ok(m)
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a21.is_finite() && self.a22.is_finite()
    }

    #[inline]
    pub fn apply(&self, p: Point2) -> Point2 {
        [
            self.a11 * p[0] + self.a12 * p[1],
            self.a21 * p[0] + self.a22 * p[1],
        ]
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }
}

/// Diagnostics for one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedReport {
    pub seed_match: usize,
    /// Index of the best sample, `None` when no usable sample existed.
    pub best_iteration: Option<usize>,
    pub inlier_count: usize,
    pub accepted: bool,
}

/// Output of the filter: the retained match indices plus per-seed reports.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FilterResult {
    /// Sorted and duplicate-free indices into the input match list.
    pub selected: Vec<usize>,
    pub seed_reports: Vec<SeedReport>,
}
