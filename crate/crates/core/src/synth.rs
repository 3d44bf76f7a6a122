//! Seeded two-view scenes with known ground truth.
//!
//! A scene is a set of small planar patches, each moving between the two
//! images under its own affine map, plus outlier correspondences placed
//! uniformly at random in both images. Putative matches are produced by
//! running [`nn_match`] on the generated descriptors, so the scene exercises
//! the same path as real data.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with
//! `SeedableRng::seed_from_u64(rng_seed)`; Gaussian draws use
//! `rand_distr::StandardNormal`. Both are platform independent.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::filter::compute_radius;
use crate::matching::nn_match;
use crate::types::{
    wrap_finite, AffineModel, ImageSize, Keypoint, KeypointSet, Point2, PutativeMatch,
};

/// Ratio bound every generated inlier match satisfies.
pub const INLIER_MAX_RATIO: f64 = 0.6;
/// Upper bound on the condition number of a patch affine.
pub const MAX_CONDITION: f64 = 10.0;
/// Area ratio used to size patches; matches the filter default.
const PATCH_AREA_RATIO: f64 = 100.0;
const REPAIR_ROUNDS: usize = 48;

/// How patch affines are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PatchMotion {
    /// Rotation · anisotropic scale · bounded shear, rotation uniform.
    Random,
    /// Same as `Random` with the rotation fixed to the given angle (radians).
    Rotation(f64),
    /// Pure translation.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub size1: ImageSize,
    pub size2: ImageSize,
    pub n_patches: usize,
    pub keypoints_per_patch: usize,
    pub n_outliers: usize,
    /// Standard deviation of the isotropic image-2 position noise, pixels.
    pub noise_sigma: f64,
    pub descriptor_dim: usize,
    /// Informational only; the realised ratio follows from the counts.
    pub inlier_ratio_target: f64,
    pub rng_seed: u64,
    /// Derive inlier orientation/scale from the patch affine rather than at
    /// random.
    pub frame_consistent: bool,
    pub motion: PatchMotion,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            size1: ImageSize::new(1024, 768).expect("positive"),
            size2: ImageSize::new(1024, 768).expect("positive"),
            n_patches: 5,
            keypoints_per_patch: 20,
            n_outliers: 233,
            noise_sigma: 0.0,
            descriptor_dim: 32,
            inlier_ratio_target: 0.3,
            rng_seed: 0,
            frame_consistent: true,
            motion: PatchMotion::Random,
        }
    }
}

impl SynthConfig {
    pub fn n_inliers(&self) -> usize {
        self.n_patches * self.keypoints_per_patch
    }

    pub fn validate(&self) -> Result<()> {
        let total = self.n_inliers() + self.n_outliers;
        if total < 2 {
            return Err(invalid(format!(
                "a scene needs at least 2 correspondences, config yields {total}"
            )));
        }
        if self.descriptor_dim < 2 {
            return Err(invalid(format!(
                "descriptor_dim must be >= 2, got {}",
                self.descriptor_dim
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(invalid(format!(
                "noise_sigma must be finite and >= 0, got {}",
                self.noise_sigma
            )));
        }
        if let PatchMotion::Rotation(a) = self.motion {
            if !a.is_finite() {
                return Err(invalid("patch rotation must be finite"));
            }
        }
        Ok(())
    }
}

/// Ground-truth motion of one patch: `x2 = linear · x1 + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchAffine {
    pub linear: AffineModel,
    pub translation: Point2,
}

impl PatchAffine {
    pub fn map(&self, p: Point2) -> Point2 {
        let q = self.linear.apply(p);
        [q[0] + self.translation[0], q[1] + self.translation[1]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub size1: ImageSize,
    pub size2: ImageSize,
    pub k1: KeypointSet,
    pub k2: KeypointSet,
    pub matches: Vec<PutativeMatch>,
    pub gt_inlier: Vec<bool>,
    pub patch_affines: Vec<PatchAffine>,
    pub patch_of_match: Vec<Option<usize>>,
}

impl SynthScene {
    pub fn gt_count(&self) -> usize {
        self.gt_inlier.iter().filter(|&&g| g).count()
    }
}

/// Rotation angle of the orthogonal factor of the polar decomposition of a
/// 2×2 matrix with positive determinant.
pub fn polar_rotation(a: &AffineModel) -> f64 {
    (a.a21 - a.a12).atan2(a.a11 + a.a22)
}

/// Ratio of the largest to the smallest singular value.
pub fn condition_number(a: &AffineModel) -> f64 {
    let fro2 = a.a11 * a.a11 + a.a12 * a.a12 + a.a21 * a.a21 + a.a22 * a.a22;
    let det = a.det().abs();
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    let s_max = ((fro2 + disc) / 2.0).sqrt();
    let s_min = ((fro2 - disc) / 2.0).max(0.0).sqrt();
    s_max / s_min
}

fn spectral_norm(a: &AffineModel) -> f64 {
    let fro2 = a.a11 * a.a11 + a.a12 * a.a12 + a.a21 * a.a21 + a.a22 * a.a22;
    let det = a.det();
    (((fro2 + (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt()).max(0.0)
}

fn sample_linear(rng: &mut ChaCha8Rng, motion: PatchMotion) -> AffineModel {
    if motion == PatchMotion::Identity {
        return AffineModel::IDENTITY;
    }
    loop {
        let theta = match motion {
            PatchMotion::Rotation(t) => t,
            _ => rng.random_range(-PI..PI),
        };
        let scale = rng.random_range(0.7f64.ln()..1.4f64.ln()).exp();
        let aniso = rng.random_range(-0.2f64..0.2).exp();
        let shear = rng.random_range(-0.25..0.25);
        let (sx, sy) = (scale * aniso, scale / aniso);
        // R(θ) · diag(sx, sy) · [[1, shear], [0, 1]]
        let (c, s) = (theta.cos(), theta.sin());
        let a = AffineModel {
            a11: c * sx,
            a12: c * sx * shear - s * sy,
            a21: s * sx,
            a22: s * sx * shear + c * sy,
        };
        if condition_number(&a) <= MAX_CONDITION {
            return a;
        }
    }
}

fn uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        (lo + hi) / 2.0
    }
}

fn uniform_disk(rng: &mut ChaCha8Rng, radius: f64) -> Point2 {
    let r = radius * rng.random::<f64>().sqrt();
    let t = rng.random_range(-PI..PI);
    [r * t.cos(), r * t.sin()]
}

fn random_angle(rng: &mut ChaCha8Rng) -> f64 {
    wrap_finite(rng.random_range(-PI..PI))
}

fn random_sigma(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(0.0f64..3.0).exp()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn unit_descriptor(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn perturb(base: &[f64], dir: &[f64], amount: f64) -> Vec<f32> {
    let v: Vec<f64> = base.iter().zip(dir).map(|(b, d)| b + d * amount).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| (x / n) as f32).collect()
}

struct Frame {
    pos: Point2,
    sigma: f64,
    alpha: f64,
}

/// Generates a scene. Identical configs give identical scenes.
pub fn generate_scene(config: &SynthConfig) -> Result<SynthScene> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let radius = compute_radius(config.size1, PATCH_AREA_RATIO)?;
    let (w1, h1) = (
        f64::from(config.size1.width()),
        f64::from(config.size1.height()),
    );
    let (w2, h2) = (
        f64::from(config.size2.width()),
        f64::from(config.size2.height()),
    );
    let n_in = config.n_inliers();
    let total = n_in + config.n_outliers;
    let dim = config.descriptor_dim;

    let mut frames1 = Vec::with_capacity(total);
    let mut frames2 = Vec::with_capacity(total);
    let mut patch_affines = Vec::with_capacity(config.n_patches);
    let mut patch_of_kp = Vec::with_capacity(total);

    for p in 0..config.n_patches {
        let linear = sample_linear(&mut rng, config.motion);
        let c1 = [
            uniform_in(&mut rng, radius, w1 - radius),
            uniform_in(&mut rng, radius, h1 - radius),
        ];
        let margin2 = radius * spectral_norm(&linear);
        let c2 = [
            uniform_in(&mut rng, margin2, w2 - margin2),
            uniform_in(&mut rng, margin2, h2 - margin2),
        ];
        let mc1 = linear.apply(c1);
        let affine = PatchAffine {
            linear,
            translation: [c2[0] - mc1[0], c2[1] - mc1[1]],
        };
        patch_affines.push(affine);
        let rot = polar_rotation(&linear);
        let scale = linear.det().sqrt();
        for _ in 0..config.keypoints_per_patch {
            let d = uniform_disk(&mut rng, radius);
            let x1 = [c1[0] + d[0], c1[1] + d[1]];
            let mapped = affine.map(x1);
            let x2 = [
                mapped[0] + config.noise_sigma * gaussian(&mut rng),
                mapped[1] + config.noise_sigma * gaussian(&mut rng),
            ];
            let alpha1 = random_angle(&mut rng);
            let sigma1 = random_sigma(&mut rng);
            let (alpha2, sigma2) = if config.frame_consistent {
                (wrap_finite(alpha1 + rot), sigma1 * scale)
            } else {
                (random_angle(&mut rng), random_sigma(&mut rng))
            };
            frames1.push(Frame {
                pos: x1,
                sigma: sigma1,
                alpha: alpha1,
            });
            frames2.push(Frame {
                pos: x2,
                sigma: sigma2,
                alpha: alpha2,
            });
            patch_of_kp.push(Some(p));
        }
    }
    for _ in 0..config.n_outliers {
        let x1 = [uniform_in(&mut rng, 0.0, w1), uniform_in(&mut rng, 0.0, h1)];
        let x2 = [uniform_in(&mut rng, 0.0, w2), uniform_in(&mut rng, 0.0, h2)];
        frames1.push(Frame {
            pos: x1,
            sigma: random_sigma(&mut rng),
            alpha: random_angle(&mut rng),
        });
        frames2.push(Frame {
            pos: x2,
            sigma: random_sigma(&mut rng),
            alpha: random_angle(&mut rng),
        });
        patch_of_kp.push(None);
    }

    // Descriptors: image-1 keypoint i pairs with image-2 keypoint i. Inlier
    // partners are near-duplicates; outlier partners are unrelated.
    let base: Vec<Vec<f64>> = (0..total).map(|_| unit_descriptor(&mut rng, dim)).collect();
    let dirs: Vec<Vec<f64>> = (0..n_in).map(|_| unit_descriptor(&mut rng, dim)).collect();
    let mut amount: Vec<f64> = (0..n_in).map(|_| rng.random_range(0.05..0.25)).collect();
    let mut desc2: Vec<Vec<f32>> = (0..total)
        .map(|i| {
            if i < n_in {
                perturb(&base[i], &dirs[i], amount[i])
            } else {
                unit_descriptor(&mut rng, dim)
                    .into_iter()
                    .map(|x| x as f32)
                    .collect()
            }
        })
        .collect();
    let desc1: Vec<Vec<f32>> = base
        .iter()
        .map(|v| v.iter().map(|&x| x as f32).collect())
        .collect();

    let build = |frames: &[Frame], desc: &[Vec<f32>]| -> Result<KeypointSet> {
        KeypointSet::new(
            frames
                .iter()
                .zip(desc)
                .map(|(f, d)| Keypoint::new(f.pos[0], f.pos[1], f.sigma, f.alpha, d.clone()))
                .collect::<Result<_>>()?,
        )
    };
    let k1 = build(&frames1, &desc1)?;

    // Shrink the perturbation of any inlier whose partner is not a clear
    // nearest neighbour, until all are.
    let mut round = 0;
    let (k2, matches) = loop {
        let k2 = build(&frames2, &desc2)?;
        let matches = nn_match(&k1, &k2)?;
        let bad: Vec<usize> = (0..n_in)
            .filter(|&i| matches[i].idx2 != i || matches[i].ratio > INLIER_MAX_RATIO)
            .collect();
        if bad.is_empty() {
            break (k2, matches);
        }
        if round == REPAIR_ROUNDS {
            return Err(invalid(
                "could not generate distinctive inlier descriptors; increase descriptor_dim",
            ));
        }
        round += 1;
        for i in bad {
            amount[i] = if round + 1 == REPAIR_ROUNDS {
                0.0
            } else {
                amount[i] * 0.5
            };
            desc2[i] = perturb(&base[i], &dirs[i], amount[i]);
        }
    };

    let gt_inlier: Vec<bool> = matches
        .iter()
        .enumerate()
        .map(|(i, m)| i < n_in && m.idx2 == i)
        .collect();
    let patch_of_match = matches
        .iter()
        .enumerate()
        .map(|(i, _)| if gt_inlier[i] { patch_of_kp[i] } else { None })
        .collect();

    Ok(SynthScene {
        size1: config.size1,
        size2: config.size2,
        k1,
        k2,
        matches,
        gt_inlier,
        patch_affines,
        patch_of_match,
    })
}
