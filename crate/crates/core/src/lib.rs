//! Hierarchical, adaptive, locally-affine filtering of feature
//! correspondences.
//!
//! The crate covers the whole desk-scale pipeline:
//!
//! * [`matching`]: exhaustive nearest-neighbour matching plus the ratio
//!   test and mutual nearest-neighbour baselines;
//! * [`filter`]: seed selection, neighbourhood assembly and adaptive affine
//!   verification, composed in [`adalam_filter`];
//! * [`synth`]: a seeded generator of two-view scenes made of planar
//!   patches under known local affine motion;
//! * [`eval`]: match precision/recall and pose-error AUC summaries;
//! * [`io`]: the plain-text keypoint, match and report formats.

pub mod error;
pub mod eval;
pub mod filter;
pub mod io;
pub mod matching;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use filter::{
    adalam_filter, assemble_neighborhood, compute_radius, confidences, fit_affine_lsq,
    fit_affine_minimal, residuals, select_inliers, select_seeds, verify_seed, IterationOutcome,
    Verification,
};
pub use matching::{mutual_nn_filter, nn_match, ratio_test_filter};
pub use types::{
    wrap_angle, AdalamParams, AffineModel, FilterResult, ImageSize, Keypoint, KeypointSet,
    Neighborhood, Point2, PutativeMatch, Seed, SeedReport,
};
