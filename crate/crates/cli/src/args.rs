//! Command-line surface. Every default is read from the library's own
//! `Default` impls so the two cannot drift apart.

use std::path::PathBuf;

use adalam::synth::{PatchMotion, SynthConfig};
use adalam::{AdalamParams, ImageSize};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "adalam",
    version,
    about = "Filter feature correspondences with adaptive locally-affine verification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic two-view scene with ground-truth labels.
    Synth(SynthArgs),
    /// Nearest-neighbour matching between two keypoint files.
    Match(MatchArgs),
    /// Filter putative matches.
    Filter(FilterArgs),
    /// Score a selection against ground truth, or summarise pose errors.
    Eval(EvalArgs),
    /// Compare filter variants over a sweep of synthetic scenes.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Motion {
    Random,
    Rotation,
    Identity,
}

fn synth_default() -> SynthConfig {
    SynthConfig::default()
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    /// Image width in pixels (both images).
    #[arg(long, default_value_t = synth_default().size1.width())]
    pub width: u32,
    /// Image height in pixels (both images).
    #[arg(long, default_value_t = synth_default().size1.height())]
    pub height: u32,
    /// Number of planar patches.
    #[arg(long, default_value_t = synth_default().n_patches)]
    pub patches: usize,
    /// Inlier keypoints per patch.
    #[arg(long, default_value_t = synth_default().keypoints_per_patch)]
    pub per_patch: usize,
    /// Descriptor dimension.
    #[arg(long, default_value_t = synth_default().descriptor_dim)]
    pub dim: usize,
    /// How patch affines are drawn.
    #[arg(long, value_enum, default_value_t = Motion::Random)]
    pub motion: Motion,
    /// Patch rotation in degrees, used with `--motion rotation`.
    #[arg(long, default_value_t = 30.0)]
    pub rotation_deg: f64,
    /// Draw inlier orientations and scales at random instead of from the
    /// patch affine.
    #[arg(long)]
    pub no_frame_consistent: bool,
}

impl SceneArgs {
    pub fn config(&self, n_outliers: usize, noise: f64, seed: u64) -> Result<SynthConfig, String> {
        let size = ImageSize::new(self.width, self.height).map_err(|e| e.to_string())?;
        let motion = match self.motion {
            Motion::Random => PatchMotion::Random,
            Motion::Rotation => PatchMotion::Rotation(self.rotation_deg.to_radians()),
            Motion::Identity => PatchMotion::Identity,
        };
        let n_inliers = self.patches * self.per_patch;
        let total = n_inliers + n_outliers;
        let cfg = SynthConfig {
            size1: size,
            size2: size,
            n_patches: self.patches,
            keypoints_per_patch: self.per_patch,
            n_outliers,
            noise_sigma: noise,
            descriptor_dim: self.dim,
            inlier_ratio_target: if total == 0 {
                0.0
            } else {
                n_inliers as f64 / total as f64
            },
            rng_seed: seed,
            frame_consistent: !self.no_frame_consistent,
            motion,
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory receiving keypoints1.txt, keypoints2.txt and matches.txt.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Number of outlier correspondences.
    #[arg(long, default_value_t = synth_default().n_outliers)]
    pub outliers: usize,
    /// Standard deviation of image-2 position noise, pixels.
    #[arg(long, default_value_t = synth_default().noise_sigma)]
    pub noise: f64,
    #[arg(long, default_value_t = synth_default().rng_seed)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub kp1: PathBuf,
    #[arg(long)]
    pub kp2: PathBuf,
    /// Output match file.
    #[arg(long)]
    pub out: PathBuf,
    /// Keep only matches passing the ratio test at this threshold.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Keep only mutual nearest neighbours.
    #[arg(long)]
    pub mutual: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Adalam,
    Ratio,
    Mutual,
}

pub const DEFAULT_RATIO_THRESHOLD: f64 = 0.8;

fn params_default() -> AdalamParams {
    AdalamParams::default()
}

/// One flag per filter hyperparameter.
#[derive(Debug, Args)]
pub struct ParamArgs {
    /// Image area over seed-disk area.
    #[arg(long, default_value_t = params_default().area_ratio)]
    pub area_ratio: f64,
    /// Neighbourhood radius as a multiple of the seed radius.
    #[arg(long, default_value_t = params_default().lambda)]
    pub lambda: f64,
    /// Minimal samples per seed.
    #[arg(long, default_value_t = params_default().iterations)]
    pub iterations: usize,
    /// Orientation agreement threshold, radians.
    #[arg(long, default_value_t = params_default().t_alpha)]
    pub t_alpha: f64,
    /// Scale agreement threshold on the absolute log-ratio.
    #[arg(long, default_value_t = params_default().t_sigma)]
    pub t_sigma: f64,
    /// Inlier confidence threshold.
    #[arg(long, default_value_t = params_default().t_c)]
    pub t_c: f64,
    /// Minimum inliers for a seed to be accepted.
    #[arg(long, default_value_t = params_default().t_n)]
    pub t_n: usize,
    /// Skip the orientation/scale consistency check.
    #[arg(long)]
    pub no_side_info: bool,
    /// Skip the least-squares refit.
    #[arg(long)]
    pub no_refit: bool,
    /// Use a fixed residual threshold in pixels instead of adaptive
    /// confidence.
    #[arg(long)]
    pub fixed_threshold: Option<f64>,
    /// Lower clamp on residuals, as a fraction of the image-2 radius.
    #[arg(long, default_value_t = params_default().eps_residual)]
    pub eps_residual: f64,
}

impl ParamArgs {
    pub fn params(&self) -> AdalamParams {
        AdalamParams {
            area_ratio: self.area_ratio,
            lambda: self.lambda,
            iterations: self.iterations,
            t_alpha: self.t_alpha,
            t_sigma: self.t_sigma,
            t_c: self.t_c,
            t_n: self.t_n,
            use_side_info: !self.no_side_info,
            use_refit: !self.no_refit,
            fixed_threshold: self.fixed_threshold,
            eps_residual: self.eps_residual,
        }
    }
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub kp1: PathBuf,
    #[arg(long)]
    pub kp2: PathBuf,
    /// Putative match file.
    #[arg(long)]
    pub matches: PathBuf,
    /// Output file with the kept matches.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-seed diagnostic report (adalam only).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Adalam)]
    pub method: Method,
    /// Threshold for `--method ratio`.
    #[arg(long, default_value_t = DEFAULT_RATIO_THRESHOLD)]
    pub ratio_threshold: f64,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Selected match file to score.
    #[arg(long, requires = "gt", conflicts_with = "errors")]
    pub selected: Option<PathBuf>,
    /// Putative match file carrying the gt column.
    #[arg(long, requires = "selected")]
    pub gt: Option<PathBuf>,
    /// Pose errors in degrees, whitespace separated; `inf` marks a failure.
    #[arg(long)]
    pub errors: Option<PathBuf>,
    /// Exact AUC thresholds, degrees.
    #[arg(long, value_delimiter = ',', requires = "errors")]
    pub auc: Vec<f64>,
    /// Histogram AUC thresholds, degrees.
    #[arg(long, value_delimiter = ',', requires = "errors")]
    pub hist_auc: Vec<f64>,
    /// Histogram bin width, degrees.
    #[arg(long, default_value_t = 5.0)]
    pub bin_width: f64,
    /// mAP thresholds, degrees.
    #[arg(long = "map", value_delimiter = ',', requires = "errors")]
    pub map_at: Vec<f64>,
    /// Print one JSON object instead of key=value lines.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scenes per sweep point.
    #[arg(long, default_value_t = 10)]
    pub scenes: u64,
    /// Seed of the first scene; scene `i` uses `seed + i`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Outlier counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "233,1000")]
    pub outliers: Vec<usize>,
    /// Noise levels to sweep, pixels.
    #[arg(long = "noise-levels", value_delimiter = ',', default_value = "0,1")]
    pub noise_levels: Vec<f64>,
    /// Residual threshold of the fixed-threshold variant, pixels.
    #[arg(long, default_value_t = 8.0)]
    pub lam_threshold: f64,
    /// Threshold of the ratio-test baseline.
    #[arg(long, default_value_t = DEFAULT_RATIO_THRESHOLD)]
    pub ratio_threshold: f64,
    /// Omit the wall-time column so the table is reproducible.
    #[arg(long)]
    pub no_timing: bool,
    /// Write the table here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub scene: SceneArgs,
}
