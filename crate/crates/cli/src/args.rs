use std::path::PathBuf;

use a2b_core::pipeline::{EncodingMode, RunConfig};
use a2b_core::synth::SceneConfig;
use a2b_core::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "a2b",
    version,
    about = "Generate repeated-pattern scenes, match them with anchor-relative coordinates, and score the matches"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true, env = "A2B_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write seeded synthetic scenes as JSON lines.
    Gen(GenArgs),
    /// Match every scene and write one report line per scene.
    Run(RunArgs),
    /// Run all encoding modes on the same scenes and report them side by side.
    Compare(CompareArgs),
    /// Vary one run parameter and tabulate mean metrics as CSV.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SceneKind {
    /// Image B is a random homography of image A.
    Homography,
    /// Image B is a random affine map of image A.
    Affine,
    /// Two calibrated views of random 3D points.
    Pose,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Base seed; scene i gets seed + i.
    #[arg(long, env = "A2B_SEED")]
    pub seed: u64,
    #[arg(long, default_value_t = 1, env = "A2B_COUNT")]
    pub count: usize,
    /// Output file, or `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SceneKind::Homography, env = "A2B_KIND")]
    pub kind: SceneKind,
    /// JSON file with scene settings; flags override it.
    #[arg(long, env = "A2B_SCENE_CONFIG")]
    pub scene_config: Option<PathBuf>,
    #[arg(long, env = "A2B_N_PATTERNS")]
    pub n_patterns: Option<usize>,
    #[arg(long, env = "A2B_REPEATS_PER_PATTERN")]
    pub repeats_per_pattern: Option<usize>,
    #[arg(long, env = "A2B_KPS_PER_INSTANCE")]
    pub kps_per_instance: Option<usize>,
    #[arg(long, env = "A2B_N_UNIQUE")]
    pub n_unique: Option<usize>,
    #[arg(long, env = "A2B_REPEAT_SIM")]
    pub repeat_sim: Option<f64>,
    #[arg(long, env = "A2B_PATTERN_COHESION")]
    pub pattern_cohesion: Option<f64>,
    #[arg(long, env = "A2B_NOISE_PX")]
    pub noise_px: Option<f64>,
    #[arg(long, env = "A2B_IMAGE_WIDTH")]
    pub image_width: Option<f64>,
    #[arg(long, env = "A2B_IMAGE_HEIGHT")]
    pub image_height: Option<f64>,
    #[arg(long, env = "A2B_INSTANCE_SPACING")]
    pub instance_spacing: Option<f64>,
    /// Points per pose scene.
    #[arg(long, default_value_t = 100, env = "A2B_POINTS")]
    pub points: usize,
    /// Largest rotation of a pose scene, in degrees.
    #[arg(long, default_value_t = 20.0, env = "A2B_MAX_ROTATION_DEG")]
    pub max_rotation_deg: f64,
}

impl GenArgs {
    pub fn scene_config(&self) -> Result<SceneConfig> {
        let mut cfg: SceneConfig = match &self.scene_config {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
            None => SceneConfig::default(),
        };
        macro_rules! overlay {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        overlay!(
            n_patterns,
            repeats_per_pattern,
            kps_per_instance,
            n_unique,
            repeat_sim,
            pattern_cohesion,
            noise_px,
            image_width,
            image_height,
            instance_spacing
        );
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Default,
    Benchmark,
}

/// Flags mirroring the run configuration. Precedence: flag, then `A2B_*`
/// environment variable, then `--config` file, then `--preset`.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long, env = "A2B_SEED")]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Preset::Default, env = "A2B_PRESET")]
    pub preset: Preset,
    /// JSON file with run settings.
    #[arg(long, env = "A2B_CONFIG")]
    pub config: Option<PathBuf>,
    /// Number of anchors.
    #[arg(long, env = "A2B_K")]
    pub k: Option<usize>,
    /// Decay constant of the confidence weight.
    #[arg(long, env = "A2B_EPSILON")]
    pub epsilon: Option<f64>,
    /// Minimum assignment probability for a match.
    #[arg(long, env = "A2B_ALPHA")]
    pub alpha: Option<f64>,
    /// Sinkhorn rounds.
    #[arg(long, env = "A2B_SINKHORN_ITERS")]
    pub sinkhorn_iters: Option<usize>,
    #[arg(long, env = "A2B_KNN_K")]
    pub knn_k: Option<usize>,
    /// Non-maximum suppression radius in pixels.
    #[arg(long, env = "A2B_NMS_RADIUS")]
    pub nms_radius: Option<f64>,
    /// Repetition filter: best-neighbour similarity threshold.
    #[arg(long, env = "A2B_GAMMA1")]
    pub gamma1: Option<f64>,
    /// Repetition filter: sixth-to-first similarity ratio threshold.
    #[arg(long, env = "A2B_GAMMA2")]
    pub gamma2: Option<f64>,
    /// nn, descriptor, cartesian or a2b.
    #[arg(long, value_parser = parse_mode, env = "A2B_ENCODING_MODE")]
    pub encoding_mode: Option<EncodingMode>,
    #[arg(long, env = "A2B_TAU_EPI")]
    pub tau_epi: Option<f64>,
    #[arg(long, env = "A2B_TAU_PX")]
    pub tau_px: Option<f64>,
    /// Weight of the coordinate block against the descriptor.
    #[arg(long, env = "A2B_BETA")]
    pub beta: Option<f64>,
    #[arg(long, env = "A2B_UNIT_COORDS")]
    pub unit_coords: Option<bool>,
    #[arg(long, env = "A2B_SCORE_SCALE")]
    pub score_scale: Option<f64>,
    #[arg(long, env = "A2B_DUSTBIN")]
    pub dustbin: Option<f64>,
    /// Minimum pixel spacing between selected anchors.
    #[arg(long, env = "A2B_ANCHOR_MIN_DIST")]
    pub anchor_min_dist: Option<f64>,
    /// Shift anchors in image B by this many pixels.
    #[arg(long, env = "A2B_ANCHOR_OFFSET_PX")]
    pub anchor_offset_px: Option<f64>,
    /// How many anchors to shift (0 = all).
    #[arg(long, env = "A2B_BIASED_ANCHORS")]
    pub biased_anchors: Option<usize>,
    /// Corner error threshold for homography accuracy.
    #[arg(long, env = "A2B_CORNER_TAU_PX")]
    pub corner_tau_px: Option<f64>,
    /// Use the stricter 3px corner threshold.
    #[arg(long, conflicts_with = "corner_tau_px")]
    pub strict_corner: bool,
    #[arg(long, env = "A2B_RANSAC_THRESH_PX")]
    pub ransac_thresh_px: Option<f64>,
    #[arg(long, env = "A2B_RANSAC_ITERS")]
    pub ransac_iters: Option<usize>,
}

fn parse_mode(s: &str) -> std::result::Result<EncodingMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl ConfigArgs {
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
            None => match self.preset {
                Preset::Default => RunConfig::default(),
                Preset::Benchmark => RunConfig::benchmark(),
            },
        };
        cfg.seed = self.seed;
        macro_rules! overlay {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        overlay!(
            k,
            epsilon,
            alpha,
            sinkhorn_iters,
            knn_k,
            nms_radius,
            gamma1,
            gamma2,
            encoding_mode,
            tau_epi,
            tau_px,
            beta,
            unit_coords,
            score_scale,
            dustbin,
            anchor_min_dist,
            anchor_offset_px,
            biased_anchors,
            corner_tau_px,
            ransac_thresh_px,
            ransac_iters
        );
        if self.strict_corner {
            cfg.corner_tau_px = a2b_core::eval::STRICT_CORNER_TAU_PX;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Scene file (JSON lines), or `-` for stdin.
    #[arg(long)]
    pub scenes: PathBuf,
    /// Per-scene report file (JSON lines), or `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    /// Anchor overrides (JSON lines keyed by scene seed).
    #[arg(long)]
    pub anchors: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub scenes: PathBuf,
    /// Report file, or `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub scenes: PathBuf,
    /// Run setting to vary, e.g. `k` or `anchor-offset-px`.
    #[arg(long)]
    pub param: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    /// Comma-separated encoding modes to evaluate.
    #[arg(long, value_delimiter = ',', value_parser = parse_mode, default_value = "a2b")]
    pub modes: Vec<EncodingMode>,
    /// CSV file, or `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}
