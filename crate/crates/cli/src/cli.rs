use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "stvq", version, about = "Space-time video quality study toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic test clip (drifting gratings).
    Scene(SceneArgs),
    /// Crop and resample a source to the display format.
    Conform(ConformArgs),
    /// Print SI, TI and colorfulness of a clip as JSON.
    Features(FeaturesArgs),
    /// Probe, plan and build the bitrate ladder of one content.
    Ladder(LadderArgs),
    /// Assign groups and build per-session playlists.
    Design(DesignArgs),
    /// Create a study directory from a manifest and a design.
    InitStudy(InitStudyArgs),
    /// Run the scoring-session HTTP server.
    Serve(ServeArgs),
    /// Turn exported votes into DMOS (and optionally MOS).
    ProcessScores(ProcessScoresArgs),
    /// Compute PSNR, SSIM and MS-SSIM for every distorted stimulus.
    Metrics(MetricsArgs),
    /// Stratified correlations and significance of model scores.
    Evaluate(EvaluateArgs),
    /// Content-wise cross-validation of an SVR on per-stimulus features.
    Cv(CvArgs),
    /// Rate-quality curves and convex hulls.
    Hull(HullArgs),
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    #[arg(long, default_value_t = 384)]
    pub width: usize,
    #[arg(long, default_value_t = 216)]
    pub height: usize,
    #[arg(long, default_value_t = 16)]
    pub frames: usize,
    #[arg(long, default_value_t = 60.0)]
    pub fps: f64,
    #[arg(long, default_value_t = 20.0)]
    pub detail: f64,
    #[arg(long, default_value_t = 40.0)]
    pub structure: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub motion_x: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub motion_y: f64,
    #[arg(long, default_value_t = 20.0)]
    pub color: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output clip; the sidecar is written next to it as `.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConformArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Sidecar of the input (default: input with a `.json` extension).
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3840)]
    pub width: usize,
    #[arg(long, default_value_t = 2160)]
    pub height: usize,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LadderArgs {
    /// Content name, shared by all stimuli of this source.
    #[arg(long)]
    pub content: String,
    /// Conformed source clip.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// `synthetic` or `cmd:<encode template>`.
    #[arg(long, default_value = "synthetic")]
    pub driver: String,
    /// Decode template for `cmd:` drivers.
    #[arg(long)]
    pub decode: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub codec_seed: u64,
    /// Probe QPs as `LO:HI:STEP` or a comma list.
    #[arg(long, default_value = "22:51:3")]
    pub qps: String,
    /// Manifest to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Where stimuli go (default: the manifest's directory).
    #[arg(long)]
    pub media_dir: Option<PathBuf>,
    /// Merge into an existing manifest instead of replacing it.
    #[arg(long)]
    pub append: bool,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub participants: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InitStudyArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub design: PathBuf,
    /// JSON list of `{stimulus_id, media_path}` shown before session 1.
    #[arg(long)]
    pub training: Option<PathBuf>,
    #[arg(long)]
    pub dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "STVQ_STUDY_DIR")]
    pub study: PathBuf,
    #[arg(long, env = "STVQ_HOST", default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, env = "STVQ_PORT", default_value_t = 8080)]
    pub port: u16,
    /// Allow a participant's sessions back to back.
    #[arg(long, env = "STVQ_NO_GATING")]
    pub no_gating: bool,
    /// Minimum spacing between a participant's sessions.
    #[arg(long, default_value_t = 24.0)]
    pub gap_hours: f64,
    /// Stimulus directory served at /media (default: `<study>/media`).
    #[arg(long, env = "STVQ_MEDIA_DIR")]
    pub media: Option<PathBuf>,
    /// Built scoring UI served at /.
    #[arg(long, env = "STVQ_UI_DIR")]
    pub ui: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProcessScoresArgs {
    /// Vote export CSV.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// DMOS CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Rejection report JSON to write.
    #[arg(long)]
    pub report: PathBuf,
    /// Also write MOS CSV here.
    #[arg(long)]
    pub mos: Option<PathBuf>,
    /// Split-half iterations (0 skips the check).
    #[arg(long, default_value_t = 0)]
    pub split_half: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory holding the manifest's media files and sidecars.
    #[arg(long)]
    pub media_dir: PathBuf,
    #[arg(long, default_value = "psnr,ssim,msssim")]
    pub metrics: String,
    /// Only score this content.
    #[arg(long)]
    pub content: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub dmos: PathBuf,
    #[arg(long)]
    pub mos: Option<PathBuf>,
    /// `stimulus_id,metric,value` CSV; repeat for several files.
    #[arg(long, required = true)]
    pub scores: Vec<PathBuf>,
    /// Metric names to treat as no-reference models.
    #[arg(long, value_delimiter = ',')]
    pub nr: Vec<String>,
    /// Full report and significance matrix as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// `stimulus_id,f1,f2,...` CSV with a header row.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub dmos: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 3)]
    pub inner_folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also report per-stratum results.
    #[arg(long)]
    pub strata: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HullConfigs {
    Spatial,
    Spacetime,
}

#[derive(Debug, Args)]
pub struct HullArgs {
    #[arg(long)]
    pub dmos: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = HullConfigs::Spacetime)]
    pub configs: HullConfigs,
    /// Restrict to one content (default: whole database).
    #[arg(long)]
    pub content: Option<String>,
    /// Bitrate grid size for the curve comparison.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    #[arg(long)]
    pub out: PathBuf,
}
