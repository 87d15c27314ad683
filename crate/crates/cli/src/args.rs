use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "segment-purify", version, about = "Non-action aware action recognition pipeline")]
pub struct Cli {
    /// JSON pipeline configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Fit PCA on sampled training descriptors.
    FitPca(FitPcaArgs),
    /// Fit the GMM codebook on PCA-projected descriptors.
    FitGmm(FitGmmArgs),
    /// Encode every video into frame-wise Fisher Vectors.
    Encode(EncodeArgs),
    /// Train a non-action shot classifier.
    TrainNonaction(TrainNonactionArgs),
    /// Score every shot with a non-action classifier.
    ScoreShots(ScoreShotsArgs),
    /// Weighted pooling of window features into video features.
    Pool(PoolArgs),
    /// Train one-vs-rest action classifiers on video features.
    TrainAction(TrainActionArgs),
    /// Rank-pooled video features.
    Darwin(DarwinArgs),
    /// Evaluate recognition, non-action detection or a full experiment.
    Evaluate(EvaluateArgs),
    /// Oracle pruning sweep over the probability of removing non-action shots.
    SimulatePruning(PruningArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Dataset manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory holding model files and encoded videos.
    #[arg(long)]
    pub models: Option<PathBuf>,
    /// Output location of the stage's reports and features.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Synthetic dataset specification (JSON); omitted fields take defaults.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the specification.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FitPcaArgs {
    #[command(flatten)]
    pub common: Common,
    /// Local channel to fit; repeatable, all local channels by default.
    #[arg(long)]
    pub channel: Vec<String>,
    /// Output dimension; half the descriptor dimension by default.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Descriptors sampled from the training videos.
    #[arg(long)]
    pub sample: Option<usize>,
    /// Scale projected components to unit variance.
    #[arg(long)]
    pub whiten: bool,
    /// Recompute even when the cached outputs are up to date.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct FitGmmArgs {
    #[command(flatten)]
    pub common: Common,
    /// Local channel to fit; repeatable, all local channels by default.
    #[arg(long)]
    pub channel: Vec<String>,
    /// Number of Gaussians.
    #[arg(long)]
    pub k: Option<usize>,
    /// Descriptors sampled from the training videos.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct TrainNonactionArgs {
    #[command(flatten)]
    pub common: Common,
    /// generic, specific=<class> or loo=<class>.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Choose gamma on held-out training videos.
    #[arg(long)]
    pub tune: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct ScoreShotsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Non-action classifier; defaults to <models>/nonaction-generic.spmd.
    #[arg(long)]
    pub classifier: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    pub split: SplitArg,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub window: Option<u32>,
    #[arg(long)]
    pub stride: Option<u32>,
    /// Non-action classifier; defaults to <models>/nonaction-generic.spmd.
    #[arg(long)]
    pub classifier: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PoolArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Append the dense-channel means to every window feature.
    #[arg(long)]
    pub fuse_dense: bool,
    /// Choose alpha by cross-validated recognition mAP on the training videos.
    #[arg(long)]
    pub tune_alpha: bool,
    /// Regulariser of the action classifiers used while tuning alpha.
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Plain,
    Weighted,
}

#[derive(Debug, Args)]
pub struct DarwinArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub window: WindowArgs,
    #[arg(long, value_enum, default_value = "plain")]
    pub variant: VariantArg,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Encode one pooled feature per window instead of per frame.
    #[arg(long)]
    pub per_second: bool,
}

#[derive(Debug, Args)]
pub struct TrainActionArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory written by `pool` or `darwin`.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Choose gamma by cross-validated mAP on the training videos.
    #[arg(long)]
    pub tune: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    /// Apply trained action classifiers to test-video features.
    Recognition,
    /// Run an experiment described by `--experiment` end to end.
    Experiment,
    /// Shot-level non-action AP and AP@k.
    Nonaction,
    /// Leave-one-class-out non-action classifiers against the full one.
    LeaveOneOut,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "recognition")]
    pub task: Task,
    /// Features directory (recognition).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Action classifiers (recognition); defaults to <models>/action.spmd.
    #[arg(long)]
    pub action: Option<PathBuf>,
    /// Experiment configuration JSON (experiment).
    #[arg(long)]
    pub experiment: Option<PathBuf>,
    /// Non-action classifier (nonaction); defaults to <models>/nonaction-generic.spmd.
    #[arg(long)]
    pub classifier: Option<PathBuf>,
    /// Per-video shot limits for AP@k (nonaction).
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    pub k: Vec<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Rank raw scores instead of per-video softmax probabilities.
    #[arg(long)]
    pub no_softmax: bool,
    /// Also write SVG precision-recall curves.
    #[arg(long)]
    pub plots: bool,
}

#[derive(Debug, Args)]
pub struct PruningArgs {
    #[command(flatten)]
    pub common: Common,
    /// start:step:end or a comma-separated list.
    #[arg(long, default_value = "0:0.1:1")]
    pub p_grid: String,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub fuse_dense: bool,
    /// Keep the classifiers trained on unpruned videos; prune test videos only.
    #[arg(long)]
    pub no_retrain: bool,
}
