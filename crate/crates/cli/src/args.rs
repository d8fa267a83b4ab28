use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gplp_core::knockout::KnockoutMode;
use gplp_core::{FeatureMode, KnockoutScope, Readout};

#[derive(Parser, Debug)]
#[command(name = "gplp", version, about = "Topology-only link prediction on bipartite interaction networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model on an edge list.
    Train(TrainArgs),
    /// Score a checkpoint on held-out pairs.
    Evaluate(EvaluateArgs),
    /// Write link probabilities for a list of pairs.
    Predict(PredictArgs),
    /// Train on knocked-out subgraphs and compare against clean training.
    KnockoutTrain(KnockoutArgs),
    /// Degree histograms and run comparisons.
    Report(ReportArgs),
    /// Generate a planted block-model edge list.
    Synth(SynthArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum OnOff {
    On,
    Off,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Features {
    RoleDegree,
    RoleOnly,
    RoleDegreeCross,
}

impl From<Features> for FeatureMode {
    fn from(f: Features) -> Self {
        match f {
            Features::RoleDegree => FeatureMode::RoleDegree,
            Features::RoleOnly => FeatureMode::RoleOnly,
            Features::RoleDegreeCross => FeatureMode::RoleDegreeCross,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ReadoutArg {
    Mean,
    PerStar,
}

impl From<ReadoutArg> for Readout {
    fn from(r: ReadoutArg) -> Self {
        match r {
            ReadoutArg::Mean => Readout::Mean,
            ReadoutArg::PerStar => Readout::PerStar,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SplitArgs {
    /// Fraction of records used for training.
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    /// Seed for splitting, initialisation and shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// Edge list: attacker<TAB>target<TAB>label per line.
    #[arg(long)]
    pub edges: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch: u64,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    pub hidden: u64,
    #[arg(long, value_enum, default_value_t = Features::RoleDegree)]
    pub features: Features,
    #[arg(long, value_enum, default_value_t = ReadoutArg::Mean)]
    pub readout: ReadoutArg,
    /// Checkpoint output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Run K-fold cross-validation instead of a single split.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub kfold: Option<u64>,
    /// Rebalance training records to 1:1 by up-sampling the minority class.
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    pub rebalance: OnOff,
    /// Evaluate on the test split every N epochs (0: only after the last).
    #[arg(long, default_value_t = 10)]
    pub eval_every: usize,
    /// History TSV path [default: <out>.history.tsv].
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Metrics TSV path [default: <out>.metrics.tsv].
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ScopeArg {
    TrainOnly,
    TrainAndTest,
}

impl From<ScopeArg> for KnockoutScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::TrainOnly => KnockoutScope::TrainOnly,
            ScopeArg::TrainAndTest => KnockoutScope::TrainAndTest,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ModeArg {
    Subgraph,
    Global,
}

impl From<ModeArg> for KnockoutMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Subgraph => KnockoutMode::Subgraph,
            ModeArg::Global => KnockoutMode::GlobalMatrix,
        }
    }
}

#[derive(Args, Debug)]
pub struct KnockoutArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = 0)]
    pub ko_seed: u64,
    #[arg(long, value_enum, default_value_t = ScopeArg::TrainOnly)]
    pub ko_scope: ScopeArg,
    /// Whether a star may lose all of its leaves.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub ko_allow_empty: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::Subgraph)]
    pub ko_mode: ModeArg,
    /// Multiplier on the sampled knock-out count.
    #[arg(long)]
    pub ko_severity: Option<f64>,
    /// Metrics TSV of a clean run; trained afresh with the same flags when absent.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Degradation TSV path [default: <out>.degradation.tsv].
    #[arg(long)]
    pub degradation: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Edge list the model was trained from.
    #[arg(long)]
    pub edges: PathBuf,
    /// Labelled pairs to score. Without it the test side of --split/--seed is used.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Metrics TSV path [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// ROC curve TSV (fpr, tpr).
    #[arg(long)]
    pub roc: Option<PathBuf>,
    /// Precision-recall curve TSV (recall, precision).
    #[arg(long)]
    pub pr: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Edge list giving the known topology.
    #[arg(long)]
    pub edges: PathBuf,
    /// attacker<TAB>target per line.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Output TSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(subcommand)]
    pub kind: ReportKind,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum RoleArg {
    Attacker,
    Target,
}

#[derive(Subcommand, Debug)]
pub enum ReportKind {
    /// Degree histogram (degree, count) of one node class.
    Degrees {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long, value_enum, default_value_t = RoleArg::Attacker)]
        role: RoleArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-metric deltas between two metrics TSVs.
    Compare {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        degraded: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub attackers: usize,
    #[arg(long, default_value_t = 100)]
    pub targets: usize,
    #[arg(long, default_value_t = 4)]
    pub blocks: usize,
    #[arg(long, default_value_t = 0.3)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.02)]
    pub p_out: f64,
    #[arg(long, default_value_t = 2.0)]
    pub neg_ratio: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
