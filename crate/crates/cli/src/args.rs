use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "mips-screen", version, about = "Maximum inner product search with learned candidate screening")]
pub struct Cli {
    /// Cap on worker threads (default: one per core). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a topic-clustered synthetic dataset (EMB1 files).
    Gen(GenArgs),
    /// Label each context with its exact MIPS winner.
    Labels(LabelsArgs),
    /// Train a screening model.
    TrainScreen(TrainScreenArgs),
    /// Report screening accuracy, speedup and top-1 agreement of a model.
    EvalScreen(EvalScreenArgs),
    /// Sweep K × λ and write a CSV report.
    Grid(GridArgs),
    /// Search candidates for every row of a context file.
    Search(SearchArgs),
    /// Generate labelled context/response pairs scored by a planted teacher.
    GenPairs(GenPairsArgs),
    /// Train a dual encoder with the distillation loss.
    Distill(DistillArgs),
    /// Time exact and (optionally) screened search per query.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Training contexts.
    #[arg(long, default_value_t = 5000)]
    pub m_train: usize,
    /// Held-out contexts.
    #[arg(long, default_value_t = 500)]
    pub m_test: usize,
    /// Candidates.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Embedding dimension.
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    #[arg(long, default_value_t = 20)]
    pub topics: usize,
    /// Noise scale (per-coordinate standard deviation is sigma/√d).
    #[arg(long, default_value_t = 0.3)]
    pub sigma: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Receives train.emb, test.emb and candidates.emb.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct LabelsArgs {
    #[arg(long)]
    pub contexts: PathBuf,
    #[arg(long)]
    pub candidates: PathBuf,
    /// LBL1 output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainOpts {
    /// Alternations of subset update and centroid SGD.
    #[arg(long, default_value_t = 10)]
    pub t: usize,
    /// Centroid SGD learning rate.
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    /// SGD epochs per alternation.
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    /// SGD mini-batch size.
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainScreenArgs {
    #[arg(long)]
    pub contexts: PathBuf,
    #[arg(long)]
    pub candidates: PathBuf,
    /// LBL1 labels; computed by exact search when omitted.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Number of clusters.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Cost of including an unneeded candidate, in (0, 1).
    #[arg(long, default_value_t = 1e-6)]
    pub lambda: f64,
    #[command(flatten)]
    pub train: TrainOpts,
    /// SCRN output.
    #[arg(long)]
    pub out_model: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalScreenArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub contexts: PathBuf,
    #[arg(long)]
    pub candidates: PathBuf,
    /// Report file; printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Training contexts.
    #[arg(long)]
    pub contexts: PathBuf,
    /// Held-out contexts the metrics are measured on.
    #[arg(long)]
    pub test_contexts: PathBuf,
    #[arg(long)]
    pub candidates: PathBuf,
    /// LBL1 labels for the training contexts; computed when omitted.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "10,20,50")]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1e-5,5e-6,1e-6,5e-7")]
    pub lambda: Vec<f64>,
    #[command(flatten)]
    pub train: TrainOpts,
    /// CSV output; printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["exact", "screened"])))]
pub struct SearchArgs {
    /// SCRN model, required with --screened.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// EMB1 file of query contexts.
    #[arg(long)]
    pub context_file: PathBuf,
    #[arg(long)]
    pub candidates: PathBuf,
    /// Brute force over every candidate.
    #[arg(long)]
    pub exact: bool,
    /// Search only the predicted subset.
    #[arg(long)]
    pub screened: bool,
}

#[derive(Debug, Args)]
pub struct GenPairsArgs {
    /// Input feature dimension.
    #[arg(long, default_value_t = 16)]
    pub features: usize,
    /// Rank of the teacher's bilinear part.
    #[arg(long, default_value_t = 4)]
    pub rank: usize,
    /// Nonlinear hidden units of the teacher.
    #[arg(long, default_value_t = 8)]
    pub tanh_units: usize,
    /// Positive training pairs (as many negatives are added).
    #[arg(long, default_value_t = 200)]
    pub positives: usize,
    /// Held-out contexts (one positive and one negative pair each).
    #[arg(long, default_value_t = 500)]
    pub test_contexts: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    /// Seed of the teacher network.
    #[arg(long, default_value_t = 7)]
    pub teacher_seed: u64,
    /// Seed of the sampled pairs.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// PAR1 output with training pairs and teacher scores.
    #[arg(long)]
    pub out: PathBuf,
    /// PAR1 output with held-out pairs.
    #[arg(long)]
    pub out_test: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistillArgs {
    /// PAR1 training pairs with teacher scores.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Weight of the squared teacher gap; 0 trains on labels only.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 60)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    /// Embedding dimension of the encoders.
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// PAR1 held-out pairs; reports their mean teacher gap and pair accuracy.
    #[arg(long)]
    pub test_pairs: Option<PathBuf>,
    /// DENC output.
    #[arg(long)]
    pub out_encoder: PathBuf,
    /// CSV of the per-epoch loss; printed summary only when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// SCRN model; only exact search is timed when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub contexts: PathBuf,
    #[arg(long)]
    pub candidates: PathBuf,
    /// Untimed passes over the contexts.
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    /// Timed passes over the contexts.
    #[arg(long, default_value_t = 5)]
    pub iters: usize,
}
