use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "slrr", version, about = "Subspace clustering with a closed-form symmetric low-rank representation")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster the columns of a data matrix.
    Cluster(ClusterArgs),
    /// Run a full-factorial grid over lambda, alpha and rank.
    Sweep(SweepArgs),
    /// Write a synthetic union-of-subspaces data set.
    Synth(SynthArgs),
    /// Time the core stages on Gaussian data of growing size.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct InputArgs {
    /// Data matrix (comma or whitespace delimited text).
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Ground-truth labels, one 1-based label per line.
    #[arg(long)]
    pub labels: Option<PathBuf>,

    /// `columns` if each column is a sample, `rows` if each line is one.
    #[arg(long)]
    pub layout: Option<String>,

    /// Rescale the input so its entries span [0, 1] before anything else.
    #[arg(long)]
    pub unit_scale: bool,

    /// Replace this fraction of entries with uniform [0, 1] noise.
    #[arg(long)]
    pub corrupt_ratio: Option<f64>,

    /// Directory for all artifacts (created if missing).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Flat key = value file; flags given here take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Parameter preset: motion, motion-pca, face-pca, face-rp, face-rpca.
    #[arg(long)]
    pub preset: Option<String>,

    /// Low-rank recovery: pca, rpca, rp or identity.
    #[arg(long)]
    pub recovery: Option<String>,

    /// Regularization weight of the representation.
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Affinity exponent.
    #[arg(long)]
    pub alpha: Option<u32>,

    /// Target rank for pca / rp: an integer or a per-cluster multiple like 10n.
    #[arg(long)]
    pub rank: Option<String>,

    /// Number of clusters (defaults to the label count when labels are given).
    #[arg(long)]
    pub k: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Append a row of ones to the surrogate before solving.
    #[arg(long)]
    pub affine_ones: bool,

    /// Sparse-error weight for rpca (default 1/sqrt(max(m, n))).
    #[arg(long)]
    pub rpca_lambda: Option<f64>,

    /// Center the data before pca.
    #[arg(long)]
    pub center: bool,

    /// Affinity variant for debugging: cosine, raw-inner or abs-sum.
    #[arg(long, hide = true)]
    pub affinity: Option<String>,

    /// Embedding side for the cosine affinity: rows or cols.
    #[arg(long, hide = true)]
    pub side: Option<String>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub model: ModelArgs,

    /// Repeat with seeds seed, seed+1, ... and report error statistics.
    #[arg(long)]
    pub trials: Option<usize>,

    /// Also write Z, A (and E for rpca) as text matrices.
    #[arg(long)]
    pub save_matrices: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub model: ModelArgs,

    /// Comma-separated lambda values.
    #[arg(long)]
    pub lambda_grid: Option<String>,

    /// Comma-separated alpha values.
    #[arg(long)]
    pub alpha_grid: Option<String>,

    /// Comma-separated ranks (e.g. 4n,10n,40 or none).
    #[arg(long)]
    pub rank_grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of subspaces.
    #[arg(long, default_value_t = 5)]
    pub k: usize,

    /// Dimension of each subspace.
    #[arg(long, default_value_t = 4)]
    pub dim: usize,

    /// Ambient dimension.
    #[arg(long, default_value_t = 50)]
    pub ambient: usize,

    /// Points drawn from each subspace.
    #[arg(long, default_value_t = 40)]
    pub points: usize,

    /// Standard deviation of additive Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Require the subspaces to be independent.
    #[arg(long)]
    pub independent: bool,

    /// Rescale to [0, 1] before writing.
    #[arg(long)]
    pub unit_scale: bool,

    /// Also write a copy with this fraction of entries corrupted.
    #[arg(long)]
    pub corrupt_ratio: Option<f64>,

    /// Seed of the corruption (default seed + 1).
    #[arg(long)]
    pub corrupt_seed: Option<u64>,

    /// Layout of the written matrix: columns or rows.
    #[arg(long, default_value = "columns")]
    pub layout: String,

    #[arg(long, default_value = "slrr-synth")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Comma-separated, strictly ascending sample counts.
    #[arg(long, default_value = "200,400,800")]
    pub sizes: String,

    /// Ambient dimension of the Gaussian data.
    #[arg(long, default_value_t = 30)]
    pub m: usize,

    /// Runs per size; the fastest is kept.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,

    /// Write bench.json here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}
