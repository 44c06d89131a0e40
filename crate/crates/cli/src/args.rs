use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "hypernb",
    version,
    about = "Weighted non-backtracking spectral clustering of non-uniform hypergraphs"
)]
pub struct Cli {
    /// Root seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "HYPERNB_THREADS")]
    pub threads: Option<usize>,
    /// Exit with code 3 when the run produced warnings.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Directory for relative output paths.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Sample a hypergraph and its community labels from a model.
    Sample(SampleArgs),
    /// Leading eigenvalues of the reduced non-backtracking matrix.
    Spectrum(SpectrumArgs),
    /// Two-way clustering from the leading eigenvectors.
    Cluster(ClusterArgs),
    /// Choose layer weights for a model.
    Weights(WeightsArgs),
    /// Check an exact identity on a hypergraph.
    Verify(VerifyArgs),
    /// Monte Carlo check of tree functionals.
    Tree(TreeArgs),
    /// Sample, embed, cluster and score in one go.
    Pipeline(PipelineArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::Spectrum(_) => "spectrum",
            Command::Cluster(_) => "cluster",
            Command::Weights(_) => "weights",
            Command::Verify(_) => "verify",
            Command::Tree(_) => "tree",
            Command::Pipeline(_) => "pipeline",
        }
    }
}

fn parse_weights(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected i,j")?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    /// Model configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub n: usize,
    /// Hypergraph output file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
    /// Randomly permute vertex ids instead of contiguous blocks.
    #[arg(long)]
    pub shuffle: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct GraphInput {
    /// Hypergraph file.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Comma-separated layer weights (default: all ones).
    #[arg(long, value_parser = parse_weights, allow_hyphen_values = true)]
    pub weights: Option<::std::vec::Vec<f64>>,
}

#[derive(Debug, Args, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub graph: GraphInput,
    /// Model configuration; supplies the theoretical bulk radius.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta_bulk: f64,
    /// Include the aggregated outlier vectors in the JSON output.
    #[arg(long)]
    pub emit_vectors: bool,
    /// Write `re,im` rows instead of JSON.
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Randomised rounding with a clamp.
    Alg1,
    Sign,
}

#[derive(Debug, Args, Serialize)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub graph: GraphInput,
    #[arg(long, value_enum, default_value_t = Mode::Alg1)]
    pub mode: Mode,
    /// Model configuration; needed by `alg1` unless `--threshold` is set.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Ground truth labels; the overlap is reported when given.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Assignment output file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Unit,
    R2,
    Numeric,
}

#[derive(Debug, Args, Serialize)]
pub struct WeightsArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Numeric)]
    pub method: Method,
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    IharaBass,
    ParityTime,
    EigRelation,
    JSpectrum,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub check: Check,
    #[command(flatten)]
    pub graph: GraphInput,
    /// Highest power for `parity-time`.
    #[arg(long, default_value_t = 6)]
    pub max_power: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TreeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// 0-based eigenvalue indices `i,j` of the weighted signal matrix.
    #[arg(long, value_parser = parse_pair, default_value = "0,1")]
    pub eig: (usize, usize),
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta_bulk: f64,
    #[arg(long)]
    pub shuffle: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
