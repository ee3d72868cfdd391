use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use smf_core::identifiability::{DEFAULT_SAMPLER_STEP, DEFAULT_ZERO_TOL};
use smf_core::{Mode, Orientation, SolverConfig};

#[derive(Debug, Parser)]
#[command(
    name = "smf",
    version,
    about = "Stochastic matrix factorization: estimation, identification analysis, and the face and topic pipelines"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate W and H from a data matrix.
    Factorize(FactorizeArgs),
    /// Uniqueness test and identified-set bounds for a factor pair.
    Analyze(AnalyzeArgs),
    /// Face-image pipeline.
    #[command(subcommand)]
    Faces(FacesCommand),
    /// Topic-model pipeline.
    #[command(subcommand)]
    Topics(TopicsCommand),
    /// Write synthetic instances with known ground truth.
    #[command(subcommand)]
    Generate(GenerateCommand),
    /// Re-run a command from its manifest and compare the outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Directory receiving every output file.
    #[arg(long, default_value = "smf-out")]
    pub out_dir: PathBuf,
    /// Write matrices in the SMFMAT01 binary format instead of CSV.
    #[arg(long)]
    pub binary: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long)]
    pub rank: usize,
    /// Penalty weights as SUM1,NONNEG.
    #[arg(long, value_parser = parse_weights, default_value = "100,10")]
    pub weights: (f64, f64),
    #[arg(long, default_value = "penalty", value_parser = parse_mode)]
    pub mode: Mode,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    /// Relative objective change that counts as converged.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Accelerated gradient passes per block in each alternating proposal.
    #[arg(long, default_value_t = 20)]
    pub inner_iters: usize,
    /// Worker threads for restarts.
    #[arg(long, env = "SMF_THREADS", default_value_t = 1)]
    pub threads: usize,
}

impl SolverArgs {
    pub fn config(&self, orientation: Orientation) -> SolverConfig {
        let mut c = SolverConfig::new(self.rank, orientation);
        c.penalty_sum1 = self.weights.0;
        c.penalty_nonneg = self.weights.1;
        c.mode = self.mode;
        c.restarts = self.restarts;
        c.seed = self.seed;
        c.max_iter = self.max_iter;
        c.conv_tol = self.tol;
        c.inner_iters = self.inner_iters;
        c.threads = self.threads;
        c
    }
}

#[derive(Debug, Clone, Args)]
pub struct FactorizeArgs {
    /// Data matrix (CSV or SMFMAT01 binary).
    pub input: PathBuf,
    /// Which factor has rows summing to one: h (topics), w (images) or both.
    #[arg(long, value_parser = parse_orientation)]
    pub orientation: Orientation,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    pub w: PathBuf,
    pub h: PathBuf,
    #[arg(long, default_value = "both", value_parser = parse_orientation)]
    pub orientation: Orientation,
    /// Entries at or below this value count as zero.
    #[arg(long, default_value_t = DEFAULT_ZERO_TOL)]
    pub zero_tol: f64,
    /// Feasible mixing matrices to sample for the oracle summary (0 skips it).
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random-walk step of the sampler.
    #[arg(long, default_value_t = DEFAULT_SAMPLER_STEP)]
    pub step: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Subcommand)]
pub enum FacesCommand {
    /// Read a directory of PGM images into a data matrix, one image per row.
    Ingest(FacesIngestArgs),
    /// Render W H rows back into PGM images.
    Reconstruct(FacesReconstructArgs),
    /// Nearest stored image, in weight space, to a query image.
    Retrieve(FacesRetrieveArgs),
    /// Mean squared reconstruction error per pixel.
    Error(FacesErrorArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FacesIngestArgs {
    pub dir: PathBuf,
    /// Keep full resolution instead of 2x2 averaging.
    #[arg(long)]
    pub no_downsample: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FacesReconstructArgs {
    pub w: PathBuf,
    pub h: PathBuf,
    /// Rows of W to render (default: all).
    #[arg(long, value_delimiter = ',')]
    pub rows: Vec<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FacesRetrieveArgs {
    pub query: PathBuf,
    #[arg(long)]
    pub w: PathBuf,
    #[arg(long)]
    pub h: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FacesErrorArgs {
    pub x: PathBuf,
    #[arg(long)]
    pub w: PathBuf,
    #[arg(long)]
    pub h: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Subcommand)]
pub enum TopicsCommand {
    /// Tokenize one-document-per-line text into counts and a vocabulary.
    Build(TopicsBuildArgs),
    /// Fit topics to document-term counts.
    Fit(TopicsFitArgs),
    /// Most probable terms of every topic.
    TopTerms(TopicsTopTermsArgs),
    /// Documents per most-probable topic.
    Histogram(TopicsHistogramArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TopicsBuildArgs {
    pub corpus: PathBuf,
    /// One stop word per line.
    #[arg(long)]
    pub stop_words: Option<PathBuf>,
    /// Minimum share of documents a term must appear in.
    #[arg(long, default_value_t = 0.005)]
    pub min_doc_fraction: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TopicsFitArgs {
    /// Document-term counts.
    pub doc_term: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TopicsTopTermsArgs {
    pub h: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TopicsHistogramArgs {
    pub w: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Subcommand)]
pub enum GenerateCommand {
    /// X = W H + noise with optional anchors.
    Matrix(GenerateMatrixArgs),
    /// Synthetic 19x19 PGM images mixed from blob bases.
    Faces(GenerateFacesArgs),
    /// Block-anchored bag-of-words corpus as one document per line.
    Corpus(GenerateCorpusArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenerateMatrixArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub rank: usize,
    #[arg(long, value_parser = parse_orientation, default_value = "w")]
    pub orientation: Orientation,
    #[arg(long)]
    pub no_anchors: bool,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateFacesArgs {
    #[arg(long, default_value_t = 100)]
    pub images: usize,
    #[arg(long, default_value_t = 10)]
    pub basis: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateCorpusArgs {
    #[arg(long, default_value_t = 1000)]
    pub docs: usize,
    #[arg(long, default_value_t = 360)]
    pub terms: usize,
    #[arg(long, default_value_t = 20)]
    pub topics: usize,
    #[arg(long, default_value_t = 200)]
    pub doc_len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Where to write the replayed outputs (default: the recorded directory).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl Command {
    pub fn out_args_mut(&mut self) -> Option<&mut OutArgs> {
        Some(match self {
            Command::Factorize(a) => &mut a.out,
            Command::Analyze(a) => &mut a.out,
            Command::Faces(FacesCommand::Ingest(a)) => &mut a.out,
            Command::Faces(FacesCommand::Reconstruct(a)) => &mut a.out,
            Command::Faces(FacesCommand::Retrieve(a)) => &mut a.out,
            Command::Faces(FacesCommand::Error(a)) => &mut a.out,
            Command::Topics(TopicsCommand::Build(a)) => &mut a.out,
            Command::Topics(TopicsCommand::Fit(a)) => &mut a.out,
            Command::Topics(TopicsCommand::TopTerms(a)) => &mut a.out,
            Command::Topics(TopicsCommand::Histogram(a)) => &mut a.out,
            Command::Generate(GenerateCommand::Matrix(a)) => &mut a.out,
            Command::Generate(GenerateCommand::Faces(a)) => &mut a.out,
            Command::Generate(GenerateCommand::Corpus(a)) => &mut a.out,
            Command::Replay(_) => return None,
        })
    }

    /// Dotted command path recorded in manifests, e.g. `topics.fit`.
    pub fn name(&self) -> &'static str {
        match self {
            Command::Factorize(_) => "factorize",
            Command::Analyze(_) => "analyze",
            Command::Faces(FacesCommand::Ingest(_)) => "faces.ingest",
            Command::Faces(FacesCommand::Reconstruct(_)) => "faces.reconstruct",
            Command::Faces(FacesCommand::Retrieve(_)) => "faces.retrieve",
            Command::Faces(FacesCommand::Error(_)) => "faces.error",
            Command::Topics(TopicsCommand::Build(_)) => "topics.build",
            Command::Topics(TopicsCommand::Fit(_)) => "topics.fit",
            Command::Topics(TopicsCommand::TopTerms(_)) => "topics.top-terms",
            Command::Topics(TopicsCommand::Histogram(_)) => "topics.histogram",
            Command::Generate(GenerateCommand::Matrix(_)) => "generate.matrix",
            Command::Generate(GenerateCommand::Faces(_)) => "generate.faces",
            Command::Generate(GenerateCommand::Corpus(_)) => "generate.corpus",
            Command::Replay(_) => "replay",
        }
    }
}

fn parse_orientation(s: &str) -> Result<Orientation, String> {
    s.parse().map_err(|e: smf_core::SmfError| e.to_string())
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: smf_core::SmfError| e.to_string())
}

fn parse_weights(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected SUM1,NONNEG, got {s:?}"));
    }
    let parse = |p: &str| p.parse::<f64>().map_err(|_| format!("{p:?} is not a number"));
    let (a, b) = (parse(parts[0])?, parse(parts[1])?);
    if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
        return Err(format!("weights must be finite and non-negative, got {s:?}"));
    }
    Ok((a, b))
}
