use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "xvanon", version, about = "Distribution-preserving speaker-embedding anonymization")]
pub struct Cli {
    /// Worker threads for data-parallel loops (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one PCA+GMM model per gender stratum.
    Train(TrainArgs),
    /// Replace embeddings with fakes sampled from trained models.
    Anonymize(AnonymizeArgs),
    /// Replace embeddings with pool-averaging baseline fakes.
    Baseline(BaselineArgs),
    /// KS statistic between the cross-similarity distributions of two files.
    EvalKs(EvalKsArgs),
    /// Retained-variance × component-count KS sweep.
    Sweep(SweepArgs),
    /// Attacker linkage metrics (EER, Cllr, Cllr_min) per scenario and strategy.
    AsvSim(AsvSimArgs),
    /// Generate a synthetic embedding population.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Kaldi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenderArg {
    Male,
    Female,
    Unspecified,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Oo,
    Oa,
    Aa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    None,
    Ours,
    #[value(name = "ours_fd", alias = "ours-fd")]
    OursFd,
    Baseline,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Cosine,
    Euclidean,
}

/// Embedding input with optional Kaldi sidecars.
#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Kaldi `utt2spk` map for text-vector input.
    #[arg(long)]
    pub utt2spk: Option<PathBuf>,
    /// Kaldi `spk2gender` map for text-vector input.
    #[arg(long)]
    pub spk2gender: Option<PathBuf>,
    /// Only use this gender stratum.
    #[arg(long, value_enum)]
    pub gender: Option<GenderArg>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.95)]
    pub variance: f64,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub components: u64,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_iterations: u64,
    #[arg(long, default_value_t = 1e-16)]
    pub tolerance: f64,
    /// Extra EM runs with derived seeds; the best log-likelihood is kept.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub restarts: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path; `{gender}` is replaced by the stratum name, otherwise the
    /// stratum is appended to the file stem.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnonymizeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Model files (one per gender stratum).
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// One fake per utterance instead of one per speaker.
    #[arg(long)]
    pub per_utterance: bool,
    /// Forced dissimilarity: redraw fakes too similar to the original.
    #[arg(long)]
    pub fd: bool,
    #[arg(long, default_value_t = 0.8, allow_hyphen_values = true)]
    pub fd_threshold: f64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_attempts: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Pool of population embeddings to average from.
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_far: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_avg: u64,
    #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
    pub metric: MetricArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub per_utterance: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalKsArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// KS report (`gender,n_a,n_b,ks`).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional eCDF dump of the first file's cross-similarities.
    #[arg(long)]
    pub ecdf_a: Option<PathBuf>,
    /// Optional eCDF dump of the second file's cross-similarities.
    #[arg(long)]
    pub ecdf_b: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.90,0.95,0.99")]
    pub variances: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20,50")]
    pub components: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AsvSimArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Population for training/baseline averaging. When omitted the input is
    /// split speaker-disjointly into pool and evaluation halves.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Pre-trained models; otherwise models are trained on the pool.
    #[arg(long)]
    pub model: Vec<PathBuf>,
    #[arg(long, value_enum, default_values_t = vec![ScenarioArg::Oo, ScenarioArg::Oa, ScenarioArg::Aa])]
    pub scenario: Vec<ScenarioArg>,
    #[arg(long, value_enum, default_values_t = vec![StrategyArg::Ours, StrategyArg::Baseline])]
    pub strategy: Vec<StrategyArg>,
    #[arg(long, default_value_t = 0.95)]
    pub variance: f64,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub components: u64,
    #[arg(long, default_value_t = 0.8, allow_hyphen_values = true)]
    pub fd_threshold: f64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_attempts: u32,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_far: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_avg: u64,
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    pub speakers: u64,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub utts: u64,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    /// Mode centers per gender.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub modes: u64,
    #[arg(long, default_value_t = 1.0)]
    pub between: f64,
    #[arg(long, default_value_t = 0.6)]
    pub jitter: f64,
    #[arg(long, default_value_t = 0.5)]
    pub within: f64,
    #[arg(long, default_value_t = 0.5)]
    pub male_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}
