use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Closed-vocabulary multi-label annotation by embedding retrieval.
#[derive(Debug, Parser)]
#[command(name = "lexlabel", version, about)]
pub struct Cli {
    /// TOML file with defaults; flags and LEXLABEL_* variables take precedence.
    #[arg(long, global = true, env = "LEXLABEL_CONFIG")]
    pub config: Option<PathBuf>,

    /// Print the JSON report on stdout instead of the table.
    #[arg(long, global = true)]
    pub json: bool,

    /// Where to write the run manifest. Defaults to `<out>.manifest.json`.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label index operations.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Annotate documents.
    Predict(PredictArgs),
    /// Choose the output size k on a validation set.
    Tune(TuneArgs),
    /// Score predictions against gold labels.
    Evaluate(EvaluateArgs),
    /// Count predicted labels that are not in the taxonomy.
    Audit(AuditArgs),
    /// Sweep training-set sizes: subsample, tune, evaluate.
    Scaling(ScalingArgs),
    /// Corpus statistics.
    Stats(StatsArgs),
    /// FLOPs of fine-tuning versus retrieval.
    Cost(CostArgs),
    /// Run the HTTP annotation service.
    Serve(ServeArgs),
    /// Write a seeded synthetic corpus with vectors.
    Synth(SynthArgs),
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Embed label descriptions and write an index directory.
    Build(IndexBuildArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyArg {
    LabelSimilarity,
    NeighborVote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveArg {
    MicroF1,
    MacroF1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UniverseArg {
    GoldSupported,
    FullTaxonomy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    Clustered,
    Exact,
}

/// How to obtain embeddings for texts that have no precomputed vector.
#[derive(Debug, Clone, Default, Args)]
pub struct EmbedArgs {
    /// Base URL of the embedding service (`POST {url}/embed`).
    #[arg(long, env = "LEXLABEL_SERVICE_URL")]
    pub service_url: Option<String>,
    /// Model name sent to the embedding service.
    #[arg(long, env = "LEXLABEL_MODEL")]
    pub model: Option<String>,
    /// Bearer token for the embedding service.
    #[arg(long, env = "LEXLABEL_AUTH_TOKEN", hide_env_values = true)]
    pub auth_token: Option<String>,
    #[arg(long)]
    pub timeout_secs: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    /// Persistent embedding cache directory.
    #[arg(long, env = "LEXLABEL_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Prepended to every text before embedding.
    #[arg(long)]
    pub prefix: Option<String>,
    /// Use offline feature hashing of this dimension instead of a service.
    #[arg(long)]
    pub hashing_dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IndexBuildArgs {
    #[arg(long)]
    pub taxonomy: PathBuf,
    /// Precomputed label vectors keyed by label id.
    #[arg(long)]
    pub label_vectors: Option<PathBuf>,
    #[command(flatten)]
    pub embed: EmbedArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Strategy settings shared by predict and tune.
#[derive(Debug, Clone, Args)]
pub struct StrategyArgs {
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    /// Annotated training documents, required for neighbor voting.
    #[arg(long)]
    pub train_docs: Option<PathBuf>,
    /// Nearest training documents consulted by neighbor voting.
    #[arg(long)]
    pub vote_neighbors: Option<usize>,
    /// Drop labels scoring below this after taking the top k.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Index directory written by `index build`.
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub docs: PathBuf,
    /// Precomputed document vectors keyed by document id.
    #[arg(long)]
    pub doc_vectors: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Take k from a tuning report written by `tune`.
    #[arg(long, conflicts_with = "k")]
    pub k_from: Option<PathBuf>,
    #[command(flatten)]
    pub strategy: StrategyArgs,
    /// Skip failing documents instead of aborting.
    #[arg(long)]
    pub lenient: bool,
    #[command(flatten)]
    pub embed: EmbedArgs,
    /// predictions.jsonl to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub val_docs: PathBuf,
    #[arg(long)]
    pub doc_vectors: Option<PathBuf>,
    /// `1..20`, `5..=7` or `1,3,5`.
    #[arg(long)]
    pub k_grid: Option<String>,
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveArg>,
    #[arg(long, value_enum)]
    pub macro_universe: Option<UniverseArg>,
    #[command(flatten)]
    pub strategy: StrategyArgs,
    #[command(flatten)]
    pub embed: EmbedArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub preds: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[arg(long, value_enum)]
    pub macro_universe: Option<UniverseArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub preds: PathBuf,
    #[arg(long)]
    pub taxonomy: PathBuf,
    /// Also accept label names, not only ids.
    #[arg(long)]
    pub accept_names: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[arg(long)]
    pub docs: PathBuf,
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[arg(long)]
    pub doc_vectors: Option<PathBuf>,
    /// Label vectors; when given, a label-similarity reference row is added.
    #[arg(long)]
    pub label_vectors: Option<PathBuf>,
    /// Comma-separated sizes; `full` means the whole training split.
    #[arg(long)]
    pub sizes: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    #[arg(long)]
    pub vote_neighbors: Option<usize>,
    #[arg(long)]
    pub k_grid: Option<String>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[command(flatten)]
    pub embed: EmbedArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub docs: PathBuf,
    #[arg(long)]
    pub taxonomy: PathBuf,
    /// Row name in the table.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// lora or full-ft.
    #[arg(long)]
    pub ft_preset: Option<String>,
    /// retrieval.
    #[arg(long)]
    pub ret_preset: Option<String>,
    #[arg(long)]
    pub ft_params: Option<f64>,
    #[arg(long)]
    pub train_samples: Option<f64>,
    #[arg(long)]
    pub epochs: Option<f64>,
    #[arg(long)]
    pub ft_seq_len: Option<f64>,
    #[arg(long)]
    pub ret_params: Option<f64>,
    #[arg(long)]
    pub test_samples: Option<f64>,
    #[arg(long)]
    pub ret_seq_len: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long, env = "LEXLABEL_LISTEN")]
    pub listen: Option<String>,
    /// Default output size for requests without `k`.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, conflicts_with = "k")]
    pub k_from: Option<PathBuf>,
    #[command(flatten)]
    pub embed: EmbedArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "clustered")]
    pub kind: SynthKind,
    #[arg(long)]
    pub labels: Option<usize>,
    #[arg(long)]
    pub docs: Option<usize>,
    /// Vector dimension (clustered only; exact uses one axis per label).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Gold labels per document (exact) or the maximum (clustered).
    #[arg(long)]
    pub labels_per_doc: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}
