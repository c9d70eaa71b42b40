use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use shortphd::detector::OffTopicSet;
use shortphd::embedding::{EmbeddingProviderSpec, ProviderKind, ProviderOptions};
use shortphd::eval::synthetic::Manifold;
use shortphd::eval::{Attack, Method};
use shortphd::phd::EstimatorConfig;

use crate::UsageError;

#[derive(Debug, Parser)]
#[command(name = "shortphd", version, about = "Persistent-homology-dimension scoring for machine-generated text detection")]
pub struct Cli {
    /// Worker threads (defaults to the number of cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score one text.
    Score(ScoreArgs),
    /// Score a labelled JSON-lines corpus and report AUC and TPR.
    Eval(EvalArgs),
    /// Pick a decision threshold from labelled scores.
    Calibrate(CalibrateArgs),
    /// Estimate the dimension of synthetic manifolds with known dimension.
    SynthValidate(SynthArgs),
    /// Inspect or clear the embedding cache.
    Cache(CacheArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProviderArgs {
    /// Embedding source: file, remote or synthetic. Required for scoring.
    #[arg(long, value_parser = parse_kind)]
    pub provider: Option<ProviderKind>,
    /// Directory, base URL, or `<cube|sphere>:<d|auto>:<D>` for the synthetic double. Required for scoring.
    #[arg(long)]
    pub location: Option<String>,
    /// Model identifier; part of every cache key. Defaults to `synthetic` for the synthetic double.
    #[arg(long)]
    pub model_id: Option<String>,
    /// Keep at most this many tokens per text.
    #[arg(long = "max-tokens", visible_alias = "truncate")]
    pub max_tokens: Option<usize>,
    #[arg(long, env = "SHORTPHD_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Bypass the embedding cache.
    #[arg(long)]
    pub no_cache: bool,
    /// Concurrent requests to a remote endpoint.
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    #[arg(long, default_value_t = 120)]
    pub timeout_secs: u64,
}

fn parse_kind(s: &str) -> Result<ProviderKind, String> {
    s.parse()
}

impl ProviderArgs {
    pub fn spec(&self) -> Result<EmbeddingProviderSpec, UsageError> {
        let (Some(kind), Some(location)) = (self.provider, &self.location) else {
            return Err(UsageError("--provider and --location are required".into()));
        };
        let model_id = match (&self.model_id, kind) {
            (Some(m), _) => m.clone(),
            (None, ProviderKind::SyntheticDouble) => "synthetic".to_string(),
            (None, _) => return Err(UsageError("--model-id is required for file and remote providers".into())),
        };
        Ok(EmbeddingProviderSpec {
            kind,
            location: location.clone(),
            model_id,
            max_tokens: self.max_tokens,
        })
    }

    pub fn options(&self) -> Result<ProviderOptions, UsageError> {
        if self.max_in_flight == 0 {
            return Err(UsageError("--max-in-flight must be at least 1".into()));
        }
        Ok(ProviderOptions {
            cache_dir: if self.no_cache { None } else { self.cache_dir.clone() },
            max_in_flight: self.max_in_flight,
            timeout: Duration::from_secs(self.timeout_secs),
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    #[arg(long, default_value_t = EstimatorConfig::default().alpha)]
    pub alpha: f64,
    #[arg(long, default_value_t = EstimatorConfig::default().seed)]
    pub seed: u64,
    #[arg(long, default_value_t = EstimatorConfig::default().outer_restarts)]
    pub outer_restarts: usize,
    #[arg(long, default_value_t = EstimatorConfig::default().inner_restarts)]
    pub inner_restarts: usize,
    #[arg(long, default_value_t = EstimatorConfig::default().min_subsample)]
    pub min_subsample: usize,
    #[arg(long, default_value_t = EstimatorConfig::default().schedule_points)]
    pub schedule_points: usize,
}

impl EstimatorArgs {
    pub fn config(&self) -> Result<EstimatorConfig, UsageError> {
        let config = EstimatorConfig {
            alpha: self.alpha,
            min_subsample: self.min_subsample,
            schedule_points: self.schedule_points,
            inner_restarts: self.inner_restarts,
            outer_restarts: self.outer_restarts,
            seed: self.seed,
        };
        config.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Args)]
pub struct OciArgs {
    /// Off-topic pieces: `builtin` or a file of blank-line separated pieces.
    #[arg(long, default_value = "builtin")]
    pub oci: String,
    /// Use only the first K pieces.
    #[arg(long, value_name = "K")]
    pub oci_pieces: Option<usize>,
}

impl OciArgs {
    pub fn load(&self) -> Result<OffTopicSet, UsageError> {
        let set = if self.oci == "builtin" {
            OffTopicSet::builtin()
        } else {
            OffTopicSet::load(self.oci.as_ref()).map_err(|e| UsageError(e.to_string()))?
        };
        match self.oci_pieces {
            Some(k) => set.truncated(k).map_err(|e| UsageError(e.to_string())),
            None => Ok(set),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Phd,
    ShortPhd,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Phd => Method::Phd,
            MethodArg::ShortPhd => Method::ShortPhd,
        }
    }
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Text to score; read from --input or stdin when absent.
    #[arg(long, conflicts_with = "input")]
    pub text: Option<String>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MethodArg::ShortPhd)]
    pub method: MethodArg,
    /// Also report a label: human-written when the score exceeds this.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Also report the plain PHD of the unmodified text.
    #[arg(long)]
    pub baseline: bool,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub oci: OciArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::ShortPhd)]
    pub method: MethodArg,
    /// Perturb machine-labelled texts before scoring.
    #[arg(long, value_parser = parse_attack)]
    pub attack: Option<Attack>,
    #[arg(long, default_value_t = shortphd::eval::harness::DEFAULT_FPR_BUDGET)]
    pub fpr_budget: f64,
    /// Also write the JSON document to this file.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Write `id,label,score` rows to this file.
    #[arg(long)]
    pub scores_csv: Option<PathBuf>,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub oci: OciArgs,
}

fn parse_attack(s: &str) -> Result<Attack, String> {
    s.parse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    MaxYouden,
    FprBudget,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// JSON document written by `eval --output`.
    #[arg(long, conflicts_with = "corpus", required_unless_present = "corpus")]
    pub report: Option<PathBuf>,
    /// Corpus to score first; takes the same scoring options as `eval`.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PolicyArg::MaxYouden)]
    pub policy: PolicyArg,
    #[arg(long, default_value_t = shortphd::eval::harness::DEFAULT_FPR_BUDGET)]
    pub fpr_budget: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::ShortPhd)]
    pub method: MethodArg,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub oci: OciArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_parser = parse_manifold, default_value = "cube")]
    pub manifold: Manifold,
    /// Comma-separated intrinsic dimensions.
    #[arg(long, value_delimiter = ',', required = true)]
    pub intrinsic_dim: Vec<usize>,
    #[arg(long, default_value_t = 64)]
    pub ambient_dim: usize,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Number of clouds per dimension; cloud `i` uses seed `--seed + i`.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// Fail (exit 1) when a median's relative error exceeds this.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

fn parse_manifold(s: &str) -> Result<Manifold, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct CacheArgs {
    #[arg(long, env = "SHORTPHD_CACHE_DIR", required = true)]
    pub cache_dir: PathBuf,
    #[command(subcommand)]
    pub action: CacheAction,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum CacheAction {
    /// List cached embeddings.
    List,
    /// Count cached embeddings and their total size.
    Stats,
    /// Delete every cached embedding.
    Clear,
}
