//! Short-text detection by off-topic content insertion.
//!
//! A fixed set of unrelated text pieces is prefixed to the input one at a
//! time; each concatenation is embedded and its PH₀ dimension estimated. The
//! mean over pieces is the score, and texts scoring above a threshold are
//! called human-written.

mod oci;
mod probability;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbeddingError, EmbeddingProvider};
use crate::phd::{estimate_phd, EstimatorConfig, EstimatorError, PhdEstimate};
use crate::rng;

pub use oci::{insert_off_topic, OffTopicSet, OFF_TOPIC_SEPARATOR};
pub use probability::{detection_probability, normal_cdf, ClassStats};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("text must be non-empty")]
    EmptyText,
    #[error("invalid off-topic set: {0}")]
    InvalidOffTopicSet(String),
    #[error("text embeds to {n} tokens, fewer than min_subsample = {min}")]
    CloudTooSmall { n: usize, min: usize },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Estimator(EstimatorError),
    #[error("every off-topic insertion failed; piece {}: {}", .0[0].piece, .0[0].message)]
    AllInsertionsFailed(Vec<InsertionFailure>),
    #[error("both classes have zero variance")]
    ZeroVariance,
}

impl From<EstimatorError> for DetectorError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::CloudTooSmall { n, min } => DetectorError::CloudTooSmall { n, min },
            other => DetectorError::Estimator(other),
        }
    }
}

impl DetectorError {
    /// True when the text is simply too short to score.
    pub fn is_too_short(&self) -> bool {
        match self {
            DetectorError::CloudTooSmall { .. }
            | DetectorError::Estimator(EstimatorError::ScheduleTooShort { .. })
            | DetectorError::Embedding(EmbeddingError::TooFewTokens { .. }) => true,
            DetectorError::AllInsertionsFailed(fails) => fails.iter().all(|f| f.kind == FailureKind::TooShort),
            _ => false,
        }
    }

    pub fn is_provider_error(&self) -> bool {
        match self {
            DetectorError::Embedding(EmbeddingError::TooFewTokens { .. }) => false,
            DetectorError::Embedding(_) => true,
            DetectorError::AllInsertionsFailed(fails) => fails.iter().any(|f| f.kind == FailureKind::Provider),
            _ => false,
        }
    }

    fn failure_kind(&self) -> FailureKind {
        if self.is_too_short() {
            FailureKind::TooShort
        } else if self.is_provider_error() {
            FailureKind::Provider
        } else {
            FailureKind::Estimation
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    TooShort,
    Provider,
    Estimation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionFailure {
    pub piece: usize,
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsertionScore {
    pub piece: usize,
    pub dimension: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    /// Mean of `per_insertion` dimensions.
    pub score: f64,
    pub per_insertion: Vec<InsertionScore>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<InsertionFailure>,
    /// Plain PHD of the unmodified text, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_phd: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    HumanWritten,
    LlmGenerated,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Label::HumanWritten => "human-written",
            Label::LlmGenerated => "llm-generated",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionDecision {
    pub label: Label,
    pub score: f64,
    pub threshold: f64,
}

/// Human-written iff `score > threshold`; a tie goes to llm-generated.
pub fn classify(score: f64, threshold: f64) -> DetectionDecision {
    let label = if score > threshold { Label::HumanWritten } else { Label::LlmGenerated };
    DetectionDecision { label, score, threshold }
}

/// Embeds `text` and estimates the PHD of its token cloud.
pub fn estimate_text(
    text: &str,
    provider: &dyn EmbeddingProvider,
    config: &EstimatorConfig,
) -> Result<PhdEstimate, DetectorError> {
    if text.is_empty() {
        return Err(DetectorError::EmptyText);
    }
    config.validate()?;
    let cloud = provider.embed(text)?;
    if cloud.n() < config.min_subsample {
        return Err(DetectorError::CloudTooSmall { n: cloud.n(), min: config.min_subsample });
    }
    Ok(estimate_phd(&cloud, config)?)
}

/// Plain PHD score of the raw text.
pub fn score_phd(text: &str, provider: &dyn EmbeddingProvider, config: &EstimatorConfig) -> Result<f64, DetectorError> {
    estimate_text(text, provider, config).map(|e| e.dimension)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ShortPhdOptions {
    /// Also compute the plain PHD of the unmodified text.
    pub with_baseline: bool,
}

/// Estimator configuration for one insertion. The seed is keyed by the piece's
/// content, so identical pieces give identical estimates wherever they sit in
/// the set.
pub fn insertion_config(config: &EstimatorConfig, piece: &str) -> EstimatorConfig {
    config.with_seed(rng::derive_seed_from_bytes(config.seed, piece.as_bytes()))
}

pub fn score_short_phd(
    text: &str,
    oci: &OffTopicSet,
    provider: &dyn EmbeddingProvider,
    config: &EstimatorConfig,
    options: ShortPhdOptions,
) -> Result<DetectionScore, DetectorError> {
    if text.is_empty() {
        return Err(DetectorError::EmptyText);
    }
    config.validate()?;

    let outcomes: Vec<Result<f64, DetectorError>> = oci
        .pieces()
        .par_iter()
        .map(|piece| {
            let joined = insert_off_topic(piece, text)?;
            score_phd(&joined, provider, &insertion_config(config, piece))
        })
        .collect();

    let mut per_insertion = Vec::new();
    let mut failures = Vec::new();
    for (piece, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(dimension) => per_insertion.push(InsertionScore { piece, dimension }),
            Err(e) => failures.push(InsertionFailure { piece, kind: e.failure_kind(), message: e.to_string() }),
        }
    }
    if per_insertion.is_empty() {
        return Err(DetectorError::AllInsertionsFailed(failures));
    }
    let score = per_insertion.iter().map(|s| s.dimension).sum::<f64>() / per_insertion.len() as f64;

    let baseline_phd = if options.with_baseline { Some(score_phd(text, provider, config)?) } else { None };
    Ok(DetectionScore { score, per_insertion, failures, baseline_phd })
}
