//! Scores a labelled corpus and summarizes the separation between classes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::attack::{decoherence, Attack};
use super::corpus::{ClassLabel, CorpusRecord};
use super::metrics::{compute_auc, tpr_at_fpr, MetricsError};
use crate::detector::{
    detection_probability, score_phd, score_short_phd, ClassStats, DetectorError, FailureKind, OffTopicSet,
    ShortPhdOptions,
};
use crate::embedding::{EmbeddingProvider, EmbeddingProviderSpec};
use crate::phd::EstimatorConfig;
use crate::rng;

/// False-positive budget for the headline TPR figure.
pub const DEFAULT_FPR_BUDGET: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Phd,
    ShortPhd,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "phd" => Ok(Method::Phd),
            "short-phd" => Ok(Method::ShortPhd),
            other => Err(format!("unknown method {other:?} (expected phd or short-phd)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalPlan {
    pub method: Method,
    pub config: EstimatorConfig,
    pub oci: OffTopicSet,
    pub attack: Option<Attack>,
    pub fpr_budget: f64,
    /// Echoed into the report; the provider itself is passed to [`run_eval`].
    pub provider_spec: Option<EmbeddingProviderSpec>,
}

impl EvalPlan {
    pub fn new(method: Method, config: EstimatorConfig) -> Self {
        Self {
            method,
            config,
            oci: OffTopicSet::builtin(),
            attack: None,
            fpr_budget: DEFAULT_FPR_BUDGET,
            provider_spec: None,
        }
    }

    pub fn echo(&self) -> EvalConfigEcho {
        EvalConfigEcho {
            method: self.method,
            estimator: self.config,
            oci_source: (self.method == Method::ShortPhd).then(|| self.oci.source_label().to_string()),
            oci_pieces: (self.method == Method::ShortPhd).then(|| self.oci.len()),
            attack: self.attack,
            fpr_budget: self.fpr_budget,
            provider: self.provider_spec.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfigEcho {
    pub method: Method,
    pub estimator: EstimatorConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oci_source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oci_pieces: Option<usize>,
    pub attack: Option<Attack>,
    pub fpr_budget: f64,
    pub provider: Option<EmbeddingProviderSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordScore {
    pub id: String,
    pub label: ClassLabel,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedRecord {
    pub id: String,
    pub label: ClassLabel,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordFailure {
    pub id: String,
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid evaluation plan: {0}")]
    InvalidPlan(String),
    #[error("{} record(s) failed; first: {}: {}", .0.len(), .0[0].id, .0[0].message)]
    RecordFailures(Vec<RecordFailure>),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl EvalError {
    pub fn is_provider_error(&self) -> bool {
        matches!(self, EvalError::RecordFailures(f) if f.iter().any(|r| r.kind == FailureKind::Provider))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub auc: f64,
    pub tpr_at_fpr: f64,
    pub human_stats: ClassStats,
    pub machine_stats: ClassStats,
    /// Normal-approximation probability that a human text outscores a
    /// machine one; absent when both classes have zero spread.
    pub detection_probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub summary: EvalSummary,
    /// Sorted by id.
    pub per_record_scores: Vec<RecordScore>,
    pub excluded: Vec<ExcludedRecord>,
    pub config_echo: EvalConfigEcho,
}

/// Metrics over already-computed scores.
pub fn summarize(scores: &[RecordScore], fpr_budget: f64) -> Result<EvalSummary, EvalError> {
    let pick = |label| scores.iter().filter(|r| r.label == label).map(|r| r.score).collect::<Vec<_>>();
    let (human, machine) = (pick(ClassLabel::Human), pick(ClassLabel::Machine));
    let auc = compute_auc(&human, &machine)?;
    let tpr = tpr_at_fpr(&human, &machine, fpr_budget)?;
    let human_stats = ClassStats::from_scores(&human).expect("non-empty after compute_auc");
    let machine_stats = ClassStats::from_scores(&machine).expect("non-empty after compute_auc");
    Ok(EvalSummary {
        auc,
        tpr_at_fpr: tpr,
        human_stats,
        machine_stats,
        detection_probability: detection_probability(&human_stats, &machine_stats).ok(),
    })
}

impl EvalReport {
    /// Recomputes the summary from `per_record_scores` and checks it matches
    /// the stored one exactly.
    pub fn verify(&self) -> Result<(), String> {
        if self.per_record_scores.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err("per-record scores are not sorted by unique id".into());
        }
        let again = summarize(&self.per_record_scores, self.config_echo.fpr_budget).map_err(|e| e.to_string())?;
        let same = |a: f64, b: f64| a.to_bits() == b.to_bits();
        let s = &self.summary;
        if !same(again.auc, s.auc) || !same(again.tpr_at_fpr, s.tpr_at_fpr) {
            return Err(format!(
                "summary mismatch: auc {} vs {}, tpr {} vs {}",
                again.auc, s.auc, again.tpr_at_fpr, s.tpr_at_fpr
            ));
        }
        if again.human_stats != s.human_stats || again.machine_stats != s.machine_stats {
            return Err("class statistics mismatch".into());
        }
        Ok(())
    }

    /// `id,label,score` rows for the per-record scores.
    pub fn scores_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["id", "label", "score"]).expect("in-memory write");
        for r in &self.per_record_scores {
            w.write_record([r.id.as_str(), &r.label.to_string(), &r.score.to_string()]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv of utf-8 fields")
    }
}

/// Text actually scored for `record` under `plan`: machine records are
/// perturbed when an attack is set, with a stream keyed by the record id.
pub fn prepared_text(record: &CorpusRecord, plan: &EvalPlan) -> String {
    match (plan.attack, record.label) {
        (Some(Attack::Decoherence), ClassLabel::Machine) => {
            let mut stream = rng::stream(rng::derive_seed_from_bytes(plan.config.seed, record.id.as_bytes()), 2);
            decoherence(&record.text, &mut stream)
        }
        _ => record.text.clone(),
    }
}

fn score_record(record: &CorpusRecord, provider: &dyn EmbeddingProvider, plan: &EvalPlan) -> Result<f64, DetectorError> {
    let text = prepared_text(record, plan);
    match plan.method {
        Method::Phd => score_phd(&text, provider, &plan.config),
        Method::ShortPhd => {
            score_short_phd(&text, &plan.oci, provider, &plan.config, ShortPhdOptions::default()).map(|s| s.score)
        }
    }
}

pub fn run_eval(corpus: &[CorpusRecord], provider: &dyn EmbeddingProvider, plan: &EvalPlan) -> Result<EvalReport, EvalError> {
    if corpus.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    plan.config.validate().map_err(|e| EvalError::InvalidPlan(e.to_string()))?;
    if !(plan.fpr_budget > 0.0 && plan.fpr_budget < 1.0) {
        return Err(MetricsError::InvalidBudget(plan.fpr_budget).into());
    }

    let mut order: Vec<&CorpusRecord> = corpus.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    let outcomes: Vec<Result<f64, DetectorError>> =
        order.par_iter().map(|r| score_record(r, provider, plan)).collect();

    let mut scores = Vec::new();
    let mut excluded = Vec::new();
    let mut failures = Vec::new();
    for (record, outcome) in order.into_iter().zip(outcomes) {
        match outcome {
            Ok(score) => scores.push(RecordScore { id: record.id.clone(), label: record.label, score }),
            Err(e) if e.is_too_short() => {
                excluded.push(ExcludedRecord { id: record.id.clone(), label: record.label, reason: e.to_string() })
            }
            Err(e) => {
                let kind = if e.is_provider_error() { FailureKind::Provider } else { FailureKind::Estimation };
                failures.push(RecordFailure { id: record.id.clone(), kind, message: e.to_string() });
            }
        }
    }
    if !failures.is_empty() {
        return Err(EvalError::RecordFailures(failures));
    }
    let summary = summarize(&scores, plan.fpr_budget)?;
    Ok(EvalReport { summary, per_record_scores: scores, excluded, config_echo: plan.echo() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_parsing() {
        assert_eq!("short-phd".parse::<Method>().unwrap(), Method::ShortPhd);
        assert!("shortphd".parse::<Method>().is_err());
    }

    #[test]
    fn csv_quotes_ids() {
        let report = EvalReport {
            summary: summarize(
                &[
                    RecordScore { id: "a,1".into(), label: ClassLabel::Human, score: 2.0 },
                    RecordScore { id: "b".into(), label: ClassLabel::Machine, score: 1.5 },
                ],
                0.05,
            )
            .unwrap(),
            per_record_scores: vec![
                RecordScore { id: "a,1".into(), label: ClassLabel::Human, score: 2.0 },
                RecordScore { id: "b".into(), label: ClassLabel::Machine, score: 1.5 },
            ],
            excluded: vec![],
            config_echo: EvalPlan::new(Method::Phd, EstimatorConfig::default()).echo(),
        };
        assert_eq!(report.scores_csv(), "id,label,score\n\"a,1\",human,2\nb,machine,1.5\n");
        report.verify().unwrap();
    }

    #[test]
    fn machine_only_attack() {
        let words: Vec<String> = (0..30).map(|i| format!("w{i}")).collect();
        let text = format!("{}.", words.join(" "));
        let mut plan = EvalPlan::new(Method::Phd, EstimatorConfig::default());
        plan.attack = Some(Attack::Decoherence);
        let rec = |label| CorpusRecord { id: "x".into(), text: text.clone(), label, generator: None, domain: None };
        assert_eq!(prepared_text(&rec(ClassLabel::Human), &plan), text);
        assert_ne!(prepared_text(&rec(ClassLabel::Machine), &plan), text);
    }
}
