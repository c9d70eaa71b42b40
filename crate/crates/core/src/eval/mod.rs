//! Corpus evaluation: loading, perturbation, scoring and metrics.

pub mod attack;
pub mod corpus;
pub mod harness;
pub mod metrics;
pub mod synthetic;

pub use attack::{decoherence, Attack};
pub use corpus::{load_corpus, parse_corpus, write_corpus, ClassLabel, CorpusError, CorpusRecord};
pub use harness::{run_eval, summarize, EvalError, EvalPlan, EvalReport, Method};
pub use metrics::{calibrate_threshold, compute_auc, tpr_at_fpr, Calibration, CalibrationPolicy, MetricsError};
