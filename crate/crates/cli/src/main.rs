//! `shortphd` command-line tool.
//!
//! Every command prints one JSON document on stdout holding the full run
//! configuration and the result. Failures print a JSON error object on stderr
//! and exit with 2 (usage), 3 (embedding provider), 4 (estimation) or 1.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use serde_json::json;
use shortphd::detector::DetectorError;
use shortphd::embedding::EmbeddingError;
use shortphd::eval::{CorpusError, EvalError, MetricsError};
use shortphd::phd::EstimatorError;

use args::Cli;

/// Bad flags, inputs or configuration.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Non-zero exit without an error object; stdout already explains.
#[derive(Debug)]
pub struct CheckFailed;

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("check failed")
    }
}

impl std::error::Error for CheckFailed {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Usage,
    Provider,
    Estimation,
    Other,
}

impl Kind {
    fn code(self) -> u8 {
        match self {
            Kind::Usage => 2,
            Kind::Provider => 3,
            Kind::Estimation => 4,
            Kind::Other => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Kind::Usage => "usage",
            Kind::Provider => "provider",
            Kind::Estimation => "estimation",
            Kind::Other => "other",
        }
    }
}

fn embedding_kind(e: &EmbeddingError) -> Kind {
    match e {
        EmbeddingError::TooFewTokens { .. } => Kind::Estimation,
        EmbeddingError::InvalidProvider(_) => Kind::Usage,
        _ => Kind::Provider,
    }
}

fn classify(err: &anyhow::Error) -> Kind {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<CorpusError>() || cause.is::<clap::Error>() {
            return Kind::Usage;
        }
        if let Some(e) = cause.downcast_ref::<DetectorError>() {
            return match e {
                DetectorError::InvalidOffTopicSet(_) | DetectorError::EmptyText => Kind::Usage,
                DetectorError::Embedding(inner) => embedding_kind(inner),
                DetectorError::Estimator(EstimatorError::InvalidConfig(_)) => Kind::Usage,
                _ if e.is_provider_error() => Kind::Provider,
                _ => Kind::Estimation,
            };
        }
        if let Some(e) = cause.downcast_ref::<EvalError>() {
            return match e {
                EvalError::EmptyCorpus | EvalError::InvalidPlan(_) => Kind::Usage,
                EvalError::Metrics(MetricsError::InvalidBudget(_)) => Kind::Usage,
                _ if e.is_provider_error() => Kind::Provider,
                _ => Kind::Estimation,
            };
        }
        if let Some(e) = cause.downcast_ref::<EmbeddingError>() {
            return embedding_kind(e);
        }
        if let Some(e) = cause.downcast_ref::<EstimatorError>() {
            return match e {
                EstimatorError::InvalidConfig(_) => Kind::Usage,
                _ => Kind::Estimation,
            };
        }
        if cause.is::<MetricsError>() {
            return Kind::Estimation;
        }
    }
    Kind::Other
}

fn report_error(kind: Kind, message: String) -> ExitCode {
    let body = json!({ "error": { "kind": kind.name(), "exit_code": kind.code(), "message": message } });
    eprintln!("{body}");
    ExitCode::from(kind.code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return report_error(Kind::Usage, e.render().to_string().trim_end().to_string()),
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<CheckFailed>() => ExitCode::FAILURE,
        Err(e) => report_error(classify(&e), format!("{e:#}")),
    }
}
