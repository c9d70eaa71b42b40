use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde_json::{json, Value};
use shortphd::detector::{classify, estimate_text, score_short_phd, ShortPhdOptions};
use shortphd::embedding::{open_provider, write_atomic, EmbeddingCache, EmbeddingProvider, ProviderOptions};
use shortphd::eval::harness::RecordScore;
use shortphd::eval::synthetic::{make_synthetic_cloud, SyntheticCloudSpec};
use shortphd::eval::{calibrate_threshold, load_corpus, run_eval, CalibrationPolicy, ClassLabel, EvalPlan, Method};
use shortphd::phd::{estimate_phd, EstimatorConfig};

use crate::args::{
    CacheAction, CacheArgs, CalibrateArgs, Cli, Command, EvalArgs, PolicyArg, ProviderArgs, ScoreArgs, SynthArgs,
};
use crate::{CheckFailed, UsageError};

pub fn run(cli: Cli) -> Result<()> {
    let jobs = cli.jobs;
    let pool = match jobs {
        Some(0) => return Err(UsageError("--jobs must be at least 1".into()).into()),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().context("building thread pool")?,
        None => rayon::ThreadPoolBuilder::new().build().context("building thread pool")?,
    };
    pool.install(|| match cli.command {
        Command::Score(a) => score(a, jobs),
        Command::Eval(a) => eval(a, jobs),
        Command::Calibrate(a) => calibrate(a, jobs),
        Command::SynthValidate(a) => synth_validate(a, jobs),
        Command::Cache(a) => cache(a),
    })
}

fn emit(doc: &Value, output: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)? + "\n";
    if let Some(path) = output {
        write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{text}");
    Ok(())
}

fn document(command: &str, config: Value, result: Value) -> Value {
    json!({ "command": command, "config": config, "result": result })
}

struct Opened {
    provider: Arc<dyn EmbeddingProvider>,
    echo: Value,
}

fn open(args: &ProviderArgs, config: &EstimatorConfig) -> Result<Opened> {
    let spec = args.spec()?;
    spec.validate(config.min_subsample).map_err(|e| UsageError(e.to_string()))?;
    let options: ProviderOptions = args.options()?;
    let provider = open_provider(&spec, &options)?;
    let echo = json!({
        "spec": spec,
        "cache_dir": options.cache_dir,
        "max_in_flight": options.max_in_flight,
        "timeout_secs": options.timeout.as_secs(),
    });
    Ok(Opened { provider, echo })
}

fn read_text(args: &ScoreArgs) -> Result<String> {
    if let Some(t) = &args.text {
        return Ok(t.clone());
    }
    if let Some(path) = &args.input {
        return std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("{}: {e}", path.display())).into());
    }
    let mut buf = String::new();
    std::io::stdin().read_to_string(&mut buf).context("reading stdin")?;
    Ok(buf)
}

fn score(args: ScoreArgs, jobs: Option<usize>) -> Result<()> {
    let text = read_text(&args)?;
    let config = args.estimator.config()?;
    let method: Method = args.method.into();
    let oci = match method {
        Method::ShortPhd => Some(args.oci.load()?),
        Method::Phd => None,
    };
    let opened = open(&args.provider, &config)?;

    let mut result = match &oci {
        Some(oci) => {
            let options = ShortPhdOptions { with_baseline: args.baseline };
            serde_json::to_value(score_short_phd(&text, oci, &*opened.provider, &config, options)?)?
        }
        None => {
            let estimate = estimate_text(&text, &*opened.provider, &config)?;
            json!({ "score": estimate.dimension, "estimate": estimate })
        }
    };
    if let Some(threshold) = args.threshold {
        let score = result["score"].as_f64().expect("score is a number");
        result["decision"] = serde_json::to_value(classify(score, threshold))?;
    }

    let config_echo = json!({
        "method": args.method,
        "estimator": config,
        "provider": opened.echo,
        "oci_source": oci.as_ref().map(|o| o.source_label()),
        "oci_pieces": oci.as_ref().map(|o| o.len()),
        "threshold": args.threshold,
        "baseline": args.baseline,
        "text_bytes": text.len(),
        "jobs": jobs,
    });
    emit(&document("score", config_echo, result), None)
}

fn eval_plan(
    method: Method,
    config: EstimatorConfig,
    oci: &crate::args::OciArgs,
    provider: &ProviderArgs,
) -> Result<EvalPlan> {
    let mut plan = EvalPlan::new(method, config);
    if method == Method::ShortPhd {
        plan.oci = oci.load()?;
    }
    plan.provider_spec = Some(provider.spec()?);
    Ok(plan)
}

/// Splits a report into its echo and the rest, adding run-time settings.
fn report_document(
    report: &shortphd::eval::EvalReport,
    provider_echo: Value,
    corpus: &Path,
    jobs: Option<usize>,
) -> Result<Value> {
    let mut result = serde_json::to_value(report)?;
    let mut config = result
        .as_object_mut()
        .and_then(|o| o.remove("config_echo"))
        .expect("report carries its config");
    config["provider"] = provider_echo;
    config["corpus"] = json!(corpus);
    config["jobs"] = json!(jobs);
    Ok(document("eval", config, result))
}

fn eval(args: EvalArgs, jobs: Option<usize>) -> Result<()> {
    let config = args.estimator.config()?;
    let corpus = load_corpus(&args.corpus)?;
    let mut plan = eval_plan(args.method.into(), config, &args.oci, &args.provider)?;
    plan.attack = args.attack;
    plan.fpr_budget = args.fpr_budget;
    let opened = open(&args.provider, &config)?;

    let report = run_eval(&corpus, &*opened.provider, &plan)?;
    report.verify().map_err(|e| anyhow::anyhow!("report self-check failed: {e}"))?;
    if let Some(path) = &args.scores_csv {
        write_atomic(path, report.scores_csv().as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    }
    let doc = report_document(&report, opened.echo, &args.corpus, jobs)?;
    emit(&doc, args.output.as_deref())
}

fn scores_from_report(path: &Path) -> Result<Vec<RecordScore>> {
    let bytes = std::fs::read(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    let doc: Value = serde_json::from_slice(&bytes).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    let scores = doc
        .pointer("/result/per_record_scores")
        .cloned()
        .ok_or_else(|| UsageError(format!("{}: no result.per_record_scores", path.display())))?;
    serde_json::from_value(scores).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
}

fn calibrate(args: CalibrateArgs, jobs: Option<usize>) -> Result<()> {
    let (scores, source) = match (&args.report, &args.corpus) {
        (Some(report), _) => (scores_from_report(report)?, json!({ "report": report })),
        (None, Some(corpus_path)) => {
            let provider = &args.provider;
            let config = args.estimator.config()?;
            let corpus = load_corpus(corpus_path)?;
            let plan = eval_plan(args.method.into(), config, &args.oci, provider)?;
            let opened = open(provider, &config)?;
            let report = run_eval(&corpus, &*opened.provider, &plan)?;
            let echo = json!({
                "corpus": corpus_path,
                "scoring": plan.echo(),
                "provider": opened.echo,
            });
            (report.per_record_scores, echo)
        }
        (None, None) => unreachable!("clap requires --report or --corpus"),
    };
    let pick = |label| scores.iter().filter(|r| r.label == label).map(|r| r.score).collect::<Vec<_>>();
    let (human, machine) = (pick(ClassLabel::Human), pick(ClassLabel::Machine));
    let policy = match args.policy {
        PolicyArg::MaxYouden => CalibrationPolicy::MaxYouden,
        PolicyArg::FprBudget => CalibrationPolicy::FprBudget { budget: args.fpr_budget },
    };
    let calibration = calibrate_threshold(&human, &machine, policy)?;
    let mut result = serde_json::to_value(calibration)?;
    result["n_human"] = json!(human.len());
    result["n_machine"] = json!(machine.len());
    let config = json!({ "source": source, "policy": policy, "jobs": jobs });
    emit(&document("calibrate", config, result), None)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn synth_validate(args: SynthArgs, jobs: Option<usize>) -> Result<()> {
    let config = args.estimator.config()?;
    if args.seeds == 0 {
        return Err(UsageError("--seeds must be at least 1".into()).into());
    }
    let mut rows = Vec::new();
    let mut all_within = true;
    for &d in &args.intrinsic_dim {
        let specs: Vec<SyntheticCloudSpec> = (0..args.seeds)
            .map(|i| SyntheticCloudSpec {
                manifold: args.manifold,
                intrinsic_dim: d,
                ambient_dim: args.ambient_dim,
                n: args.n,
                seed: args.estimator.seed.wrapping_add(i),
            })
            .collect();
        let estimates = specs
            .par_iter()
            .map(|spec| -> Result<f64> {
                let cloud = make_synthetic_cloud(spec).map_err(|e| UsageError(e.to_string()))?;
                Ok(estimate_phd(&cloud, &config.with_seed(spec.seed))?.dimension)
            })
            .collect::<Result<Vec<f64>>>()?;
        let med = median(&estimates);
        let relative_error = (med - d as f64).abs() / d as f64;
        let within = args.tolerance.map(|t| relative_error <= t);
        all_within &= within.unwrap_or(true);
        rows.push(json!({
            "intrinsic_dim": d,
            "estimates": estimates,
            "median": med,
            "relative_error": relative_error,
            "within_tolerance": within,
        }));
    }
    let config_echo = json!({
        "manifold": args.manifold,
        "ambient_dim": args.ambient_dim,
        "n": args.n,
        "seeds": args.seeds,
        "tolerance": args.tolerance,
        "estimator": config,
        "jobs": jobs,
    });
    emit(&document("synth-validate", config_echo, json!(rows)), None)?;
    if all_within {
        Ok(())
    } else {
        Err(CheckFailed.into())
    }
}

fn cache(args: CacheArgs) -> Result<()> {
    let cache = EmbeddingCache::new(&args.cache_dir);
    let (action, result) = match args.action {
        CacheAction::List => ("list", serde_json::to_value(cache.entries()?)?),
        CacheAction::Stats => {
            let entries = cache.entries()?;
            let bytes: u64 = entries.iter().map(|e| e.bytes).sum();
            ("stats", json!({ "entries": entries.len(), "bytes": bytes }))
        }
        CacheAction::Clear => ("clear", json!({ "removed": cache.clear()? })),
    };
    let config = json!({ "cache_dir": args.cache_dir, "action": action });
    emit(&document("cache", config, result), None)
}
