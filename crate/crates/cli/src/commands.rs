use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use hintgate_core::config::{load_config, PipelineConfig};
use hintgate_core::corpus::{load_corpus, Corpus};
use hintgate_core::gateway::{BackendKind, BackendSpec, ModelClient, ReplayCache, SessionScript};
use hintgate_core::metrics::{load_annotations, metric_report};
use hintgate_core::par::Exec;
use hintgate_core::pipeline::{
    read_results, write_run, FailureReason, Pipeline, PipelineResult, ResultStatus, RunOutput,
    TrialRecord,
};
use thiserror::Error;

use crate::{ConfigArgs, EvaluateArgs, RecordArgs, ReportArgs, RunArgs};

pub const CACHE_DIR_ENV: &str = "HINTGATE_CACHE_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: corpus, configuration, results or annotations.
    #[error("{0}")]
    Data(String),
    /// Unusable backend or environment.
    #[error("{0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 1,
            CliError::Backend(_) => 2,
        }
    }
}

fn data(e: impl ToString) -> CliError {
    CliError::Data(e.to_string())
}

fn cache_dir(args: &ConfigArgs) -> Option<PathBuf> {
    args.cache_dir
        .clone()
        .or_else(|| std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from))
}

fn build_config(args: &ConfigArgs) -> Result<PipelineConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => load_config(path).map_err(data)?,
        None => PipelineConfig::default(),
    };
    for (key, value) in args.flag_overrides() {
        config.apply_override(&key, &value).map_err(data)?;
    }
    for item in &args.overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Data(format!("--set expects KEY=VALUE, got {item:?}")))?;
        config
            .apply_override(key.trim(), value.trim())
            .map_err(data)?;
    }
    if let Some(dir) = cache_dir(args) {
        let dir = dir.to_string_lossy().into_owned();
        for backend in [&mut config.tutor_backend, &mut config.student_backend] {
            if backend.kind == BackendKind::ScriptedReplay {
                backend.endpoint_or_path = dir.clone();
            }
        }
    }
    Ok(config)
}

fn workers(args: &ConfigArgs) -> usize {
    args.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    })
}

fn live_cache_dir(args: &ConfigArgs) -> PathBuf {
    cache_dir(args).unwrap_or_else(|| PathBuf::from("replay-cache"))
}

fn client(spec: &BackendSpec, args: &ConfigArgs) -> Result<Arc<ModelClient>, CliError> {
    ModelClient::from_spec(spec, &live_cache_dir(args))
        .map(Arc::new)
        .map_err(|e| CliError::Backend(e.to_string()))
}

fn load(args: &ConfigArgs) -> Result<(PipelineConfig, Corpus), CliError> {
    let config = build_config(args)?;
    let corpus = load_corpus(&args.corpus).map_err(data)?;
    Ok((config, corpus))
}

fn pipeline(
    config: PipelineConfig,
    corpus: &Corpus,
    tutor: Arc<ModelClient>,
    student: Arc<ModelClient>,
    workers: usize,
) -> Pipeline {
    Pipeline::new(config, corpus.language.clone(), tutor, student)
        .with_exec(Exec::for_workers(workers))
}

fn summary_line(output: &RunOutput) -> String {
    let r = &output.report;
    format!(
        "{} programs: {} accepted, {} rejected, {} not buggy; coverage {:.1}%",
        r.programs, r.accepted, r.rejected_all_trials, r.not_buggy, r.coverage_percent
    )
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let (config, corpus) = load(&args.config)?;
    let tutor = client(&config.tutor_backend, &args.config)?;
    let student = client(&config.student_backend, &args.config)?;
    let workers = workers(&args.config);
    let pipeline = pipeline(config, &corpus, tutor, student, workers);
    let output = pipeline.run_corpus(&corpus, workers);
    write_run(&args.out, &output, args.force).map_err(data)?;
    println!("{}", summary_line(&output));

    let missing = output.report.tutor.backend_errors + output.report.student.backend_errors;
    if missing > 0 {
        return Err(CliError::Backend(format!(
            "{missing} completions were unavailable (cold replay cache or unreachable backend); results written to {}",
            args.out.display()
        )));
    }
    Ok(())
}

pub fn record(args: &RecordArgs) -> Result<(), CliError> {
    let (config, corpus) = load(&args.config)?;
    let workers = workers(&args.config);
    let (tutor, student) = match &args.script {
        Some(path) => {
            let script = Arc::new(SessionScript::load(path).map_err(data)?);
            let dir = cache_dir(&args.config).ok_or_else(|| {
                CliError::Data(format!(
                    "--cache-dir (or {CACHE_DIR_ENV}) is required with --script"
                ))
            })?;
            fs::create_dir_all(&dir).map_err(data)?;
            let make = |spec: &BackendSpec| {
                Arc::new(ModelClient::new(
                    spec.clone(),
                    ReplayCache::new(&dir),
                    Some(script.clone()),
                ))
            };
            (make(&config.tutor_backend), make(&config.student_backend))
        }
        None => {
            for spec in [&config.tutor_backend, &config.student_backend] {
                if spec.kind != BackendKind::HttpChat {
                    return Err(CliError::Data(
                        "recording without --script needs http backends".into(),
                    ));
                }
            }
            (
                client(&config.tutor_backend, &args.config)?,
                client(&config.student_backend, &args.config)?,
            )
        }
    };
    let pipeline = pipeline(config, &corpus, tutor.clone(), student, workers);
    let output = pipeline.run_corpus(&corpus, workers);
    if let Some(out) = &args.out {
        write_run(out, &output, args.force).map_err(data)?;
    }
    println!("{}", summary_line(&output));
    println!(
        "replay cache {} holds {} completions",
        tutor.cache().dir().display(),
        tutor.cache().len()
    );
    let missing = output.report.tutor.backend_errors + output.report.student.backend_errors;
    if missing > 0 {
        let message = format!("{missing} completions could not be recorded");
        return Err(if args.script.is_some() {
            CliError::Data(format!("{message}; the session script is incomplete"))
        } else {
            CliError::Backend(message)
        });
    }
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let results = read_results(&args.results).map_err(data)?;
    let mut annotations = Vec::new();
    for path in &args.annotations {
        annotations.extend(load_annotations(path).map_err(data)?);
    }
    let report = metric_report(&results, &annotations).map_err(data)?;
    print!("{}", report.render_table());
    if let Some(path) = &args.json {
        let mut body = serde_json::to_string_pretty(&report).map_err(data)?;
        body.push('\n');
        fs::write(path, body).map_err(|e| data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn trial_summary(trial: &TrialRecord) -> String {
    match (&trial.outcome, trial.failure_reason) {
        (Some(o), _) => format!("({},{})", o.n1, o.n2),
        (None, Some(FailureReason::ParseFailure)) => "[parse failure]".to_string(),
        (None, Some(FailureReason::BackendFailure)) => "[backend failure]".to_string(),
        (None, None) => "[unvalidated]".to_string(),
    }
}

pub fn render_result(result: &PipelineResult) -> String {
    let mut out = String::new();
    let verdict = match result.status {
        ResultStatus::Accepted => "accepted",
        ResultStatus::RejectedAllTrials => "rejected",
        ResultStatus::NotBuggy => "not buggy",
    };
    let trials: Vec<String> = result.trials.iter().map(trial_summary).collect();
    if trials.is_empty() {
        let _ = writeln!(out, "{}: {verdict}", result.program_id);
    } else {
        let _ = writeln!(
            out,
            "{}: {} → {verdict}",
            result.program_id,
            trials.join(" ")
        );
    }
    for trial in &result.trials {
        let decision = match &trial.outcome {
            Some(o) if o.accepted => "accepted",
            Some(_) => "rejected",
            None if trial.failure_reason.is_some() => "failed",
            None => "released",
        };
        let _ = write!(
            out,
            "  trial {}: {} {decision}",
            trial.trial_index,
            trial_summary(trial)
        );
        if let Some(fix) = &trial.symbolic.fix {
            let _ = write!(out, "; fix {}", fix.program_id);
        }
        let digests = [
            ("repair", &trial.prompts.repair),
            ("generation", &trial.prompts.generation),
            ("validation", &trial.prompts.validation),
        ];
        for (name, digest) in digests {
            if let Some(d) = digest {
                let _ = write!(out, "; {name} prompt {}", &d[..12.min(d.len())]);
            }
        }
        if let Some(detail) = &trial.failure_detail {
            let _ = write!(out, "; {detail}");
        }
        out.push('\n');
    }
    if let Some(hint) = &result.released_hint {
        let _ = writeln!(out, "  hint: {hint}");
    }
    out
}

pub fn report(args: &ReportArgs) -> Result<(), CliError> {
    let results = read_results(&args.results).map_err(data)?;
    for result in &results {
        print!("{}", render_result(result));
    }
    Ok(())
}
