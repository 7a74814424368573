use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Pipeline, PipelineResult, ResultStatus};
use crate::config::{Mode, PipelineConfig};
use crate::corpus::Corpus;
use crate::gateway::ClientStats;
use crate::par::Exec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub corpus: String,
    pub mode: Mode,
    pub programs: u32,
    pub accepted: u32,
    pub rejected_all_trials: u32,
    pub not_buggy: u32,
    pub coverage_percent: f64,
    pub trials: u32,
    pub requested_completions: u32,
    pub tutor: ClientStats,
    pub student: ClientStats,
    pub config: PipelineConfig,
}

/// Wall-clock figures, kept apart from the report so reruns compare equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub elapsed_secs: f64,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub results: Vec<PipelineResult>,
    pub report: RunReport,
    pub timing: RunTiming,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0} already holds a completed run (use --force to overwrite)")]
    Exists(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("{0} contains no result files")]
    Empty(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Pipeline {
    /// Runs every program of the corpus on a pool of `workers` threads.
    /// Results come back in corpus order.
    pub fn run_corpus(&self, corpus: &Corpus, workers: usize) -> RunOutput {
        let started = Instant::now();
        let items = corpus.work_items();
        let exec = Exec::for_workers(workers);
        let results = exec.install(workers, || {
            exec.map(&items, |(task, program)| self.run_one(task, program))
        });
        let report = self.summarize(&corpus.name, &results);
        RunOutput {
            results,
            report,
            timing: RunTiming {
                elapsed_secs: started.elapsed().as_secs_f64(),
                workers,
            },
        }
    }

    pub fn summarize(&self, corpus: &str, results: &[PipelineResult]) -> RunReport {
        let count = |status| results.iter().filter(|r| r.status == status).count() as u32;
        let accepted = count(ResultStatus::Accepted);
        let programs = results.len() as u32;
        RunReport {
            corpus: corpus.to_string(),
            mode: self.config.mode,
            programs,
            accepted,
            rejected_all_trials: count(ResultStatus::RejectedAllTrials),
            not_buggy: count(ResultStatus::NotBuggy),
            coverage_percent: if programs == 0 {
                0.0
            } else {
                100.0 * f64::from(accepted) / f64::from(programs)
            },
            trials: results.iter().map(|r| r.trials.len() as u32).sum(),
            requested_completions: results.iter().map(|r| r.backend_calls.total()).sum(),
            tutor: self.tutor.stats(),
            student: self.student.stats(),
            config: self.config.clone(),
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    bytes
}

/// Writes `results/<program_id>.json`, `report.json` and `run_timing.json`
/// under `out`. An existing run is only replaced when `force` is set.
pub fn write_run(out: &Path, output: &RunOutput, force: bool) -> Result<(), RunError> {
    let report_path = out.join("report.json");
    let results_dir = out.join("results");
    if report_path.exists() || results_dir.exists() {
        if !force {
            return Err(RunError::Exists(out.to_path_buf()));
        }
        if results_dir.exists() {
            fs::remove_dir_all(&results_dir).map_err(io_err(&results_dir))?;
        }
    }
    fs::create_dir_all(&results_dir).map_err(io_err(&results_dir))?;
    for result in &output.results {
        let path = results_dir.join(format!("{}.json", result.program_id));
        fs::write(&path, to_json(result)).map_err(io_err(&path))?;
    }
    let timing_path = out.join("run_timing.json");
    fs::write(&timing_path, to_json(&output.timing)).map_err(io_err(&timing_path))?;
    fs::write(&report_path, to_json(&output.report)).map_err(io_err(&report_path))?;
    Ok(())
}

/// Loads result files from a run directory (or a bare results directory),
/// sorted by program id.
pub fn read_results(dir: &Path) -> Result<Vec<PipelineResult>, RunError> {
    let nested = dir.join("results");
    let dir = if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(io_err(&dir))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut results = Vec::with_capacity(paths.len());
    for path in paths {
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let result: PipelineResult =
            serde_json::from_str(&text).map_err(|e| RunError::Malformed {
                path: path.clone(),
                message: e.to_string(),
            })?;
        results.push(result);
    }
    if results.is_empty() {
        return Err(RunError::Empty(dir));
    }
    Ok(results)
}
