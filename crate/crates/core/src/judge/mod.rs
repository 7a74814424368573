//! Runs programs against test suites and extracts the first failing case.

mod compare;
mod sandbox;

pub use compare::compare_output;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExecLimits;
use crate::corpus::SubjectLanguage;
use crate::domain::{FailingCaseReport, FailureKind, ProgrammingTask, SourceProgram, TestCase};
use crate::par::Exec;

/// Longest stderr excerpt used in place of program output for crashes.
pub const STDERR_EXCERPT_CHARS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitState {
    Ok,
    NonzeroExit,
    Timeout,
    SpawnError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub case_id: String,
    pub stdout: String,
    pub stderr: String,
    pub exit_status: ExitState,
    pub exit_code: Option<i32>,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub case: TestCase,
    pub result: ExecutionResult,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub program_id: String,
    pub per_case: Vec<CaseOutcome>,
    pub all_passed: bool,
}

impl SuiteReport {
    pub fn passed_count(&self) -> usize {
        self.per_case.iter().filter(|c| c.passed).count()
    }

    pub fn from_outcomes(program_id: impl Into<String>, per_case: Vec<CaseOutcome>) -> Self {
        let all_passed = per_case.iter().all(|c| c.passed);
        Self {
            program_id: program_id.into(),
            per_case,
            all_passed,
        }
    }
}

type MemoKey = (String, [u8; 32]);

/// Executes programs written in one subject language under fixed limits.
///
/// Suite reports are memoized by task and source text, so a program that
/// shows up many times among sampled completions runs once.
#[derive(Debug, Clone)]
pub struct Judge {
    pub language: SubjectLanguage,
    pub limits: ExecLimits,
    pub exec: Exec,
    memo: Option<Arc<Mutex<HashMap<MemoKey, SuiteReport>>>>,
}

impl Judge {
    pub fn new(language: SubjectLanguage, limits: ExecLimits) -> Self {
        Self {
            language,
            limits,
            exec: Exec::default(),
            memo: Some(Arc::default()),
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Re-runs every program even when its source was seen before.
    pub fn without_memo(mut self) -> Self {
        self.memo = None;
        self
    }

    /// Runs `program` on a single case in a fresh working directory holding
    /// the task's auxiliary files.
    pub fn run_program(
        &self,
        program: &SourceProgram,
        case: &TestCase,
        task: &ProgrammingTask,
    ) -> ExecutionResult {
        sandbox::execute(
            &self.language,
            &program.source,
            case,
            &task.aux_files,
            &self.limits,
        )
    }

    /// Runs every case of the task's suite; a case passes when the program
    /// exits cleanly and its output matches.
    pub fn evaluate_suite(&self, program: &SourceProgram, task: &ProgrammingTask) -> SuiteReport {
        let Some(memo) = &self.memo else {
            return self.run_suite(program, task);
        };
        let key = (
            task.task_id.clone(),
            Sha256::digest(program.source.as_bytes()).into(),
        );
        if let Some(hit) = memo.lock().expect("judge memo").get(&key) {
            return SuiteReport {
                program_id: program.program_id.clone(),
                ..hit.clone()
            };
        }
        let report = self.run_suite(program, task);
        memo.lock()
            .expect("judge memo")
            .entry(key)
            .or_insert_with(|| report.clone());
        report
    }

    fn run_suite(&self, program: &SourceProgram, task: &ProgrammingTask) -> SuiteReport {
        let per_case = self.exec.map(&task.suite.cases, |case| {
            let result = self.run_program(program, case, task);
            let passed = result.exit_status == ExitState::Ok
                && compare_output(&result.stdout, &case.expected_output, &task.comparator);
            CaseOutcome {
                case: case.clone(),
                result,
                passed,
            }
        });
        SuiteReport::from_outcomes(program.program_id.clone(), per_case)
    }
}

fn excerpt(text: &str) -> String {
    text.chars().take(STDERR_EXCERPT_CHARS).collect()
}

/// The earliest failing case in suite order, or `None` when all passed.
///
/// For a clean exit the program's stdout is reported; otherwise the start of
/// stderr, falling back to a short marker when stderr is empty.
pub fn first_failing(report: &SuiteReport) -> Option<FailingCaseReport> {
    let outcome = report.per_case.iter().find(|c| !c.passed)?;
    let result = &outcome.result;
    let (failure_kind, actual_output) = match result.exit_status {
        ExitState::Ok => (FailureKind::WrongOutput, result.stdout.clone()),
        ExitState::Timeout => {
            let text = excerpt(&result.stderr);
            let text = if text.trim().is_empty() {
                "Time limit exceeded".to_string()
            } else {
                text
            };
            (FailureKind::Timeout, text)
        }
        ExitState::NonzeroExit | ExitState::SpawnError => {
            let text = excerpt(&result.stderr);
            let text = if text.trim().is_empty() {
                match result.exit_code {
                    Some(code) => format!("Runtime error (exit status {code})"),
                    None => "Runtime error".to_string(),
                }
            } else {
                text
            };
            (FailureKind::RuntimeError, text)
        }
    };
    Some(FailingCaseReport {
        case: outcome.case.clone(),
        actual_output,
        failure_kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(
        id: &str,
        passed: bool,
        state: ExitState,
        stdout: &str,
        stderr: &str,
    ) -> CaseOutcome {
        CaseOutcome {
            case: TestCase {
                case_id: id.into(),
                stdin: Some(id.into()),
                argv: None,
                expected_output: "want".into(),
            },
            result: ExecutionResult {
                case_id: id.into(),
                stdout: stdout.into(),
                stderr: stderr.into(),
                exit_status: state,
                exit_code: None,
                wall_time: Duration::ZERO,
            },
            passed,
        }
    }

    fn report(pass: &[bool]) -> SuiteReport {
        let per_case = pass
            .iter()
            .enumerate()
            .map(|(i, &p)| outcome(&i.to_string(), p, ExitState::Ok, "got", ""))
            .collect();
        SuiteReport::from_outcomes("p", per_case)
    }

    #[test]
    fn single_failure_is_found() {
        let r = report(&[true, true, true, false, true]);
        assert_eq!(first_failing(&r).unwrap().case.case_id, "3");
    }

    #[test]
    fn earliest_failure_wins() {
        let r = report(&[true, false, true, true, false]);
        let omega = first_failing(&r).unwrap();
        assert_eq!(omega.case.case_id, "1");
        assert_eq!(omega.failure_kind, FailureKind::WrongOutput);
        assert_eq!(omega.actual_output, "got");
    }

    #[test]
    fn none_iff_all_passed() {
        let r = report(&[true, true]);
        assert!(r.all_passed);
        assert!(first_failing(&r).is_none());
        let empty = SuiteReport::from_outcomes("p", vec![]);
        assert!(empty.all_passed && first_failing(&empty).is_none());
    }

    #[test]
    fn crash_reports_bounded_stderr() {
        let long = "E".repeat(5000);
        let r = SuiteReport::from_outcomes(
            "p",
            vec![outcome(
                "0",
                false,
                ExitState::NonzeroExit,
                "partial",
                &long,
            )],
        );
        let omega = first_failing(&r).unwrap();
        assert_eq!(omega.failure_kind, FailureKind::RuntimeError);
        assert_eq!(omega.actual_output.chars().count(), STDERR_EXCERPT_CHARS);
    }

    #[test]
    fn timeout_without_stderr_gets_marker() {
        let r =
            SuiteReport::from_outcomes("p", vec![outcome("0", false, ExitState::Timeout, "", "")]);
        let omega = first_failing(&r).unwrap();
        assert_eq!(omega.failure_kind, FailureKind::Timeout);
        assert_eq!(omega.actual_output, "Time limit exceeded");
    }
}
