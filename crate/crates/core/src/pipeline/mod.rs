//! Per-program orchestration: symbolic information, feedback generation and
//! validation, repeated for up to k trials.

mod run;

pub use run::{read_results, write_run, RunError, RunOutput, RunReport, RunTiming};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codedist::select_fix;
use crate::config::{Mode, PipelineConfig, ValidationPayload};
use crate::corpus::SubjectLanguage;
use crate::domain::{
    FailingCaseReport, FeedbackBundle, ProgramRole, ProgrammingTask, SourceProgram,
};
use crate::gateway::{
    parse_feedback, parse_program, render_generation_prompt, render_repair_prompt,
    render_validation_prompt, text_digest, Completion, FinishState, ModelClient, RequestTag,
    SampleParams, Stage,
};
use crate::judge::{first_failing, Judge, SuiteReport};
use crate::par::Exec;
use crate::validator::{validate, ValidationOutcome};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicInfo {
    pub omega: Option<FailingCaseReport>,
    pub fix: Option<SourceProgram>,
    pub candidates_evaluated: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    ParseFailure,
    BackendFailure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub reason: FailureReason,
    pub detail: String,
}

/// Digests of the prompts sent during a trial.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptDigests {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repair: Option<String>,
    pub generation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u32,
    pub symbolic: SymbolicInfo,
    pub feedback: Option<FeedbackBundle>,
    pub outcome: Option<ValidationOutcome>,
    pub failure_reason: Option<FailureReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_detail: Option<String>,
    pub prompts: PromptDigests,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultStatus {
    Accepted,
    RejectedAllTrials,
    NotBuggy,
}

/// Completions requested from the backends for one program.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendCalls {
    pub generation: u32,
    pub repair: u32,
    pub validation: u32,
}

impl BackendCalls {
    pub fn total(&self) -> u32 {
        self.generation + self.repair + self.validation
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub program_id: String,
    pub task_id: String,
    pub mode: Mode,
    pub trials: Vec<TrialRecord>,
    pub released_hint: Option<String>,
    pub released_explanation: Option<String>,
    pub status: ResultStatus,
    pub backend_calls: BackendCalls,
}

impl PipelineResult {
    pub fn accepted(&self) -> bool {
        self.status == ResultStatus::Accepted
    }
}

/// Sub-seed for one request, derived from the master seed.
pub fn derive_seed(master: u64, program_id: &str, trial: u32, stage: Stage) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(program_id.as_bytes());
    hasher.update([0]);
    hasher.update(trial.to_le_bytes());
    hasher.update(stage.as_str().as_bytes());
    let digest = hasher.finalize();
    // Keep seeds within the range JSON consumers read exactly.
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes")) >> 11
}

pub struct Pipeline {
    config: PipelineConfig,
    judge: Judge,
    tutor: Arc<ModelClient>,
    student: Arc<ModelClient>,
}

impl Pipeline {
    pub fn new(
        config: PipelineConfig,
        language: SubjectLanguage,
        tutor: Arc<ModelClient>,
        student: Arc<ModelClient>,
    ) -> Self {
        let judge = Judge::new(language, config.limits.clone());
        Self {
            config,
            judge,
            tutor,
            student,
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.judge = self.judge.with_exec(exec);
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn judge(&self) -> &Judge {
        &self.judge
    }

    pub fn tutor(&self) -> &ModelClient {
        &self.tutor
    }

    pub fn student(&self) -> &ModelClient {
        &self.student
    }

    fn params(
        &self,
        temperature: f64,
        count: u32,
        program: &str,
        trial: u32,
        stage: Stage,
    ) -> SampleParams {
        SampleParams {
            temperature,
            count,
            seed: derive_seed(self.config.seed, program, trial, stage),
        }
    }

    fn tag(program: &SourceProgram, trial: u32, stage: Stage) -> RequestTag {
        RequestTag {
            program_id: program.program_id.clone(),
            trial,
            stage,
        }
    }

    /// Parses every completion as a program and runs it on the suite.
    fn evaluate_completions(
        &self,
        task: &ProgrammingTask,
        buggy: &SourceProgram,
        completions: &[Completion],
        label: &str,
    ) -> Vec<Option<(SourceProgram, SuiteReport)>> {
        self.judge.exec.map(completions, |completion| {
            let id = format!("{}-{label}-{}", buggy.program_id, completion.index);
            parse_program(completion, id, &task.task_id).map(|program| {
                let report = self.judge.evaluate_suite(&program, task);
                (program, report)
            })
        })
    }

    /// Failing case and (for fix-using modes) a freshly synthesized fix.
    pub fn stage1_symbolic(
        &self,
        task: &ProgrammingTask,
        buggy: &SourceProgram,
        buggy_report: &SuiteReport,
        trial: u32,
        calls: &mut BackendCalls,
        prompts: &mut PromptDigests,
    ) -> SymbolicInfo {
        let mode = self.config.mode;
        if !mode.uses_failing_case() {
            return SymbolicInfo::default();
        }
        let omega = first_failing(buggy_report);
        if !mode.uses_fix() {
            return SymbolicInfo {
                omega,
                fix: None,
                candidates_evaluated: 0,
            };
        }
        let prompt = render_repair_prompt(task, buggy);
        prompts.repair = Some(text_digest(&prompt));
        let n = self.config.n_samples;
        let params = self.params(
            self.config.sample_temperature,
            n,
            &buggy.program_id,
            trial,
            Stage::Repair,
        );
        let completions =
            self.tutor
                .sample(&prompt, &params, &Self::tag(buggy, trial, Stage::Repair));
        calls.repair += n;
        let evaluated: Vec<(SourceProgram, SuiteReport)> = self
            .evaluate_completions(task, buggy, &completions, &format!("t{trial}-repair"))
            .into_iter()
            .flatten()
            .collect();
        let fix = select_fix(buggy, &evaluated).map(|p| p.with_role(ProgramRole::SelectedFix));
        SymbolicInfo {
            omega,
            fix,
            candidates_evaluated: evaluated.len() as u32,
        }
    }

    /// One tutor completion at the generation temperature, parsed into an
    /// explanation and a hint.
    pub fn stage2_feedback(
        &self,
        task: &ProgrammingTask,
        buggy: &SourceProgram,
        symbolic: &SymbolicInfo,
        trial: u32,
        calls: &mut BackendCalls,
        prompts: &mut PromptDigests,
    ) -> Result<FeedbackBundle, TrialFailure> {
        let prompt =
            render_generation_prompt(task, buggy, symbolic.omega.as_ref(), symbolic.fix.as_ref());
        prompts.generation = Some(text_digest(&prompt));
        let params = self.params(
            self.config.gen_temperature,
            1,
            &buggy.program_id,
            trial,
            Stage::Generation,
        );
        let completions = self.tutor.sample(
            &prompt,
            &params,
            &Self::tag(buggy, trial, Stage::Generation),
        );
        calls.generation += 1;
        let completion = &completions[0];
        if completion.finish_state == FinishState::BackendError {
            return Err(TrialFailure {
                reason: FailureReason::BackendFailure,
                detail: "no completion from the tutor backend".into(),
            });
        }
        parse_feedback(completion).map_err(|e| TrialFailure {
            reason: FailureReason::ParseFailure,
            detail: e.to_string(),
        })
    }

    /// Student repairs with and without the feedback; n2 and n1 count the
    /// suite-passing ones.
    pub fn stage3_validate(
        &self,
        task: &ProgrammingTask,
        buggy: &SourceProgram,
        feedback: &FeedbackBundle,
        trial: u32,
        calls: &mut BackendCalls,
        prompts: &mut PromptDigests,
    ) -> Result<ValidationOutcome, TrialFailure> {
        let payload = match self.config.validation_payload {
            ValidationPayload::Explanation => &feedback.explanation,
            ValidationPayload::Hint => &feedback.hint,
        };
        let augmented =
            render_validation_prompt(task, buggy, payload).map_err(|e| TrialFailure {
                reason: FailureReason::ParseFailure,
                detail: e.to_string(),
            })?;
        let standard = render_repair_prompt(task, buggy);
        prompts.validation = Some(text_digest(&augmented));
        let n = self.config.n_samples;
        let temperature = self.config.sample_temperature;
        let id = &buggy.program_id;

        let with = self.student.sample(
            &augmented,
            &self.params(temperature, n, id, trial, Stage::ValidationAugmented),
            &Self::tag(buggy, trial, Stage::ValidationAugmented),
        );
        let without = self.student.sample(
            &standard,
            &self.params(temperature, n, id, trial, Stage::ValidationStandard),
            &Self::tag(buggy, trial, Stage::ValidationStandard),
        );
        calls.validation += 2 * n;

        let passes = |completions: &[Completion], label: &str| {
            self.evaluate_completions(task, buggy, completions, label)
                .iter()
                .filter(|c| c.as_ref().is_some_and(|(_, r)| r.all_passed))
                .count() as u32
        };
        let n2 = passes(&with, &format!("t{trial}-aug"));
        let n1 = passes(&without, &format!("t{trial}-std"));
        Ok(validate(
            n1,
            n2,
            n,
            self.config.alpha,
            self.config.beta,
            self.config.rule_variant,
        )
        .expect("counts are bounded by n and n >= 1"))
    }

    /// Runs trials until feedback is accepted or the trial budget is spent.
    pub fn run_one(&self, task: &ProgrammingTask, buggy: &SourceProgram) -> PipelineResult {
        let mut result = PipelineResult {
            program_id: buggy.program_id.clone(),
            task_id: task.task_id.clone(),
            mode: self.config.mode,
            trials: Vec::new(),
            released_hint: None,
            released_explanation: None,
            status: ResultStatus::RejectedAllTrials,
            backend_calls: BackendCalls::default(),
        };
        let buggy_report = self.judge.evaluate_suite(buggy, task);
        if buggy_report.all_passed {
            result.status = ResultStatus::NotBuggy;
            return result;
        }

        for trial in 1..=self.config.max_trials_k {
            let calls = &mut result.backend_calls;
            let mut prompts = PromptDigests::default();
            let symbolic =
                self.stage1_symbolic(task, buggy, &buggy_report, trial, calls, &mut prompts);
            let mut record = TrialRecord {
                trial_index: trial,
                symbolic,
                feedback: None,
                outcome: None,
                failure_reason: None,
                failure_detail: None,
                prompts: PromptDigests::default(),
            };
            let mut released = false;
            match self.stage2_feedback(task, buggy, &record.symbolic, trial, calls, &mut prompts) {
                Err(failure) => {
                    record.failure_reason = Some(failure.reason);
                    record.failure_detail = Some(failure.detail);
                }
                Ok(feedback) => {
                    if self.config.mode.validates() {
                        match self.stage3_validate(
                            task,
                            buggy,
                            &feedback,
                            trial,
                            calls,
                            &mut prompts,
                        ) {
                            Ok(outcome) => {
                                released = outcome.accepted;
                                record.outcome = Some(outcome);
                            }
                            Err(failure) => {
                                record.failure_reason = Some(failure.reason);
                                record.failure_detail = Some(failure.detail);
                            }
                        }
                    } else {
                        released = true;
                    }
                    if released {
                        result.released_hint = Some(feedback.hint.clone());
                        result.released_explanation = Some(feedback.explanation.clone());
                    }
                    record.feedback = Some(feedback);
                }
            }
            record.prompts = prompts;
            result.trials.push(record);
            if released {
                result.status = ResultStatus::Accepted;
                break;
            }
        }
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_by_every_component() {
        let base = derive_seed(0, "p", 1, Stage::Repair);
        assert_eq!(base, derive_seed(0, "p", 1, Stage::Repair));
        assert_ne!(base, derive_seed(1, "p", 1, Stage::Repair));
        assert_ne!(base, derive_seed(0, "q", 1, Stage::Repair));
        assert_ne!(base, derive_seed(0, "p", 2, Stage::Repair));
        assert_ne!(base, derive_seed(0, "p", 1, Stage::Generation));
        assert!(base < 1 << 53);
    }

    #[test]
    fn call_total() {
        let calls = BackendCalls {
            generation: 3,
            repair: 30,
            validation: 60,
        };
        assert_eq!(calls.total(), 93);
    }
}
