//! Prompt rendering for the three prompt templates.
//!
//! Placeholders are substituted in a single pass, so braces inside task
//! descriptions or programs are copied through literally.

use thiserror::Error;

use crate::domain::{FailingCaseReport, ProgrammingTask, SourceProgram};

pub const GENERATION_TEMPLATE: &str = include_str!("../../templates/generation.txt");
pub const VALIDATION_TEMPLATE: &str = include_str!("../../templates/validation.txt");
pub const REPAIR_TEMPLATE: &str = include_str!("../../templates/repair.txt");

/// Completion text a student model gives when it rejects the explanation.
pub const BAD_EXPLANATION_SENTINEL: &str = "Explanation is bad.";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("validation payload must not be empty")]
    EmptyPayload,
}

fn substitute(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let name = &after[..close];
            values
                .iter()
                .find(|(key, _)| *key == name)
                .map(|(_, value)| (close, *value))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Drops every blank-line separated block of `template` that mentions one of
/// `placeholders`.
fn without_blocks(template: &str, placeholders: &[&str]) -> String {
    template
        .split("\n\n")
        .filter(|block| !placeholders.iter().any(|p| block.contains(p)))
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn clean(text: &str) -> &str {
    text.trim_end()
}

/// Feedback-generation prompt. The failing-test and fixed-program blocks are
/// left out entirely when the corresponding input is absent.
pub fn render_generation_prompt(
    task: &ProgrammingTask,
    buggy: &SourceProgram,
    omega: Option<&FailingCaseReport>,
    fix: Option<&SourceProgram>,
) -> String {
    let mut dropped = Vec::new();
    if omega.is_none() {
        dropped.push("{failing_test_case}");
    }
    if fix.is_none() {
        dropped.push("{fixed_program}");
    }
    let template = without_blocks(GENERATION_TEMPLATE, &dropped);
    let omega_text = omega.map(FailingCaseReport::render).unwrap_or_default();
    substitute(
        &template,
        &[
            ("problem_description", clean(&task.description)),
            ("failing_test_case", &omega_text),
            ("buggy_program", clean(&buggy.source)),
            ("fixed_program", fix.map_or("", |f| clean(&f.source))),
        ],
    )
}

/// Repair prompt augmented with feedback (an explanation, or a hint).
pub fn render_validation_prompt(
    task: &ProgrammingTask,
    buggy: &SourceProgram,
    payload: &str,
) -> Result<String, RenderError> {
    if payload.trim().is_empty() {
        return Err(RenderError::EmptyPayload);
    }
    Ok(substitute(
        VALIDATION_TEMPLATE,
        &[
            ("problem_description", clean(&task.description)),
            ("buggy_program", clean(&buggy.source)),
            ("explanation", clean(payload)),
        ],
    ))
}

/// Plain repair prompt, used both for fix synthesis and as the unaided
/// baseline during validation.
pub fn render_repair_prompt(task: &ProgrammingTask, buggy: &SourceProgram) -> String {
    substitute(
        REPAIR_TEMPLATE,
        &[
            ("problem_description", clean(&task.description)),
            ("buggy_program", clean(&buggy.source)),
        ],
    )
}
