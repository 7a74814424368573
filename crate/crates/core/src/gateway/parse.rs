//! Extraction of feedback and programs from raw completions.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::codedist::{tokenize, TokenKind};
use crate::domain::{FeedbackBundle, ProgramRole, SourceProgram};

use super::templates::BAD_EXPLANATION_SENTINEL;
use super::{Completion, FinishState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseFailure {
    #[error("completion is not complete ({0:?})")]
    Incomplete(FinishState),
    #[error("no answer to item (1) found")]
    MissingExplanation,
    #[error("no answer to item (2) found")]
    MissingHint,
}

struct MarkerStyle {
    one: Regex,
    two: Regex,
}

fn marker_styles() -> &'static [MarkerStyle] {
    static STYLES: OnceLock<Vec<MarkerStyle>> = OnceLock::new();
    STYLES.get_or_init(|| {
        let line_start = r"(?m)^[ \t>]*(?:#{1,6}[ \t]*)?(?:\*\*|__)?";
        let build = |pattern: String| Regex::new(&pattern).expect("valid marker regex");
        vec![
            // "(1)" at the start of a line, optionally inside markdown.
            MarkerStyle {
                one: build(format!(r"{line_start}\(1\)(?:\*\*|__)?")),
                two: build(format!(r"{line_start}\(2\)(?:\*\*|__)?")),
            },
            // "1." / "1)" at the start of a line.
            MarkerStyle {
                one: build(format!(r"{line_start}1[.)](?:\*\*|__)?[ \t]")),
                two: build(format!(r"{line_start}2[.)](?:\*\*|__)?[ \t]")),
            },
            // "(1)" anywhere.
            MarkerStyle {
                one: build(r"\(1\)".to_string()),
                two: build(r"\(2\)".to_string()),
            },
        ]
    })
}

fn label_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^(?:\*\*|__)?\s*(?:single[- ]sentence\s+)?(?:hint|explanation|bugs?(?:\(s\))?(?:\s+and\s+(?:the\s+)?(?:required\s+)?fixes)?|answer)\s*(?:\*\*|__)?[ \t]*(?:[:.\-][ \t]*(?:\*\*|__)?|\n|$)")
            .expect("valid label regex")
    })
}

fn strip_markup(text: &str) -> String {
    let without_fences: Vec<&str> = text
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect();
    let mut s = without_fences.join("\n").trim().to_string();
    s = s.trim_start_matches([':', '-']).trim().to_string();
    for _ in 0..2 {
        if let Some(m) = label_pattern().find(&s) {
            s = s[m.end()..].trim().to_string();
        }
    }
    for wrap in ["**", "__"] {
        if s.starts_with(wrap) && s.ends_with(wrap) && s.len() >= 2 * wrap.len() {
            s = s[wrap.len()..s.len() - wrap.len()].trim().to_string();
        }
    }
    if s.len() >= 2 && s.starts_with('"') && s.ends_with('"') && s.matches('"').count() == 2 {
        s = s[1..s.len() - 1].trim().to_string();
    }
    s
}

/// Splits a tutor completion into the answers to item (1) and item (2).
pub fn parse_feedback(completion: &Completion) -> Result<FeedbackBundle, ParseFailure> {
    if completion.finish_state != FinishState::Complete {
        return Err(ParseFailure::Incomplete(completion.finish_state));
    }
    let text = completion.text.as_str();
    let mut saw_one = false;
    for style in marker_styles() {
        let Some(one) = style.one.find(text) else {
            continue;
        };
        saw_one = true;
        let Some(two) = style.two.find_iter(&text[one.end()..]).last() else {
            continue;
        };
        let explanation = strip_markup(&text[one.end()..one.end() + two.start()]);
        let hint = strip_markup(&text[one.end() + two.end()..]);
        if explanation.is_empty() {
            return Err(ParseFailure::MissingExplanation);
        }
        if hint.is_empty() {
            return Err(ParseFailure::MissingHint);
        }
        return Ok(FeedbackBundle {
            explanation,
            hint,
            raw_completion: completion.text.clone(),
        });
    }
    if saw_one {
        Err(ParseFailure::MissingHint)
    } else {
        Err(ParseFailure::MissingExplanation)
    }
}

fn fenced_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        match current.as_mut() {
            None if trimmed.starts_with("```") => current = Some(Vec::new()),
            None => {}
            Some(_) if trimmed.starts_with("```") => {
                let lines = current.take().expect("open block");
                blocks.push(lines.join("\n"));
            }
            Some(lines) => lines.push(line),
        }
    }
    if let Some(lines) = current {
        blocks.push(lines.join("\n"));
    }
    blocks
}

fn looks_like_code_line(line: &str) -> bool {
    if line.starts_with([' ', '\t']) {
        return true;
    }
    let tokens = tokenize(line).tokens;
    let Some(first) = tokens.first() else {
        return false;
    };
    if first.kind == TokenKind::Comment {
        return true;
    }
    let words = tokens
        .iter()
        .filter(|t| matches!(t.kind, TokenKind::Identifier | TokenKind::Keyword))
        .count();
    let structural = tokens.iter().any(|t| {
        matches!(t.text.as_str(), "=" | "(" | "[" | "{" | "+=" | "==")
            || (t.kind == TokenKind::Punctuation && t.text == ":")
    });
    let prose_end = line.trim_end().ends_with(['.', '?', '!']) && words >= 4;
    if prose_end {
        return false;
    }
    first.kind == TokenKind::Keyword || structural
}

/// Program text of a student completion: the last fenced block, or the
/// whole text when it reads as bare code. `None` when the model declined
/// or no code is present.
pub fn extract_program(text: &str) -> Option<String> {
    if let Some(block) = fenced_blocks(text).pop() {
        return (!block.trim().is_empty()).then_some(block);
    }
    if text.contains(BAD_EXPLANATION_SENTINEL) {
        return None;
    }
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.is_empty() {
        return None;
    }
    let code_like = lines.iter().filter(|l| looks_like_code_line(l)).count();
    (code_like * 2 > lines.len()).then(|| text.trim_matches('\n').to_string())
}

pub fn parse_program(
    completion: &Completion,
    program_id: impl Into<String>,
    task_id: impl Into<String>,
) -> Option<SourceProgram> {
    if completion.finish_state != FinishState::Complete {
        return None;
    }
    extract_program(&completion.text)
        .map(|source| SourceProgram::new(program_id, task_id, source, ProgramRole::CandidateFix))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn done(text: &str) -> Completion {
        Completion {
            text: text.into(),
            index: 0,
            finish_state: FinishState::Complete,
        }
    }

    #[test]
    fn parenthesized_markers() {
        let fb = parse_feedback(&done(
            "Sure!\n\n(1) The list is reversed in place.\nSo both names alias it.\n\n(2) Think about aliasing.",
        ))
        .unwrap();
        assert_eq!(
            fb.explanation,
            "The list is reversed in place.\nSo both names alias it."
        );
        assert_eq!(fb.hint, "Think about aliasing.");
    }

    #[test]
    fn numbered_headings_with_labels() {
        let fb = parse_feedback(&done(
            "### 1. Bugs and fixes\nThe loop is off by one.\n\n### 2. Hint\n**Hint:** Check where the loop stops.",
        ))
        .unwrap();
        assert_eq!(fb.explanation, "The loop is off by one.");
        assert_eq!(fb.hint, "Check where the loop stops.");
    }

    #[test]
    fn inline_markers() {
        let fb = parse_feedback(&done("(1) Off by one. (2) Look at the bound.")).unwrap();
        assert_eq!(fb.explanation, "Off by one.");
        assert_eq!(fb.hint, "Look at the bound.");
    }

    #[test]
    fn nested_enumeration_in_explanation() {
        let fb = parse_feedback(&done(
            "(1) Two bugs:\n1. wrong start\n2. wrong end\n(2) Hint: Check both ends.",
        ))
        .unwrap();
        assert!(fb.explanation.contains("2. wrong end"));
        assert_eq!(fb.hint, "Check both ends.");
    }

    #[test]
    fn missing_hint_is_failure() {
        assert_eq!(
            parse_feedback(&done("(1) Only an explanation here.")),
            Err(ParseFailure::MissingHint)
        );
        assert_eq!(
            parse_feedback(&done("No structure at all")),
            Err(ParseFailure::MissingExplanation)
        );
    }

    #[test]
    fn truncated_is_failure() {
        let mut c = done("(1) a (2) b");
        c.finish_state = FinishState::Truncated;
        assert!(matches!(
            parse_feedback(&c),
            Err(ParseFailure::Incomplete(_))
        ));
        assert!(parse_program(&c, "x", "t").is_none());
    }

    #[test]
    fn sentinel_means_no_program() {
        assert_eq!(extract_program("Explanation is bad."), None);
        assert_eq!(extract_program("I think: Explanation is bad. Sorry."), None);
    }

    #[test]
    fn single_block() {
        assert_eq!(
            extract_program("Here:\n```python\nprint(1)\n```\nDone."),
            Some("print(1)".into())
        );
    }

    #[test]
    fn last_block_wins() {
        let text = "Old:\n```python\nprint(0)\n```\nFixed version:\n```\nprint(1)\nprint(2)\n```\n";
        assert_eq!(extract_program(text), Some("print(1)\nprint(2)".into()));
    }

    #[test]
    fn bare_code_accepted_prose_rejected() {
        let code = "def f(x):\n    return x + 1\n\nprint(f(int(input())))\n";
        assert_eq!(
            extract_program(code),
            Some(code.trim_matches('\n').to_string())
        );
        assert_eq!(
            extract_program("The program looks fine to me and needs no change."),
            None
        );
    }
}
