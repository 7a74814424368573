//! Token-level program distance and fix selection.

mod lexer;

pub use lexer::{tokenize, Token, TokenKind, TokenSeq};

use crate::domain::SourceProgram;
use crate::judge::SuiteReport;

/// Levenshtein distance where two tokens match only if kind and text agree.
///
/// Uses two rolling rows, so memory is linear in the shorter input.
pub fn token_edit_distance(a: &TokenSeq, b: &TokenSeq) -> usize {
    let (long, short) = if a.len() >= b.len() {
        (&a.tokens, &b.tokens)
    } else {
        (&b.tokens, &a.tokens)
    };
    if short.is_empty() {
        return long.len();
    }
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut curr = vec![0; short.len() + 1];
    for (i, lt) in long.iter().enumerate() {
        curr[0] = i + 1;
        for (j, st) in short.iter().enumerate() {
            let substitution = prev[j] + usize::from(lt != st);
            curr[j + 1] = substitution.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[short.len()]
}

pub fn source_distance(a: &str, b: &str) -> usize {
    token_edit_distance(&tokenize(a), &tokenize(b))
}

/// Picks the suite-passing candidate closest to the buggy program. Ties go to
/// the earliest candidate. Returns `None` when no candidate passes.
pub fn select_fix<'a>(
    buggy: &SourceProgram,
    candidates: &'a [(SourceProgram, SuiteReport)],
) -> Option<&'a SourceProgram> {
    let reference = tokenize(&buggy.source);
    candidates
        .iter()
        .filter(|(_, report)| report.all_passed)
        .map(|(program, _)| {
            (
                token_edit_distance(&reference, &tokenize(&program.source)),
                program,
            )
        })
        .min_by_key(|(distance, _)| *distance)
        .map(|(_, program)| program)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_zero() {
        let s = tokenize("for i in range(3): print(i)");
        assert_eq!(token_edit_distance(&s, &s), 0);
    }

    #[test]
    fn single_substitution() {
        assert_eq!(source_distance("x = 1", "x = 2"), 1);
    }

    #[test]
    fn two_insertions() {
        assert_eq!(source_distance("x = 1", "x = 1 + y"), 2);
    }

    #[test]
    fn kind_matters_for_equality() {
        // `'x'` (string) vs `x` (identifier)
        assert_eq!(source_distance("'x'", "x"), 1);
    }

    #[test]
    fn empty_against_nonempty() {
        assert_eq!(source_distance("", "a b c"), 3);
        assert_eq!(source_distance("a b c", ""), 3);
    }
}
