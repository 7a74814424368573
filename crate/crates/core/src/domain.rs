//! Core data types shared across the pipeline: tasks, test suites, programs
//! and the artifacts produced while generating feedback.

use serde::{Deserialize, Serialize};

/// How the judge decides whether a program's output matches the expected one.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComparatorSpec {
    /// Trailing whitespace per line and trailing blank lines are ignored.
    #[default]
    Default,
    /// Numbers compare within a relative tolerance, everything else exactly.
    Numeric {
        #[serde(default = "default_rel_tol")]
        rel_tol: f64,
    },
}

fn default_rel_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    #[serde(rename = "id")]
    pub case_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stdin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argv: Option<Vec<String>>,
    pub expected_output: String,
}

impl TestCase {
    /// Human-readable rendering of the input used to drive this case.
    pub fn input_display(&self) -> String {
        let stdin = self.stdin.as_deref().unwrap_or("");
        let stdin = stdin.trim_end_matches(['\n', '\r']);
        match self.argv.as_deref() {
            Some(args) if !args.is_empty() => {
                if stdin.is_empty() {
                    args.join(" ")
                } else {
                    format!("{stdin}\n(arguments: {})", args.join(" "))
                }
            }
            _ => stdin.to_string(),
        }
    }
}

/// Ordered list of test cases. Order is the on-disk declaration order and
/// defines which failing case counts as "first".
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TestSuite {
    pub cases: Vec<TestCase>,
}

impl TestSuite {
    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }
}

/// An auxiliary file staged next to the program before every execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuxFile {
    pub relative_path: String,
    pub contents: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgrammingTask {
    pub task_id: String,
    pub description: String,
    pub suite: TestSuite,
    pub aux_files: Vec<AuxFile>,
    pub comparator: ComparatorSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramRole {
    Buggy,
    CandidateFix,
    SelectedFix,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceProgram {
    pub program_id: String,
    pub task_id: String,
    pub source: String,
    pub role: ProgramRole,
}

impl SourceProgram {
    pub fn new(
        program_id: impl Into<String>,
        task_id: impl Into<String>,
        source: impl Into<String>,
        role: ProgramRole,
    ) -> Self {
        Self {
            program_id: program_id.into(),
            task_id: task_id.into(),
            source: source.into(),
            role,
        }
    }

    pub fn with_role(&self, role: ProgramRole) -> Self {
        Self {
            role,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    WrongOutput,
    RuntimeError,
    Timeout,
}

/// The failing test case triplet: input, the buggy program's output and the
/// expected output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailingCaseReport {
    pub case: TestCase,
    pub actual_output: String,
    pub failure_kind: FailureKind,
}

impl FailingCaseReport {
    /// Renders the triplet the way an online judge shows a failed test.
    pub fn render(&self) -> String {
        let actual = self.actual_output.trim_end_matches(['\n', '\r']);
        let expected = self.case.expected_output.trim_end_matches(['\n', '\r']);
        format!(
            "For Input: {}\nYour Code's output is: {}\nIt's Correct output is: {}",
            self.case.input_display(),
            actual,
            expected
        )
    }
}

/// Explanation and single-sentence hint extracted from one tutor completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackBundle {
    pub explanation: String,
    pub hint: String,
    pub raw_completion: String,
}
