//! Precision, coverage, agreement and significance statistics over pipeline
//! results and human annotations.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::PipelineResult;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("annotation for {program_id} by {evaluator_id} marks an incorrect hint as informative or concealing")]
    InconsistentAnnotation {
        program_id: String,
        evaluator_id: String,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("at least one value is required")]
    Empty,
    #[error("contingency table has an all-zero row or column")]
    DegenerateTable,
    #[error("evaluator {evaluator_id} has no annotation for: {}", program_ids.join(", "))]
    MissingAnnotations {
        evaluator_id: String,
        program_ids: Vec<String>,
    },
}

/// Rubric bits one evaluator assigned to one released hint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub program_id: String,
    pub evaluator_id: String,
    pub h_correct: u8,
    pub h_informative: u8,
    pub h_conceal: u8,
    pub h_comprehensible: u8,
    pub e_correct: u8,
}

impl Annotation {
    pub fn check(&self) -> Result<(), MetricsError> {
        let bits = [
            self.h_correct,
            self.h_informative,
            self.h_conceal,
            self.h_comprehensible,
            self.e_correct,
        ];
        if bits.iter().any(|&b| b > 1) {
            return Err(MetricsError::Parse {
                path: PathBuf::new(),
                line: 0,
                message: format!("rubric values must be 0 or 1 ({})", self.program_id),
            });
        }
        if self.h_correct == 0 && (self.h_informative == 1 || self.h_conceal == 1) {
            return Err(MetricsError::InconsistentAnnotation {
                program_id: self.program_id.clone(),
                evaluator_id: self.evaluator_id.clone(),
            });
        }
        Ok(())
    }

    pub fn h_overall(&self) -> u8 {
        h_overall(self)
    }
}

pub fn h_overall(a: &Annotation) -> u8 {
    u8::from(
        a.h_correct == 1 && a.h_informative == 1 && a.h_conceal == 1 && a.h_comprehensible == 1,
    )
}

/// Reads a JSON-lines annotation file; every record must satisfy the rubric
/// invariant.
pub fn load_annotations(path: &Path) -> Result<Vec<Annotation>, MetricsError> {
    let text = fs::read_to_string(path).map_err(|e| MetricsError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let annotation: Annotation =
            serde_json::from_str(line).map_err(|e| MetricsError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        annotation.check().map_err(|e| match e {
            MetricsError::Parse { message, .. } => MetricsError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            },
            other => other,
        })?;
        out.push(annotation);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionCoverage {
    /// `None` when nothing was released.
    pub precision: Option<f64>,
    pub coverage: f64,
}

/// Coverage over all results; precision over the accepted ones, judged by
/// `evaluator`.
pub fn precision_coverage(
    results: &[PipelineResult],
    annotations: &[Annotation],
    evaluator: &str,
) -> Result<PrecisionCoverage, MetricsError> {
    let by_program: BTreeMap<&str, &Annotation> = annotations
        .iter()
        .filter(|a| a.evaluator_id == evaluator)
        .map(|a| (a.program_id.as_str(), a))
        .collect();
    let accepted: Vec<&PipelineResult> = results.iter().filter(|r| r.accepted()).collect();
    let missing: Vec<String> = accepted
        .iter()
        .filter(|r| !by_program.contains_key(r.program_id.as_str()))
        .map(|r| r.program_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(MetricsError::MissingAnnotations {
            evaluator_id: evaluator.to_string(),
            program_ids: missing,
        });
    }
    let good = accepted
        .iter()
        .filter(|r| by_program[r.program_id.as_str()].h_overall() == 1)
        .count();
    let coverage = if results.is_empty() {
        0.0
    } else {
        100.0 * accepted.len() as f64 / results.len() as f64
    };
    let precision = (!accepted.is_empty()).then(|| 100.0 * good as f64 / accepted.len() as f64);
    Ok(PrecisionCoverage {
        precision,
        coverage,
    })
}

/// Mean and standard error (sample standard deviation over sqrt(n)).
pub fn mean_stderr(values: &[f64]) -> Result<(f64, f64), MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 || values.iter().all(|&v| v == values[0]) {
        return Ok((values[0], 0.0));
    }
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, variance.sqrt() / n.sqrt()))
}

/// Cohen's kappa for two binary label vectors.
pub fn cohen_kappa(a: &[u8], b: &[u8]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let p_o = agree / n;
    let ones_a = a.iter().filter(|&&x| x == 1).count() as f64 / n;
    let ones_b = b.iter().filter(|&&x| x == 1).count() as f64 / n;
    let p_e = ones_a * ones_b + (1.0 - ones_a) * (1.0 - ones_b);
    if p_e == 1.0 {
        // Both raters used a single label; they agree iff it is the same one.
        return Ok(if p_o == 1.0 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Pearson chi-square statistic and degrees of freedom for a 2×k table.
pub fn chi_square_2xk(table: &[Vec<u64>; 2]) -> Result<(f64, usize), MetricsError> {
    let k = table[0].len();
    if k == 0 || table[1].len() != k {
        return Err(MetricsError::DegenerateTable);
    }
    let rows: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<u64> = (0..k).map(|j| table[0][j] + table[1][j]).collect();
    if rows.contains(&0) || cols.contains(&0) {
        return Err(MetricsError::DegenerateTable);
    }
    let total = (rows[0] + rows[1]) as f64;
    let mut statistic = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &observed) in row.iter().enumerate() {
            let expected = rows[i] as f64 * cols[j] as f64 / total;
            statistic += (observed as f64 - expected).powi(2) / expected;
        }
    }
    Ok((statistic, k - 1))
}

/// Formats a percentage to one decimal; undefined values print as "n/a".
pub fn fmt_percent(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.1}"),
        None => "n/a".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorScore {
    pub precision: Option<f64>,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub precision_mean: Option<f64>,
    pub precision_stderr: Option<f64>,
    pub coverage_mean: f64,
    pub coverage_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub programs: usize,
    pub accepted: usize,
    pub per_evaluator: BTreeMap<String, EvaluatorScore>,
    pub aggregated: Aggregate,
    /// Mean pairwise kappa per rubric attribute, plus `h_overall`. Empty
    /// with fewer than two evaluators.
    pub kappa: BTreeMap<String, f64>,
}

const KAPPA_ATTRIBUTES: [&str; 6] = [
    "h_correct",
    "h_informative",
    "h_conceal",
    "h_comprehensible",
    "e_correct",
    "h_overall",
];

fn attribute(a: &Annotation, name: &str) -> u8 {
    match name {
        "h_correct" => a.h_correct,
        "h_informative" => a.h_informative,
        "h_conceal" => a.h_conceal,
        "h_comprehensible" => a.h_comprehensible,
        "e_correct" => a.e_correct,
        _ => a.h_overall(),
    }
}

pub fn metric_report(
    results: &[PipelineResult],
    annotations: &[Annotation],
) -> Result<MetricReport, MetricsError> {
    let evaluators: BTreeSet<&str> = annotations
        .iter()
        .map(|a| a.evaluator_id.as_str())
        .collect();
    let mut per_evaluator = BTreeMap::new();
    for evaluator in &evaluators {
        let pc = precision_coverage(results, annotations, evaluator)?;
        per_evaluator.insert(
            evaluator.to_string(),
            EvaluatorScore {
                precision: pc.precision,
                coverage: pc.coverage,
            },
        );
    }
    let coverage_values: Vec<f64> = per_evaluator.values().map(|s| s.coverage).collect();
    let precision_values: Vec<f64> = per_evaluator.values().filter_map(|s| s.precision).collect();
    let (coverage_mean, coverage_stderr) = if coverage_values.is_empty() {
        let accepted = results.iter().filter(|r| r.accepted()).count();
        let coverage = if results.is_empty() {
            0.0
        } else {
            100.0 * accepted as f64 / results.len() as f64
        };
        (coverage, 0.0)
    } else {
        mean_stderr(&coverage_values)?
    };
    let (precision_mean, precision_stderr) = match mean_stderr(&precision_values) {
        Ok((m, s)) => (Some(m), Some(s)),
        Err(_) => (None, None),
    };

    let accepted_ids: Vec<&str> = results
        .iter()
        .filter(|r| r.accepted())
        .map(|r| r.program_id.as_str())
        .collect();
    let lookup: BTreeMap<(&str, &str), &Annotation> = annotations
        .iter()
        .map(|a| ((a.evaluator_id.as_str(), a.program_id.as_str()), a))
        .collect();
    let evaluator_list: Vec<&str> = evaluators.into_iter().collect();
    let mut kappa = BTreeMap::new();
    if evaluator_list.len() >= 2 && !accepted_ids.is_empty() {
        for name in KAPPA_ATTRIBUTES {
            let mut values = Vec::new();
            for (i, first) in evaluator_list.iter().enumerate() {
                for second in &evaluator_list[i + 1..] {
                    let labels = |who: &str| -> Vec<u8> {
                        accepted_ids
                            .iter()
                            .map(|id| attribute(lookup[&(who, *id)], name))
                            .collect()
                    };
                    values.push(cohen_kappa(&labels(first), &labels(second))?);
                }
            }
            kappa.insert(
                name.to_string(),
                values.iter().sum::<f64>() / values.len() as f64,
            );
        }
    }

    Ok(MetricReport {
        programs: results.len(),
        accepted: accepted_ids.len(),
        per_evaluator,
        aggregated: Aggregate {
            precision_mean,
            precision_stderr,
            coverage_mean,
            coverage_stderr,
        },
        kappa,
    })
}

impl MetricReport {
    /// Human-readable table: one row per evaluator and an aggregate row.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16} {:>12} {:>12}\n",
            "evaluator", "precision", "coverage"
        ));
        for (name, score) in &self.per_evaluator {
            out.push_str(&format!(
                "{:<16} {:>12} {:>12}\n",
                name,
                fmt_percent(score.precision),
                fmt_percent(Some(score.coverage))
            ));
        }
        let agg = &self.aggregated;
        let precision = match (agg.precision_mean, agg.precision_stderr) {
            (Some(m), Some(s)) => format!("{m:.1} ({s:.1})"),
            _ => "n/a".to_string(),
        };
        out.push_str(&format!(
            "{:<16} {:>12} {:>12}\n",
            "mean (stderr)",
            precision,
            fmt_percent(Some(agg.coverage_mean))
        ));
        if !self.kappa.is_empty() {
            out.push_str("\nkappa\n");
            for (name, value) in &self.kappa {
                out.push_str(&format!("  {name:<18} {value:.2}\n"));
            }
        }
        out
    }
}
