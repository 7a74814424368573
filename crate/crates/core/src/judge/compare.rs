use std::sync::OnceLock;

use regex::Regex;

use crate::domain::ComparatorSpec;

fn normalize(text: &str) -> Vec<&str> {
    let mut lines: Vec<&str> = text
        .split('\n')
        .map(|l| l.trim_end_matches([' ', '\t', '\r']))
        .collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines
}

#[derive(Debug, PartialEq)]
enum Run<'a> {
    Number(f64),
    Text(&'a str),
}

fn number_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?").expect("valid number regex")
    })
}

fn runs(text: &str) -> Vec<Run<'_>> {
    let mut out = Vec::new();
    let mut last = 0;
    for m in number_pattern().find_iter(text) {
        if m.start() > last {
            out.push(Run::Text(&text[last..m.start()]));
        }
        match m.as_str().parse::<f64>() {
            Ok(v) => out.push(Run::Number(v)),
            Err(_) => out.push(Run::Text(m.as_str())),
        }
        last = m.end();
    }
    if last < text.len() {
        out.push(Run::Text(&text[last..]));
    }
    out
}

fn close(a: f64, b: f64, rel_tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= rel_tol * a.abs().max(b.abs())
}

/// Whether `actual` output counts as matching `expected` under `comparator`.
pub fn compare_output(actual: &str, expected: &str, comparator: &ComparatorSpec) -> bool {
    let actual = normalize(actual).join("\n");
    let expected = normalize(expected).join("\n");
    match comparator {
        ComparatorSpec::Default => actual == expected,
        ComparatorSpec::Numeric { rel_tol } => {
            let a = runs(&actual);
            let b = runs(&expected);
            a.len() == b.len()
                && a.iter().zip(&b).all(|pair| match pair {
                    (Run::Number(x), Run::Number(y)) => close(*x, *y, *rel_tol),
                    (Run::Text(x), Run::Text(y)) => x == y,
                    _ => false,
                })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NUMERIC: ComparatorSpec = ComparatorSpec::Numeric { rel_tol: 1e-6 };

    #[test]
    fn trailing_newline_ignored() {
        assert!(compare_output("1\n", "1", &ComparatorSpec::Default));
        assert!(compare_output(
            "a  \nb\t\n\n\n",
            "a\nb",
            &ComparatorSpec::Default
        ));
        assert!(compare_output(
            "a\r\nb\r\n",
            "a\nb",
            &ComparatorSpec::Default
        ));
    }

    #[test]
    fn leading_whitespace_matters() {
        assert!(!compare_output(" 1", "1", &ComparatorSpec::Default));
        assert!(!compare_output("1\n\n2", "1\n2", &ComparatorSpec::Default));
    }

    #[test]
    fn numeric_mismatch_detected() {
        assert!(!compare_output("0.0092887664", "0.0097655722", &NUMERIC));
        assert!(!compare_output(
            "{'male': 0.0092887664, 'female': 0.0076827368}",
            "{'male': 0.0097655722, 'female': 0.0076827368}",
            &NUMERIC
        ));
    }

    #[test]
    fn numeric_within_tolerance() {
        assert!(compare_output("3.0000001", "3.0", &NUMERIC));
        assert!(compare_output("x=1e3 ok", "x=1000.0 ok", &NUMERIC));
        assert!(!compare_output(
            "3.0000001",
            "3.0",
            &ComparatorSpec::Default
        ));
    }

    #[test]
    fn numeric_text_runs_exact() {
        assert!(!compare_output("male: 1", "Male: 1", &NUMERIC));
        assert!(!compare_output("1 2", "1", &NUMERIC));
    }
}
