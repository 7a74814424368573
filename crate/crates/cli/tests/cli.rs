use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hintgate_core::config::PipelineConfig;
use hintgate_core::corpus::{load_corpus, write_corpus};
use tempfile::TempDir;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn hintgate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hintgate"))
        .args(args)
        .env_remove("HINTGATE_CACHE_DIR")
        .output()
        .expect("spawn hintgate")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// Two-program corpus (the accepted palindrome and the rejected merge)
/// recorded into `<dir>/cache`.
fn recorded(dir: &Path) -> PathBuf {
    let mut corpus = load_corpus(fixtures().join("basic_algo/corpus")).unwrap();
    corpus
        .programs
        .retain(|p| p.program_id == "palindrome_1" || p.program_id == "merge_strs_1");
    let root = dir.join("corpus");
    write_corpus(&corpus, &root).unwrap();
    let script = fixtures().join("basic_algo/session.json");
    let out = hintgate(&[
        "record-fixture",
        "--corpus",
        p(&root),
        "--script",
        p(&script),
        "--cache-dir",
        p(&dir.join("cache")),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("2 programs: 1 accepted, 1 rejected"));
    root
}

#[test]
fn help_lists_every_config_field() {
    for command in ["run", "record-fixture"] {
        let text = stdout(&hintgate(&[command, "--help"]));
        for field in PipelineConfig::field_names() {
            assert!(text.contains(&field), "{command} --help lacks {field}");
        }
    }
}

#[test]
fn run_report_and_evaluate() {
    let dir = TempDir::new().unwrap();
    let corpus = recorded(dir.path());
    let run = dir.path().join("run");
    let out = hintgate(&[
        "run",
        "--corpus",
        p(&corpus),
        "--cache-dir",
        p(&dir.path().join("cache")),
        "--out",
        p(&run),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("coverage 50.0%"));
    assert!(run.join("results/palindrome_1.json").is_file());
    assert!(run.join("report.json").is_file());
    assert!(run.join("run_timing.json").is_file());

    let again = hintgate(&[
        "run",
        "--corpus",
        p(&corpus),
        "--cache-dir",
        p(&dir.path().join("cache")),
        "--out",
        p(&run),
    ]);
    assert_eq!(again.status.code(), Some(1));

    let report = stdout(&hintgate(&["report", "--results", p(&run)]));
    assert!(
        report.contains("merge_strs_1: (8,0) (6,0) (5,0) → rejected"),
        "{report}"
    );
    assert!(
        report.contains("palindrome_1: (2,6) → accepted"),
        "{report}"
    );
    assert!(report.contains("pass-by-reference"));

    let annotations = dir.path().join("ann.jsonl");
    let line = |e: &str, good: u8| {
        format!(
            r#"{{"program_id":"palindrome_1","evaluator_id":"{e}","h_correct":1,"h_informative":1,"h_conceal":1,"h_comprehensible":{good},"e_correct":1}}"#
        )
    };
    fs::write(
        &annotations,
        format!("{}\n{}\n", line("a", 1), line("b", 0)),
    )
    .unwrap();
    let json = dir.path().join("metrics.json");
    let out = hintgate(&[
        "evaluate",
        "--results",
        p(&run),
        "--annotations",
        p(&annotations),
        "--json",
        p(&json),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = stdout(&out);
    assert!(table.contains("50.0 (50.0)"), "{table}");
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(metrics["accepted"], 1);
}

#[test]
fn evaluate_on_fixture_annotations() {
    let dir = TempDir::new().unwrap();
    let results = dir.path().join("results");
    fs::create_dir(&results).unwrap();
    // Minimal results mirroring the accepted set of the fixture session.
    let ann = fixtures().join("basic_algo/annotations");
    let ids: Vec<String> = fs::read_to_string(ann.join("evaluator_a.jsonl"))
        .unwrap()
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["program_id"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    assert_eq!(ids.len(), 19);
    let rejected = [
        "merge_strs_1",
        "gcd_5",
        "fibonacci_4",
        "divisors_div3_3",
        "palindrome_5",
        "merge_strs_4",
    ];
    for (id, status) in ids
        .iter()
        .map(|i| (i.as_str(), "accepted"))
        .chain(rejected.iter().map(|i| (*i, "rejected_all_trials")))
    {
        let body = serde_json::json!({
            "program_id": id, "task_id": "t", "mode": "full", "trials": [],
            "released_hint": null, "released_explanation": null, "status": status,
            "backend_calls": {"generation": 0, "repair": 0, "validation": 0}
        });
        fs::write(results.join(format!("{id}.json")), body.to_string()).unwrap();
    }
    let out = hintgate(&[
        "evaluate",
        "--results",
        p(&results),
        "--annotations",
        p(&ann.join("evaluator_a.jsonl")),
        p(&ann.join("evaluator_b.jsonl")),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = stdout(&out);
    assert!(table.contains("94.7 (0.0)"), "{table}");
    assert!(table.contains("76.0"), "{table}");

    let json = dir.path().join("m.json");
    let out = hintgate(&[
        "evaluate",
        "--results",
        p(&results),
        "--annotations",
        p(&ann.join("evaluator_a.jsonl")),
        p(&ann.join("conflicting.jsonl")),
        "--json",
        p(&json),
    ]);
    assert!(out.status.success());
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    assert!(
        metrics["kappa"]["h_overall"].as_f64().unwrap() <= 0.0,
        "{metrics}"
    );
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope");
    let out = hintgate(&[
        "run",
        "--corpus",
        p(&missing),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(1));

    let corpus = fixtures().join("data_analysis/corpus");
    let out = hintgate(&[
        "run",
        "--corpus",
        p(&corpus),
        "--cache-dir",
        p(&missing),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = Command::new(env!("CARGO_BIN_EXE_hintgate"))
        .args([
            "run",
            "--corpus",
            p(&corpus),
            "--tutor-backend",
            "http:m@http://127.0.0.1:9/#HINTGATE_TEST_UNSET_TOKEN",
            "--out",
            p(&dir.path().join("o")),
        ])
        .env_remove("HINTGATE_TEST_UNSET_TOKEN")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Cold cache: results are written but the run reports backend errors.
    let cache = dir.path().join("empty-cache");
    fs::create_dir(&cache).unwrap();
    let out = hintgate(&[
        "run",
        "--corpus",
        p(&corpus),
        "--cache-dir",
        p(&cache),
        "--out",
        p(&dir.path().join("cold")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("cold/report.json").is_file());

    let out = hintgate(&[
        "run",
        "--corpus",
        p(&corpus),
        "--set",
        "n_samples=0",
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
