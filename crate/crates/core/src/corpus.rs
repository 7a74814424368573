//! Dataset ingestion.
//!
//! A corpus is a directory tree:
//!
//! ```text
//! corpus/
//!   corpus.meta                       key=value lines (name, subject_language, ...)
//!   tasks/<task_id>/description.md
//!   tasks/<task_id>/tests.json
//!   tasks/<task_id>/aux/<files...>    optional
//!   programs/<task_id>/<program_id>.<ext>
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    AuxFile, ComparatorSpec, ProgramRole, ProgrammingTask, SourceProgram, TestCase, TestSuite,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: missing task description")]
    MissingDescription { path: PathBuf },
    #[error("{path}: malformed test file: {message}")]
    MalformedTests { path: PathBuf, message: String },
    #[error("{path}: duplicate id `{id}`")]
    DuplicateId { path: PathBuf, id: String },
    #[error("{path}: program references unknown task `{task_id}`")]
    UnknownTask { path: PathBuf, task_id: String },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// The language student programs are written in and how to execute them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectLanguage {
    pub name: String,
    pub extension: String,
    pub interpreter: Vec<String>,
}

impl SubjectLanguage {
    pub fn python() -> Self {
        Self {
            name: "python".into(),
            extension: "py".into(),
            interpreter: vec!["python3".into()],
        }
    }

    pub fn is_python(&self) -> bool {
        self.name.eq_ignore_ascii_case("python")
    }

    fn from_meta(meta: &BTreeMap<String, String>) -> Self {
        let name = meta
            .get("subject_language")
            .cloned()
            .unwrap_or_else(|| "python".into());
        let mut lang = if name.eq_ignore_ascii_case("python") {
            Self::python()
        } else {
            Self {
                extension: name.to_ascii_lowercase(),
                interpreter: vec![name.to_ascii_lowercase()],
                name: name.clone(),
            }
        };
        lang.name = name;
        if let Some(ext) = meta.get("extension") {
            lang.extension = ext.trim_start_matches('.').to_string();
        }
        if let Some(cmd) = meta.get("interpreter") {
            let parts: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if !parts.is_empty() {
                lang.interpreter = parts;
            }
        }
        lang
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub language: SubjectLanguage,
    /// Raw `corpus.meta` entries, including the ones interpreted above.
    pub meta: BTreeMap<String, String>,
    pub tasks: Vec<ProgrammingTask>,
    pub programs: Vec<SourceProgram>,
}

impl Corpus {
    pub fn task(&self, task_id: &str) -> Option<&ProgrammingTask> {
        self.tasks.iter().find(|t| t.task_id == task_id)
    }

    /// Tasks paired with their buggy programs, in corpus order.
    pub fn grouped(&self) -> Vec<(&ProgrammingTask, Vec<&SourceProgram>)> {
        self.tasks
            .iter()
            .map(|t| {
                let programs = self
                    .programs
                    .iter()
                    .filter(|p| p.task_id == t.task_id)
                    .collect();
                (t, programs)
            })
            .collect()
    }

    /// Every buggy program with its task, in corpus order.
    pub fn work_items(&self) -> Vec<(&ProgrammingTask, &SourceProgram)> {
        self.programs
            .iter()
            .filter_map(|p| self.task(&p.task_id).map(|t| (t, p)))
            .collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TestsFile {
    cases: Vec<TestCase>,
    #[serde(default)]
    comparator: ComparatorSpec,
}

pub fn parse_meta(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

fn sorted_entries(dir: &Path) -> Result<Vec<fs::DirEntry>, CorpusError> {
    let mut entries = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .collect::<Result<Vec<_>, _>>()
        .map_err(io_err(dir))?;
    entries.retain(|e| !e.file_name().to_string_lossy().starts_with('.'));
    entries.sort_by_key(|e| e.file_name());
    Ok(entries)
}

fn collect_aux(root: &Path, dir: &Path, out: &mut Vec<AuxFile>) -> Result<(), CorpusError> {
    for entry in sorted_entries(dir)? {
        let path = entry.path();
        if path.is_dir() {
            collect_aux(root, &path, out)?;
        } else {
            let rel = path
                .strip_prefix(root)
                .expect("aux entry under aux root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            let contents = fs::read(&path).map_err(io_err(&path))?;
            out.push(AuxFile {
                relative_path: rel,
                contents,
            });
        }
    }
    Ok(())
}

fn load_task(dir: &Path, task_id: String) -> Result<ProgrammingTask, CorpusError> {
    let desc_path = dir.join("description.md");
    if !desc_path.is_file() {
        return Err(CorpusError::MissingDescription { path: desc_path });
    }
    let description = fs::read_to_string(&desc_path).map_err(io_err(&desc_path))?;

    let tests_path = dir.join("tests.json");
    let raw = fs::read_to_string(&tests_path).map_err(io_err(&tests_path))?;
    let tests: TestsFile = serde_json::from_str(&raw).map_err(|e| CorpusError::MalformedTests {
        path: tests_path.clone(),
        message: e.to_string(),
    })?;
    if tests.cases.is_empty() {
        return Err(CorpusError::MalformedTests {
            path: tests_path,
            message: "suite must contain at least one case".into(),
        });
    }
    let mut seen = BTreeSet::new();
    for case in &tests.cases {
        if !seen.insert(case.case_id.as_str()) {
            return Err(CorpusError::DuplicateId {
                path: tests_path,
                id: case.case_id.clone(),
            });
        }
    }

    let mut aux_files = Vec::new();
    let aux_dir = dir.join("aux");
    if aux_dir.is_dir() {
        collect_aux(&aux_dir, &aux_dir, &mut aux_files)?;
    }

    Ok(ProgrammingTask {
        task_id,
        description,
        suite: TestSuite { cases: tests.cases },
        aux_files,
        comparator: tests.comparator,
    })
}

/// Loads a corpus directory. Tasks come back sorted by id, programs sorted by
/// task then program id; test cases keep their declaration order.
pub fn load_corpus(root: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let root = root.as_ref();
    let meta_path = root.join("corpus.meta");
    let meta = if meta_path.is_file() {
        parse_meta(&fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?)
    } else {
        BTreeMap::new()
    };
    let language = SubjectLanguage::from_meta(&meta);
    let name = meta.get("name").cloned().unwrap_or_else(|| {
        root.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    });

    let tasks_dir = root.join("tasks");
    if !tasks_dir.is_dir() {
        return Err(CorpusError::Invalid {
            path: tasks_dir,
            message: "missing tasks directory".into(),
        });
    }
    let mut tasks = Vec::new();
    for entry in sorted_entries(&tasks_dir)? {
        let path = entry.path();
        if !path.is_dir() {
            continue;
        }
        let task_id = entry.file_name().to_string_lossy().into_owned();
        tasks.push(load_task(&path, task_id)?);
    }

    let task_ids: BTreeSet<&str> = tasks.iter().map(|t| t.task_id.as_str()).collect();
    let mut programs = Vec::new();
    let mut program_ids = BTreeSet::new();
    let programs_dir = root.join("programs");
    if programs_dir.is_dir() {
        for entry in sorted_entries(&programs_dir)? {
            let dir = entry.path();
            if !dir.is_dir() {
                continue;
            }
            let task_id = entry.file_name().to_string_lossy().into_owned();
            if !task_ids.contains(task_id.as_str()) {
                return Err(CorpusError::UnknownTask { path: dir, task_id });
            }
            for file in sorted_entries(&dir)? {
                let path = file.path();
                if !path.is_file()
                    || path.extension().and_then(|e| e.to_str()) != Some(&language.extension)
                {
                    continue;
                }
                let program_id = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                if program_id.is_empty() {
                    return Err(CorpusError::Invalid {
                        path,
                        message: "empty program id".into(),
                    });
                }
                if !program_ids.insert(program_id.clone()) {
                    return Err(CorpusError::DuplicateId {
                        path,
                        id: program_id,
                    });
                }
                let source = fs::read_to_string(&path).map_err(io_err(&path))?;
                if source.trim().is_empty() {
                    return Err(CorpusError::Invalid {
                        path,
                        message: "program source is empty".into(),
                    });
                }
                programs.push(SourceProgram::new(
                    program_id,
                    task_id.clone(),
                    source,
                    ProgramRole::Buggy,
                ));
            }
        }
    }

    Ok(Corpus {
        name,
        language,
        meta,
        tasks,
        programs,
    })
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CorpusError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

/// Writes a corpus in the layout [`load_corpus`] reads.
pub fn write_corpus(corpus: &Corpus, root: impl AsRef<Path>) -> Result<(), CorpusError> {
    let root = root.as_ref();
    let mut meta = corpus.meta.clone();
    meta.insert("name".into(), corpus.name.clone());
    meta.insert("subject_language".into(), corpus.language.name.clone());
    let meta_text: String = meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    write_file(&root.join("corpus.meta"), meta_text.as_bytes())?;

    for task in &corpus.tasks {
        let dir = root.join("tasks").join(&task.task_id);
        write_file(&dir.join("description.md"), task.description.as_bytes())?;
        let tests = TestsFile {
            cases: task.suite.cases.clone(),
            comparator: task.comparator.clone(),
        };
        let json = serde_json::to_string_pretty(&tests).expect("tests serialize");
        write_file(&dir.join("tests.json"), json.as_bytes())?;
        for aux in &task.aux_files {
            write_file(&dir.join("aux").join(&aux.relative_path), &aux.contents)?;
        }
    }
    for program in &corpus.programs {
        let path = root.join("programs").join(&program.task_id).join(format!(
            "{}.{}",
            program.program_id, corpus.language.extension
        ));
        write_file(&path, program.source.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scaffold(root: &Path) {
        write_file(
            &root.join("corpus.meta"),
            b"name=tiny\nsubject_language=python\n",
        )
        .unwrap();
        write_file(&root.join("tasks/echo/description.md"), b"Echo the input.").unwrap();
        write_file(
            &root.join("tasks/echo/tests.json"),
            br#"{"cases":[{"id":"a","stdin":"x","expected_output":"x"}]}"#,
        )
        .unwrap();
        write_file(&root.join("programs/echo/p1.py"), b"print(input())\n").unwrap();
        write_file(&root.join("programs/echo/p2.py"), b"print('y')\n").unwrap();
    }

    #[test]
    fn loads_one_task_two_programs() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());
        let corpus = load_corpus(dir.path()).unwrap();
        assert_eq!(corpus.name, "tiny");
        assert_eq!(corpus.tasks.len(), 1);
        assert_eq!(corpus.programs.len(), 2);
        assert!(corpus.programs.iter().all(|p| p.role == ProgramRole::Buggy));
        assert_eq!(corpus.language, SubjectLanguage::python());
    }

    #[test]
    fn unknown_task_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());
        write_file(&dir.path().join("programs/ghost/p9.py"), b"pass\n").unwrap();
        let err = load_corpus(dir.path()).unwrap_err();
        assert!(matches!(err, CorpusError::UnknownTask { ref task_id, .. } if task_id == "ghost"));
        assert!(err.to_string().contains("ghost"));
    }

    #[test]
    fn missing_description_names_path() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());
        fs::remove_file(dir.path().join("tasks/echo/description.md")).unwrap();
        let err = load_corpus(dir.path()).unwrap_err();
        assert!(err.to_string().contains("description.md"), "{err}");
    }

    #[test]
    fn malformed_tests_rejected() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());
        write_file(&dir.path().join("tasks/echo/tests.json"), b"{\"cases\": [").unwrap();
        assert!(matches!(
            load_corpus(dir.path()),
            Err(CorpusError::MalformedTests { .. })
        ));
        write_file(
            &dir.path().join("tasks/echo/tests.json"),
            br#"{"cases": []}"#,
        )
        .unwrap();
        assert!(matches!(
            load_corpus(dir.path()),
            Err(CorpusError::MalformedTests { .. })
        ));
    }

    #[test]
    fn duplicate_program_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());
        write_file(&dir.path().join("tasks/other/description.md"), b"d").unwrap();
        write_file(
            &dir.path().join("tasks/other/tests.json"),
            br#"{"cases":[{"id":"a","expected_output":""}]}"#,
        )
        .unwrap();
        write_file(&dir.path().join("programs/other/p1.py"), b"pass\n").unwrap();
        assert!(matches!(
            load_corpus(dir.path()),
            Err(CorpusError::DuplicateId { ref id, .. }) if id == "p1"
        ));
    }

    #[test]
    fn duplicate_case_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());
        write_file(
            &dir.path().join("tasks/echo/tests.json"),
            br#"{"cases":[{"id":"a","expected_output":""},{"id":"a","expected_output":""}]}"#,
        )
        .unwrap();
        assert!(matches!(
            load_corpus(dir.path()),
            Err(CorpusError::DuplicateId { .. })
        ));
    }

    #[test]
    fn aux_files_are_loaded_with_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());
        write_file(&dir.path().join("tasks/echo/aux/data/grades.txt"), b"A").unwrap();
        let corpus = load_corpus(dir.path()).unwrap();
        assert_eq!(
            corpus.tasks[0].aux_files[0].relative_path,
            "data/grades.txt"
        );
    }

    #[test]
    fn meta_overrides_interpreter() {
        let meta = parse_meta("subject_language=ruby\ninterpreter=ruby -W0\n# comment\n");
        let lang = SubjectLanguage::from_meta(&meta);
        assert_eq!(lang.extension, "ruby");
        assert_eq!(lang.interpreter, vec!["ruby", "-W0"]);
        assert!(!lang.is_python());
    }
}
