#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use hintgate_core::config::PipelineConfig;
use hintgate_core::corpus::{load_corpus, Corpus};
use hintgate_core::domain::{ProgrammingTask, SourceProgram};
use hintgate_core::gateway::{ModelClient, ReplayCache, SessionScript};
use hintgate_core::pipeline::Pipeline;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn basic_algo() -> Corpus {
    load_corpus(fixtures().join("basic_algo/corpus")).expect("basic_algo corpus")
}

pub fn item<'a>(corpus: &'a Corpus, program_id: &str) -> (&'a ProgrammingTask, &'a SourceProgram) {
    corpus
        .work_items()
        .into_iter()
        .find(|(_, p)| p.program_id == program_id)
        .unwrap_or_else(|| panic!("no program {program_id}"))
}

/// Pipeline whose tutor and student are served from a session script, with
/// completions recorded under `cache`.
pub fn scripted(config: PipelineConfig, corpus: &Corpus, script: &Path, cache: &Path) -> Pipeline {
    let script = Arc::new(SessionScript::load(script).expect("session script"));
    let make = |spec| {
        Arc::new(ModelClient::new(
            spec,
            ReplayCache::new(cache),
            Some(script.clone()),
        ))
    };
    let tutor = make(config.tutor_backend.clone());
    let student = make(config.student_backend.clone());
    Pipeline::new(config, corpus.language.clone(), tutor, student)
}
