//! A scripted transport: completions written down per program, trial and
//! stage, used to record deterministic sessions into a replay cache.
//!
//! ```json
//! {"programs": {"p1": {"trials": [
//!     {"repairs": [{"code": "fix.py", "repeat": 10}],
//!      "generation": "(1) ... (2) ...",
//!      "augmented": [{"code": "fix.py", "repeat": 6}, {"text": "Explanation is bad.", "repeat": 4}],
//!      "standard": ["..."]}
//! ]}}}
//! ```
//!
//! A stage missing from a trial falls back to the closest earlier trial that
//! has it. `code` paths are relative to the script file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use super::transport::{ChatRequest, RawCompletion, RequestTag, Stage, Transport, TransportError};

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("{path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawEntry {
    Text(String),
    Spec {
        #[serde(default)]
        text: Option<String>,
        #[serde(default)]
        code: Option<String>,
        #[serde(default = "one")]
        repeat: usize,
        #[serde(default)]
        truncated: bool,
    },
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawStage {
    One(RawEntry),
    Many(Vec<RawEntry>),
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTrial {
    repairs: Option<RawStage>,
    generation: Option<RawStage>,
    augmented: Option<RawStage>,
    standard: Option<RawStage>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProgram {
    trials: Vec<RawTrial>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScript {
    programs: BTreeMap<String, RawProgram>,
}

type Trial = BTreeMap<Stage, Vec<RawCompletion>>;

#[derive(Debug, Clone, Default)]
pub struct SessionScript {
    programs: BTreeMap<String, Vec<Trial>>,
}

impl SessionScript {
    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        let text = fs::read_to_string(path).map_err(|e| ScriptError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base).map_err(|message| ScriptError::Invalid {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Parses a script; `code` entries are resolved against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self, String> {
        let raw: RawScript = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut programs = BTreeMap::new();
        for (id, program) in raw.programs {
            let mut trials = Vec::new();
            for raw_trial in program.trials {
                let mut trial = Trial::new();
                for (stage, entry) in [
                    (Stage::Repair, raw_trial.repairs),
                    (Stage::Generation, raw_trial.generation),
                    (Stage::ValidationAugmented, raw_trial.augmented),
                    (Stage::ValidationStandard, raw_trial.standard),
                ] {
                    if let Some(entry) = entry {
                        trial.insert(stage, expand(entry, base)?);
                    }
                }
                trials.push(trial);
            }
            programs.insert(id, trials);
        }
        Ok(Self { programs })
    }

    pub fn program_ids(&self) -> impl Iterator<Item = &str> {
        self.programs.keys().map(String::as_str)
    }

    /// Completions scripted for a tag; trials are numbered from 1.
    pub fn entries(&self, tag: &RequestTag) -> Option<&[RawCompletion]> {
        let trials = self.programs.get(&tag.program_id)?;
        let last = (tag.trial as usize).min(trials.len());
        trials[..last]
            .iter()
            .rev()
            .find_map(|t| t.get(&tag.stage))
            .map(Vec::as_slice)
    }
}

fn expand(stage: RawStage, base: &Path) -> Result<Vec<RawCompletion>, String> {
    let entries = match stage {
        RawStage::One(e) => vec![e],
        RawStage::Many(v) => v,
    };
    let mut out = Vec::new();
    for entry in entries {
        let (text, repeat, truncated) = match entry {
            RawEntry::Text(text) => (text, 1, false),
            RawEntry::Spec {
                text,
                code,
                repeat,
                truncated,
            } => {
                let text = match (text, code) {
                    (Some(t), None) => t,
                    (None, Some(rel)) => {
                        let path = base.join(&rel);
                        let source = fs::read_to_string(&path)
                            .map_err(|e| format!("{}: {e}", path.display()))?;
                        format!("```python\n{}\n```", source.trim_end())
                    }
                    _ => return Err("entry needs exactly one of text or code".into()),
                };
                (text, repeat, truncated)
            }
        };
        out.extend(std::iter::repeat_n(
            RawCompletion { text, truncated },
            repeat,
        ));
    }
    Ok(out)
}

impl Transport for SessionScript {
    fn complete(
        &self,
        request: &ChatRequest,
        tag: &RequestTag,
    ) -> Result<Vec<RawCompletion>, TransportError> {
        let entries = self.entries(tag).ok_or_else(|| {
            TransportError::fatal(format!(
                "script has no {} entries for {} trial {}",
                tag.stage.as_str(),
                tag.program_id,
                tag.trial
            ))
        })?;
        request
            .indices
            .iter()
            .map(|&i| {
                entries.get(i as usize).cloned().ok_or_else(|| {
                    TransportError::fatal(format!(
                        "script has {} {} entries for {}, index {i} requested",
                        entries.len(),
                        tag.stage.as_str(),
                        tag.program_id
                    ))
                })
            })
            .collect()
    }
}
