//! Replay cache: one JSON file per request digest.
//!
//! A file body is a JSON list of completions. Complete completions are plain
//! strings; truncated ones are `{"text": ..., "truncated": true}`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::FinishState;

/// The fields that identify one completion slot.
#[derive(Debug, Clone, Serialize)]
pub struct DigestInput<'a> {
    pub count: u32,
    pub index: u32,
    pub model: &'a str,
    pub prompt: &'a str,
    pub seed: u64,
    pub temperature: f64,
}

impl DigestInput<'_> {
    /// Hex SHA-256 of the canonical JSON encoding (fields in fixed order).
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("digest input serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

pub fn text_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Complete(String),
    Marked { text: String, truncated: bool },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CachedCompletion {
    pub text: String,
    pub finish_state: FinishState,
}

#[derive(Debug, Clone)]
pub struct ReplayCache {
    dir: PathBuf,
}

impl ReplayCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.json"))
    }

    pub fn get(&self, digest: &str) -> Option<CachedCompletion> {
        let raw = fs::read(self.path(digest)).ok()?;
        let entries: Vec<Entry> = serde_json::from_slice(&raw).ok()?;
        entries.into_iter().next().map(|entry| match entry {
            Entry::Complete(text) => CachedCompletion {
                text,
                finish_state: FinishState::Complete,
            },
            Entry::Marked { text, truncated } => CachedCompletion {
                text,
                finish_state: if truncated {
                    FinishState::Truncated
                } else {
                    FinishState::Complete
                },
            },
        })
    }

    /// Stores a completion. Writes go through a temporary file and a rename,
    /// so concurrent writers of the same digest leave one whole file behind.
    pub fn put(&self, digest: &str, completion: &CachedCompletion) -> io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let entry = match completion.finish_state {
            FinishState::Complete => Entry::Complete(completion.text.clone()),
            FinishState::Truncated => Entry::Marked {
                text: completion.text.clone(),
                truncated: true,
            },
            FinishState::BackendError => return Ok(()),
        };
        let body = serde_json::to_vec_pretty(&vec![entry]).expect("entry serializes");
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        io::Write::write_all(&mut tmp, &body)?;
        tmp.persist(self.path(digest)).map_err(|e| e.error)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        fs::read_dir(&self.dir)
            .map(|entries| {
                entries
                    .filter_map(Result::ok)
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(index: u32, seed: u64) -> DigestInput<'static> {
        DigestInput {
            count: 10,
            index,
            model: "m",
            prompt: "p",
            seed,
            temperature: 0.5,
        }
    }

    #[test]
    fn digest_depends_on_every_field() {
        let base = input(0, 1).digest();
        assert_eq!(base.len(), 64);
        assert_eq!(base, input(0, 1).digest());
        assert_ne!(base, input(1, 1).digest());
        assert_ne!(base, input(0, 2).digest());
        let mut other = input(0, 1);
        other.temperature = 0.0;
        assert_ne!(base, other.digest());
    }

    #[test]
    fn put_get_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReplayCache::new(dir.path().join("c"));
        assert!(cache.get("x").is_none());
        let done = CachedCompletion {
            text: "hello".into(),
            finish_state: FinishState::Complete,
        };
        let cut = CachedCompletion {
            text: "hel".into(),
            finish_state: FinishState::Truncated,
        };
        cache.put("a", &done).unwrap();
        cache.put("b", &cut).unwrap();
        assert_eq!(cache.get("a"), Some(done));
        assert_eq!(cache.get("b"), Some(cut));
        assert_eq!(
            fs::read_to_string(dir.path().join("c/a.json")).unwrap(),
            "[\n  \"hello\"\n]"
        );
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn backend_errors_are_not_cached() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReplayCache::new(dir.path());
        cache
            .put(
                "e",
                &CachedCompletion {
                    text: String::new(),
                    finish_state: FinishState::BackendError,
                },
            )
            .unwrap();
        assert!(cache.get("e").is_none());
    }
}
