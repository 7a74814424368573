use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cache::{CachedCompletion, DigestInput, ReplayCache};
use super::transport::{ChatRequest, HttpTransport, RawCompletion, RequestTag, Transport};
use super::{BackendKind, BackendSpec, Completion, FinishState, SampleParams};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("environment variable {var} holding the API token is not set")]
    MissingAuth { var: String },
    #[error("replay cache directory {path} does not exist")]
    MissingReplayDir { path: String },
    #[error("{0}")]
    Transport(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

/// One `sample` call as seen by the client.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CallRecord {
    pub program_id: String,
    pub trial: u32,
    pub stage: super::Stage,
    pub completions: u32,
    pub cache_hits: u32,
    pub backend_errors: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientStats {
    pub requests: u64,
    pub completions: u64,
    pub cache_hits: u64,
    pub transport_calls: u64,
    pub backend_errors: u64,
}

#[derive(Default)]
struct Counters {
    requests: AtomicU64,
    completions: AtomicU64,
    cache_hits: AtomicU64,
    transport_calls: AtomicU64,
    backend_errors: AtomicU64,
}

/// Samples completions for one model, serving cached slots first.
pub struct ModelClient {
    spec: BackendSpec,
    cache: ReplayCache,
    transport: Option<Arc<dyn Transport>>,
    retry: RetryPolicy,
    counters: Counters,
    log: Mutex<Vec<CallRecord>>,
}

impl ModelClient {
    /// Builds a client for `spec`. Replay backends read from their
    /// directory; HTTP backends persist into `cache_dir`.
    pub fn from_spec(spec: &BackendSpec, cache_dir: &Path) -> Result<Self, GatewayError> {
        match spec.kind {
            BackendKind::ScriptedReplay => {
                let dir = PathBuf::from(&spec.endpoint_or_path);
                if !dir.is_dir() {
                    return Err(GatewayError::MissingReplayDir {
                        path: spec.endpoint_or_path.clone(),
                    });
                }
                Ok(Self::new(spec.clone(), ReplayCache::new(dir), None))
            }
            BackendKind::HttpChat => {
                let token = match &spec.auth_env_var {
                    Some(var) => Some(
                        std::env::var(var)
                            .ok()
                            .filter(|v| !v.is_empty())
                            .ok_or_else(|| GatewayError::MissingAuth { var: var.clone() })?,
                    ),
                    None => None,
                };
                let http = HttpTransport::new(&spec.endpoint_or_path, token)
                    .map_err(|e| GatewayError::Transport(e.message))?;
                Ok(Self::new(
                    spec.clone(),
                    ReplayCache::new(cache_dir),
                    Some(Arc::new(http)),
                ))
            }
        }
    }

    pub fn new(
        spec: BackendSpec,
        cache: ReplayCache,
        transport: Option<Arc<dyn Transport>>,
    ) -> Self {
        Self {
            spec,
            cache,
            transport,
            retry: RetryPolicy::default(),
            counters: Counters::default(),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn spec(&self) -> &BackendSpec {
        &self.spec
    }

    pub fn cache(&self) -> &ReplayCache {
        &self.cache
    }

    pub fn stats(&self) -> ClientStats {
        let c = &self.counters;
        ClientStats {
            requests: c.requests.load(Ordering::Relaxed),
            completions: c.completions.load(Ordering::Relaxed),
            cache_hits: c.cache_hits.load(Ordering::Relaxed),
            transport_calls: c.transport_calls.load(Ordering::Relaxed),
            backend_errors: c.backend_errors.load(Ordering::Relaxed),
        }
    }

    pub fn calls(&self) -> Vec<CallRecord> {
        self.log.lock().expect("call log").clone()
    }

    pub fn digest(&self, prompt: &str, params: &SampleParams, index: u32) -> String {
        DigestInput {
            count: params.count,
            index,
            model: &self.spec.model_name,
            prompt,
            seed: params.seed,
            temperature: params.temperature,
        }
        .digest()
    }

    /// Returns exactly `params.count` completions in index order. Slots the
    /// backend could not fill are `backend_error` placeholders.
    pub fn sample(&self, prompt: &str, params: &SampleParams, tag: &RequestTag) -> Vec<Completion> {
        let digests: Vec<String> = (0..params.count)
            .map(|i| self.digest(prompt, params, i))
            .collect();
        let mut slots: Vec<Option<CachedCompletion>> =
            digests.iter().map(|d| self.cache.get(d)).collect();
        let hits = slots.iter().filter(|s| s.is_some()).count() as u32;
        let missing: Vec<u32> = (0..params.count)
            .filter(|&i| slots[i as usize].is_none())
            .collect();

        if !missing.is_empty() {
            if let Some(fetched) = self.fetch(prompt, params, &missing, tag) {
                for (index, raw) in missing.iter().zip(fetched) {
                    let completion = CachedCompletion {
                        text: raw.text,
                        finish_state: if raw.truncated {
                            FinishState::Truncated
                        } else {
                            FinishState::Complete
                        },
                    };
                    if let Err(e) = self.cache.put(&digests[*index as usize], &completion) {
                        log::warn!("could not persist completion: {e}");
                    }
                    slots[*index as usize] = Some(completion);
                }
            }
        }

        let completions: Vec<Completion> = slots
            .into_iter()
            .enumerate()
            .map(|(i, slot)| match slot {
                Some(c) => Completion {
                    text: c.text,
                    index: i as u32,
                    finish_state: c.finish_state,
                },
                None => Completion {
                    text: String::new(),
                    index: i as u32,
                    finish_state: FinishState::BackendError,
                },
            })
            .collect();
        let errors = completions
            .iter()
            .filter(|c| c.finish_state == FinishState::BackendError)
            .count() as u32;

        let c = &self.counters;
        c.requests.fetch_add(1, Ordering::Relaxed);
        c.completions
            .fetch_add(u64::from(params.count), Ordering::Relaxed);
        c.cache_hits.fetch_add(u64::from(hits), Ordering::Relaxed);
        c.backend_errors
            .fetch_add(u64::from(errors), Ordering::Relaxed);
        self.log.lock().expect("call log").push(CallRecord {
            program_id: tag.program_id.clone(),
            trial: tag.trial,
            stage: tag.stage,
            completions: params.count,
            cache_hits: hits,
            backend_errors: errors,
        });
        completions
    }

    fn fetch(
        &self,
        prompt: &str,
        params: &SampleParams,
        indices: &[u32],
        tag: &RequestTag,
    ) -> Option<Vec<RawCompletion>> {
        let transport = self.transport.as_ref()?;
        let request = ChatRequest {
            model: self.spec.model_name.clone(),
            prompt: prompt.to_string(),
            temperature: params.temperature,
            seed: params.seed,
            count: params.count,
            indices: indices.to_vec(),
        };
        let mut delay = self.retry.base_delay;
        for attempt in 0..=self.retry.retries {
            self.counters
                .transport_calls
                .fetch_add(1, Ordering::Relaxed);
            match transport.complete(&request, tag) {
                Ok(raw) => return Some(raw),
                Err(e) if e.retryable && attempt < self.retry.retries => {
                    log::debug!("retrying {} after: {}", tag.program_id, e.message);
                    thread::sleep(delay);
                    delay *= 2;
                }
                Err(e) => {
                    log::warn!(
                        "{} trial {} {}: {}",
                        tag.program_id,
                        tag.trial,
                        tag.stage.as_str(),
                        e.message
                    );
                    return None;
                }
            }
        }
        None
    }
}
