//! Provider access: conversation generation, transcript parsing and the
//! blinded judge protocol.
//!
//! A [`Gateway`] owns the response cache, per-provider rate limiters and a
//! count of real provider calls. It is shared by reference across workers.

mod config;
pub(crate) mod http;
mod judge;
mod mock;
mod provider;
mod transcript;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{ProviderConfig, ProviderKind};
pub use judge::{
    import_human_labels, judge_request, parse_judge_answer, Domain, InferredParameters, JudgeKind, LabelImport,
    RowError, JUDGED,
};
pub use mock::MockProvider;
pub use provider::{build_provider, ChatProvider, ChatRequest, Purpose};
pub(crate) use transcript::slug;
pub use transcript::{
    load_transcript, parse_output, save_transcript, Provenance, Transcript, TranscriptMetadata, TranscriptTurn,
    FLAG_COMPLEXITY_DROPPED, FLAG_REPAIRED, FLAG_TOTAL_TURNS_CORRECTED, FLAG_TURN_COUNT_MISMATCH,
};

use crate::error::{Error, Result};
use crate::prompt::PromptBundle;
use crate::util::write_atomic;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheEntry {
    provider_id: String,
    model_id: String,
    purpose: String,
    key: String,
    timestamp: String,
    raw: String,
}

struct TokenBucket {
    per_minute: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    fn new(per_minute: u32) -> Self {
        Self {
            per_minute: per_minute as f64,
            state: Mutex::new((per_minute as f64, Instant::now())),
        }
    }

    fn acquire(&self) {
        loop {
            let wait = {
                let mut s = self.state.lock().unwrap_or_else(|p| p.into_inner());
                let now = Instant::now();
                let refill = now.duration_since(s.1).as_secs_f64() * self.per_minute / 60.0;
                s.0 = (s.0 + refill).min(self.per_minute);
                s.1 = now;
                if s.0 >= 1.0 {
                    s.0 -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - s.0) * 60.0 / self.per_minute)
            };
            thread::sleep(wait);
        }
    }
}

pub struct Gateway {
    cache_dir: Option<PathBuf>,
    providers: Mutex<HashMap<String, Arc<dyn ChatProvider>>>,
    buckets: Mutex<HashMap<String, Arc<TokenBucket>>>,
    key_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    provider_calls: AtomicUsize,
}

impl Gateway {
    /// `cache_dir = None` disables response caching.
    pub fn new(cache_dir: Option<PathBuf>) -> Self {
        Self {
            cache_dir,
            providers: Mutex::new(HashMap::new()),
            buckets: Mutex::new(HashMap::new()),
            key_locks: Mutex::new(HashMap::new()),
            provider_calls: AtomicUsize::new(0),
        }
    }

    /// Use `provider` for every config with this id instead of building one.
    pub fn register_provider(&self, id: &str, provider: Arc<dyn ChatProvider>) {
        self.providers
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(id.to_string(), provider);
    }

    /// Requests that reached a provider (cache misses).
    pub fn provider_calls(&self) -> usize {
        self.provider_calls.load(Ordering::SeqCst)
    }

    fn provider(&self, cfg: &ProviderConfig) -> Result<Arc<dyn ChatProvider>> {
        let mut map = self.providers.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(p) = map.get(&cfg.id) {
            return Ok(p.clone());
        }
        let p: Arc<dyn ChatProvider> = Arc::from(build_provider(cfg)?);
        map.insert(cfg.id.clone(), p.clone());
        Ok(p)
    }

    fn throttle(&self, cfg: &ProviderConfig) {
        let Some(rpm) = cfg.requests_per_minute else {
            return;
        };
        let bucket = self
            .buckets
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .entry(cfg.id.clone())
            .or_insert_with(|| Arc::new(TokenBucket::new(rpm)))
            .clone();
        bucket.acquire();
    }

    fn cache_path(&self, cfg: &ProviderConfig, req: &ChatRequest) -> Option<PathBuf> {
        let dir = self.cache_dir.as_ref()?;
        let mut h = Sha256::new();
        for part in [&cfg.id, &cfg.model, req.purpose.as_str(), &req.key] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        Some(
            dir.join(transcript::slug(&cfg.id))
                .join(format!("{}.json", hex::encode(h.finalize()))),
        )
    }

    fn read_cache(path: &Path) -> Option<CacheEntry> {
        serde_json::from_str(&fs::read_to_string(path).ok()?).ok()
    }

    /// Serve from cache or call the provider; `accept` decides whether a
    /// fresh response is worth caching.
    fn complete<T>(
        &self,
        cfg: &ProviderConfig,
        req: &ChatRequest,
        accept: impl Fn(&str) -> Result<T>,
    ) -> Result<(T, String)> {
        let path = self.cache_path(cfg, req);
        let lock = path.as_ref().map(|p| {
            self.key_locks
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .entry(p.to_string_lossy().into_owned())
                .or_default()
                .clone()
        });
        let _guard = lock.as_ref().map(|l| l.lock().unwrap_or_else(|e| e.into_inner()));
        if let Some(entry) = path.as_deref().and_then(Self::read_cache) {
            if let Ok(v) = accept(&entry.raw) {
                return Ok((v, entry.timestamp));
            }
        }
        let provider = self.provider(cfg)?;
        self.throttle(cfg);
        self.provider_calls.fetch_add(1, Ordering::SeqCst);
        let raw = provider.complete(req)?;
        let timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        let value = accept(&raw)?;
        if let Some(path) = path {
            let entry = CacheEntry {
                provider_id: cfg.id.clone(),
                model_id: cfg.model.clone(),
                purpose: req.purpose.as_str().into(),
                key: req.key.clone(),
                timestamp: timestamp.clone(),
                raw,
            };
            write_atomic(&path, serde_json::to_string_pretty(&entry)?.as_bytes())?;
        }
        Ok((value, timestamp))
    }

    /// Generate one conversation from a compiled prompt.
    ///
    /// A turn count different from `bundle.target_turns` is flagged, not
    /// rejected.
    pub fn generate_conversation(
        &self,
        bundle: &PromptBundle,
        cfg: &ProviderConfig,
        seed: Option<u64>,
    ) -> Result<Transcript> {
        if !bundle.verify_hash() {
            return Err(Error::Integrity("prompt bundle hash does not match its content".into()));
        }
        let req = ChatRequest {
            key: bundle.content_hash.clone(),
            purpose: Purpose::Generate,
            system: bundle.system_text.clone(),
            user: bundle.instruction_text.clone(),
        };
        let (mut t, timestamp) = self.complete(cfg, &req, parse_output)?;
        if t.len() != bundle.target_turns as usize {
            t.flag(FLAG_TURN_COUNT_MISMATCH);
        }
        t.provenance = Some(Provenance {
            prompt_hash: bundle.content_hash.clone(),
            provider_id: cfg.id.clone(),
            model_id: cfg.model.clone(),
            timestamp,
            seed,
        });
        Ok(t)
    }

    /// Ask a judge to reconstruct the judged parameters from the transcript.
    pub fn judge_infer_parameters(
        &self,
        transcript: &Transcript,
        cfg: &ProviderConfig,
        conversation_id: &str,
    ) -> Result<InferredParameters> {
        transcript
            .check()
            .map_err(|m| Error::Input(format!("invalid transcript: {m}")))?;
        let req = judge_request(transcript);
        let (inferred, _) = self.complete(cfg, &req, |raw| parse_judge_answer(raw, conversation_id))?;
        Ok(inferred)
    }
}
