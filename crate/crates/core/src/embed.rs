//! Sentence embeddings and cosine similarity.
//!
//! Backends implement [`Embedder`]. The stub backend is a pure function of
//! the text so every metric can run offline and reproducibly; the remote
//! backend speaks the OpenAI-compatible `/embeddings` wire format, which also
//! covers local inference servers. Any backend can be wrapped in a
//! [`CachedEmbedder`] that stores vectors on disk.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gateway::http::{post_json, HttpPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model_id: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, model_id: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Input("embedding vector is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("embedding vector has non-finite entries".into()));
        }
        Ok(Self {
            values,
            model_id: model_id.into(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

/// Cosine similarity, clamped to [-1, 1] against rounding.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    cosine(&a.values, &b.values)
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Input(format!("dimension mismatch: {} vs {}", a.len(), b.len())));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

pub trait Embedder: Send + Sync {
    fn model_id(&self) -> &str;
    fn dimension(&self) -> usize;
    /// Embed a batch; implementations may assume texts are non-empty.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>>;
}

/// One vector per text, in input order.
pub fn embed_sentences<S: AsRef<str>>(texts: &[S], embedder: &dyn Embedder) -> Result<Vec<EmbeddingVector>> {
    let refs: Vec<&str> = texts.iter().map(AsRef::as_ref).collect();
    if let Some(i) = refs.iter().position(|t| t.trim().is_empty()) {
        return Err(Error::Input(format!("text {i} is empty")));
    }
    if refs.is_empty() {
        return Ok(Vec::new());
    }
    let out = embedder.embed_batch(&refs)?;
    if out.len() != refs.len() {
        return Err(Error::provider(
            embedder.model_id(),
            format!("expected {} embeddings, got {}", refs.len(), out.len()),
        ));
    }
    for v in &out {
        if v.dimension() != embedder.dimension() {
            return Err(Error::provider(
                embedder.model_id(),
                format!(
                    "embedding has dimension {}, model declares {}",
                    v.dimension(),
                    embedder.dimension()
                ),
            ));
        }
    }
    Ok(out)
}

pub const STUB_DIMENSION: usize = 256;
const WHOLE_TEXT_WEIGHT: f64 = 0.25;

/// Deterministic hashing embedder.
///
/// Lowercased word tokens are feature-hashed into signed buckets, and a small
/// pseudo-random component keyed on the exact text keeps distinct strings
/// apart. The result is unit-normalized. Pinned vectors override the hash for
/// specific texts, which lets tests build fixtures with known geometry.
#[derive(Debug, Clone)]
pub struct StubEmbedder {
    model_id: String,
    dimension: usize,
    pinned: HashMap<String, Vec<f64>>,
}

impl Default for StubEmbedder {
    fn default() -> Self {
        Self::new(STUB_DIMENSION)
    }
}

impl StubEmbedder {
    pub fn new(dimension: usize) -> Self {
        Self {
            model_id: format!("stub-hash-{dimension}"),
            dimension: dimension.max(1),
            pinned: HashMap::new(),
        }
    }

    /// Return `values` whenever exactly `text` is embedded.
    pub fn pin(mut self, text: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.dimension {
            return Err(Error::Input(format!(
                "pinned vector has dimension {}, stub has {}",
                values.len(),
                self.dimension
            )));
        }
        self.pinned.insert(text.into(), values);
        Ok(self)
    }

    pub fn vector(&self, text: &str) -> Vec<f64> {
        if let Some(v) = self.pinned.get(text) {
            return v.clone();
        }
        let mut v = vec![0.0; self.dimension];
        for token in tokens(text) {
            let d = digest(&["tok", &token]);
            let idx = (u64::from_le_bytes(d[..8].try_into().unwrap()) % self.dimension as u64) as usize;
            let sign = if d[8] & 1 == 0 { 1.0 } else { -1.0 };
            v[idx] += sign;
        }
        normalize(&mut v);
        let mut rng = ChaCha8Rng::from_seed(digest(&["text", text]));
        let mut noise: Vec<f64> = (0..self.dimension).map(|_| rng.gen_range(-1.0..1.0)).collect();
        normalize(&mut noise);
        for (x, n) in v.iter_mut().zip(noise) {
            *x += WHOLE_TEXT_WEIGHT * n;
        }
        normalize(&mut v);
        v
    }
}

impl Embedder for StubEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        texts
            .iter()
            .map(|t| EmbeddingVector::new(self.vector(t), self.model_id.clone()))
            .collect()
    }
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn digest(parts: &[&str]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    h.finalize().into()
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// OpenAI-compatible embeddings endpoint.
pub struct RemoteEmbedder {
    model: String,
    endpoint: String,
    dimension: usize,
    credential_env: Option<String>,
    policy: HttpPolicy,
    batch_size: usize,
}

impl RemoteEmbedder {
    fn url(&self) -> String {
        format!("{}/embeddings", self.endpoint.trim_end_matches('/'))
    }
}

impl Embedder for RemoteEmbedder {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        let mut headers = Vec::new();
        if let Some(var) = &self.credential_env {
            let key =
                std::env::var(var).map_err(|_| Error::Config(format!("credential variable `{var}` is not set")))?;
            headers.push(("authorization".to_string(), format!("Bearer {key}")));
        }
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size.max(1)) {
            let body = json!({ "model": self.model, "input": chunk });
            let reply = post_json(&self.model, &self.url(), &headers, &body, &self.policy)?;
            let data = reply
                .get("data")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::provider(&self.model, "response has no `data` array"))?;
            let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(data.len());
            for (pos, item) in data.iter().enumerate() {
                let index = item.get("index").and_then(Value::as_u64).map_or(pos, |i| i as usize);
                let values: Vec<f64> = item
                    .get("embedding")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::provider(&self.model, "item has no `embedding`"))?
                    .iter()
                    .map(|x| x.as_f64().unwrap_or(f64::NAN))
                    .collect();
                rows.push((index, values));
            }
            rows.sort_by_key(|(i, _)| *i);
            for (_, values) in rows {
                out.push(
                    EmbeddingVector::new(values, self.model.clone())
                        .map_err(|e| Error::provider(&self.model, e.to_string()))?,
                );
            }
        }
        Ok(out)
    }
}

/// Embedding backend selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EmbeddingBackend {
    Stub {
        #[serde(default = "default_stub_dimension")]
        dimension: usize,
    },
    /// Any server exposing `/embeddings`, hosted or on localhost.
    Remote {
        model: String,
        endpoint: String,
        dimension: usize,
        #[serde(default)]
        credential_env: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
        #[serde(default = "default_retries")]
        max_retries: u32,
        #[serde(default = "default_batch")]
        batch_size: usize,
    },
}

fn default_stub_dimension() -> usize {
    STUB_DIMENSION
}
fn default_timeout() -> u64 {
    60
}
fn default_retries() -> u32 {
    2
}
fn default_batch() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    #[serde(flatten)]
    pub backend: EmbeddingBackend,
    /// Vectors are cached here when set.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            backend: EmbeddingBackend::Stub {
                dimension: STUB_DIMENSION,
            },
            cache_dir: None,
        }
    }
}

impl EmbeddingConfig {
    pub fn build(&self) -> Result<Arc<dyn Embedder>> {
        let inner: Arc<dyn Embedder> = match &self.backend {
            EmbeddingBackend::Stub { dimension } => {
                if *dimension == 0 {
                    return Err(Error::Config("stub dimension must be positive".into()));
                }
                Arc::new(StubEmbedder::new(*dimension))
            }
            EmbeddingBackend::Remote {
                model,
                endpoint,
                dimension,
                credential_env,
                timeout_secs,
                max_retries,
                batch_size,
            } => {
                if *dimension == 0 || *timeout_secs == 0 {
                    return Err(Error::Config(
                        "remote embedding dimension and timeout must be positive".into(),
                    ));
                }
                Arc::new(RemoteEmbedder {
                    model: model.clone(),
                    endpoint: endpoint.clone(),
                    dimension: *dimension,
                    credential_env: credential_env.clone(),
                    policy: HttpPolicy {
                        timeout: Duration::from_secs(*timeout_secs),
                        max_retries: *max_retries,
                        backoff: Duration::from_millis(500),
                    },
                    batch_size: *batch_size,
                })
            }
        };
        match &self.cache_dir {
            Some(dir) => Ok(Arc::new(CachedEmbedder::new(inner, dir)?)),
            None => Ok(inner),
        }
    }
}

/// Disk cache keyed by (model id, text digest): one little-endian `f64`
/// file per vector plus an append-only `index.jsonl`.
pub struct CachedEmbedder {
    inner: Arc<dyn Embedder>,
    dir: PathBuf,
    index_lock: Mutex<()>,
}

#[derive(Serialize)]
struct IndexEntry<'a> {
    key: &'a str,
    model_id: &'a str,
    dimension: usize,
    text_sha256: String,
}

impl CachedEmbedder {
    pub fn new(inner: Arc<dyn Embedder>, dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            inner,
            dir: dir.to_path_buf(),
            index_lock: Mutex::new(()),
        })
    }

    fn key(&self, text: &str) -> String {
        hex::encode(digest(&[self.inner.model_id(), text]))
    }

    fn load(&self, key: &str) -> Option<Vec<f64>> {
        let bytes = fs::read(self.dir.join(format!("{key}.bin"))).ok()?;
        if bytes.len() != self.inner.dimension() * 8 {
            return None;
        }
        Some(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    }

    fn store(&self, key: &str, text: &str, values: &[f64]) -> Result<()> {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        tmp.write_all(&bytes).map_err(|e| Error::io(tmp.path(), e))?;
        let target = self.dir.join(format!("{key}.bin"));
        tmp.persist(&target).map_err(|e| Error::io(&target, e.error))?;

        let entry = IndexEntry {
            key,
            model_id: self.inner.model_id(),
            dimension: values.len(),
            text_sha256: hex::encode(Sha256::digest(text.as_bytes())),
        };
        let line = serde_json::to_string(&entry)? + "\n";
        let _guard = self.index_lock.lock().unwrap_or_else(|p| p.into_inner());
        let index = self.dir.join("index.jsonl");
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&index)
            .and_then(|mut f| f.write_all(line.as_bytes()))
            .map_err(|e| Error::io(&index, e))
    }
}

impl Embedder for CachedEmbedder {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        let keys: Vec<String> = texts.iter().map(|t| self.key(t)).collect();
        let mut out: Vec<Option<Vec<f64>>> = keys.iter().map(|k| self.load(k)).collect();
        let missing: Vec<usize> = (0..texts.len()).filter(|&i| out[i].is_none()).collect();
        if !missing.is_empty() {
            let batch: Vec<&str> = missing.iter().map(|&i| texts[i]).collect();
            let fresh = self.inner.embed_batch(&batch)?;
            for (&i, v) in missing.iter().zip(fresh) {
                self.store(&keys[i], texts[i], &v.values)?;
                out[i] = Some(v.values);
            }
        }
        out.into_iter()
            .map(|v| EmbeddingVector::new(v.expect("filled above"), self.model_id()))
            .collect()
    }
}
