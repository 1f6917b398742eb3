//! Everything that produces embedding vectors.
//!
//! The engine never runs a model. Vectors come either from a precomputed
//! vector file ([`vecfile`]) or from an external service reached through an
//! [`Embedder`], wrapped by an [`EmbeddingGateway`] that adds caching,
//! batching, retries and dimension checks.

mod cache;
mod hashing;
mod http;
pub mod vecfile;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use cache::{cache_key, CacheKey, EmbeddingCache};
pub use hashing::HashingEmbedder;
pub use http::HttpEmbedder;
pub use vecfile::{load_vector_file, write_vector_file, VectorFile};

use crate::error::{Error, Result};
use crate::vector::Embedding;

/// A text-to-vector backend. Implementations return raw vectors; validation
/// happens in the gateway.
pub trait Embedder: Send + Sync {
    fn model_name(&self) -> &str;
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub batch_size: usize,
    /// Retries after the first attempt, for transient failures only.
    pub max_retries: u32,
    pub initial_backoff: Duration,
    /// Maximum number of batches sent concurrently.
    pub max_in_flight: usize,
    pub expected_dim: Option<usize>,
    /// Texts longer than this are sent anyway, with a warning.
    pub warn_chars: Option<usize>,
    /// Prepended to every text before embedding, e.g. an instruction for
    /// instruction-tuned embedders. Empty by default.
    pub prefix: String,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            batch_size: 32,
            max_retries: 3,
            initial_backoff: Duration::from_millis(200),
            max_in_flight: 4,
            expected_dim: None,
            warn_chars: None,
            prefix: String::new(),
        }
    }
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.max_in_flight == 0 {
            return Err(Error::InvalidConfig("max_in_flight must be at least 1".into()));
        }
        if self.expected_dim == Some(0) {
            return Err(Error::InvalidConfig("expected_dim must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GatewayStats {
    /// Successful or failed calls to the embedder, retries included.
    pub remote_calls: u64,
    pub texts_sent: u64,
    pub cache_hits: u64,
    pub retries: u64,
}

#[derive(Default)]
struct Counters {
    remote_calls: AtomicU64,
    texts_sent: AtomicU64,
    cache_hits: AtomicU64,
    retries: AtomicU64,
}

pub struct EmbeddingGateway {
    embedder: Arc<dyn Embedder>,
    cache: Option<Arc<EmbeddingCache>>,
    config: GatewayConfig,
    counters: Counters,
}

impl std::fmt::Debug for EmbeddingGateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmbeddingGateway")
            .field("model", &self.embedder.model_name())
            .field("config", &self.config)
            .field("cached", &self.cache.is_some())
            .finish()
    }
}

impl EmbeddingGateway {
    pub fn new(embedder: Arc<dyn Embedder>, cache: Option<Arc<EmbeddingCache>>, config: GatewayConfig) -> Result<Self> {
        config.validate()?;
        Ok(EmbeddingGateway {
            embedder,
            cache,
            config,
            counters: Counters::default(),
        })
    }

    pub fn model_name(&self) -> &str {
        self.embedder.model_name()
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn expected_dim(&self) -> Option<usize> {
        self.config.expected_dim
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            remote_calls: self.counters.remote_calls.load(Ordering::Relaxed),
            texts_sent: self.counters.texts_sent.load(Ordering::Relaxed),
            cache_hits: self.counters.cache_hits.load(Ordering::Relaxed),
            retries: self.counters.retries.load(Ordering::Relaxed),
        }
    }

    /// One vector per text, in input order. The cache is consulted first;
    /// the remaining distinct texts are sent in batches and cached on
    /// success.
    pub fn embed_texts(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        for (index, t) in texts.iter().enumerate() {
            if t.trim().is_empty() {
                return Err(Error::EmptyText { index });
            }
            if let Some(limit) = self.config.warn_chars {
                let n = t.chars().count();
                if n > limit {
                    tracing::warn!(index, chars = n, limit, "long text sent to embedder unchanged");
                }
            }
        }
        let model = self.embedder.model_name().to_string();
        let prepared: Vec<String> = texts.iter().map(|t| format!("{}{t}", self.config.prefix)).collect();

        let mut out: Vec<Option<Embedding>> = vec![None; texts.len()];
        let mut pending: Vec<String> = Vec::new();
        let mut positions: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, t) in prepared.iter().enumerate() {
            if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&cache_key(&model, t))) {
                self.check_dim(&hit)?;
                self.counters.cache_hits.fetch_add(1, Ordering::Relaxed);
                out[i] = Some(hit);
                continue;
            }
            let slots = positions.entry(t.as_str()).or_default();
            if slots.is_empty() {
                pending.push(t.clone());
            }
            slots.push(i);
        }

        let batches: Vec<&[String]> = pending.chunks(self.config.batch_size).collect();
        let mut fetched: Vec<Embedding> = Vec::with_capacity(pending.len());
        for wave in batches.chunks(self.config.max_in_flight) {
            let results: Vec<Result<Vec<Embedding>>> = std::thread::scope(|s| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|batch| s.spawn(move || self.fetch_batch(batch)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("embedding worker panicked"))
                    .collect()
            });
            for r in results {
                fetched.extend(r?);
            }
        }

        if let Some(first) = fetched.first().or_else(|| out.iter().flatten().next()) {
            let dim = first.dim();
            for e in fetched.iter().chain(out.iter().flatten()) {
                if e.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: e.dim(),
                    });
                }
            }
        }
        for (text, e) in pending.iter().zip(fetched) {
            if let Some(cache) = &self.cache {
                cache.insert(cache_key(&model, text), e.clone())?;
            }
            for &i in &positions[text.as_str()] {
                out[i] = Some(e.clone());
            }
        }
        Ok(out.into_iter().map(|e| e.expect("every slot filled")).collect())
    }

    fn check_dim(&self, e: &Embedding) -> Result<()> {
        match self.config.expected_dim {
            Some(expected) if expected != e.dim() => Err(Error::DimensionMismatch {
                expected,
                actual: e.dim(),
            }),
            _ => Ok(()),
        }
    }

    fn fetch_batch(&self, batch: &[String]) -> Result<Vec<Embedding>> {
        let mut backoff = self.config.initial_backoff;
        let mut attempt = 0;
        let raw = loop {
            self.counters.remote_calls.fetch_add(1, Ordering::Relaxed);
            self.counters
                .texts_sent
                .fetch_add(batch.len() as u64, Ordering::Relaxed);
            match self.embedder.embed_batch(batch) {
                Ok(v) => break v,
                Err(Error::ServiceUnreachable(msg)) if attempt < self.config.max_retries => {
                    attempt += 1;
                    self.counters.retries.fetch_add(1, Ordering::Relaxed);
                    tracing::warn!(attempt, error = %msg, "embedding call failed; retrying");
                    std::thread::sleep(backoff);
                    backoff = backoff.saturating_mul(2);
                }
                Err(e) => return Err(e),
            }
        };
        if raw.len() != batch.len() {
            return Err(Error::MalformedResponse(format!(
                "sent {} texts, received {} vectors",
                batch.len(),
                raw.len()
            )));
        }
        raw.into_iter()
            .map(|v| {
                let e = Embedding::new(v)?;
                self.check_dim(&e)?;
                Ok(e)
            })
            .collect()
    }
}

/// Settings for reaching an HTTP embedding service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    pub timeout: Duration,
    pub auth_token: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub gateway: GatewayConfig,
}

impl RemoteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.timeout.is_zero() {
            return Err(Error::InvalidConfig("timeout must be positive".into()));
        }
        self.gateway.validate()
    }

    pub fn connect(&self) -> Result<EmbeddingGateway> {
        self.validate()?;
        let embedder = HttpEmbedder::new(&self.base_url, &self.model, self.timeout, self.auth_token.clone());
        let cache = match &self.cache_dir {
            Some(dir) => EmbeddingCache::persistent(dir)?,
            None => EmbeddingCache::in_memory(),
        };
        EmbeddingGateway::new(Arc::new(embedder), Some(Arc::new(cache)), self.gateway.clone())
    }
}

/// Where embeddings for a set of records come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    /// Precomputed vectors keyed by record id.
    VectorFile {
        path: PathBuf,
        expected_dim: Option<usize>,
    },
    RemoteService(RemoteConfig),
    /// Offline feature hashing, see [`HashingEmbedder`].
    Hashing {
        dim: usize,
    },
}

/// An [`EmbeddingSource`] ready to answer lookups.
#[derive(Debug)]
pub enum OpenSource {
    Vectors {
        dim: usize,
        by_id: HashMap<String, Embedding>,
    },
    Gateway(EmbeddingGateway),
}

impl EmbeddingSource {
    pub fn open(&self) -> Result<OpenSource> {
        match self {
            EmbeddingSource::VectorFile { path, expected_dim } => {
                let file = load_vector_file(path)?;
                if let Some(expected) = expected_dim {
                    if *expected != file.dim {
                        return Err(Error::DimensionMismatch {
                            expected: *expected,
                            actual: file.dim,
                        });
                    }
                }
                let mut by_id = HashMap::with_capacity(file.records.len());
                for (id, e) in file.records {
                    if by_id.insert(id.clone(), e).is_some() {
                        return Err(Error::InvalidInput(format!(
                            "{}: id {id} appears twice",
                            path.display()
                        )));
                    }
                }
                Ok(OpenSource::Vectors { dim: file.dim, by_id })
            }
            EmbeddingSource::RemoteService(cfg) => Ok(OpenSource::Gateway(cfg.connect()?)),
            EmbeddingSource::Hashing { dim } => {
                if *dim == 0 {
                    return Err(Error::InvalidConfig("dimension must be positive".into()));
                }
                let gateway = EmbeddingGateway::new(
                    Arc::new(HashingEmbedder::new(*dim)),
                    None,
                    GatewayConfig {
                        expected_dim: Some(*dim),
                        ..GatewayConfig::default()
                    },
                )?;
                Ok(OpenSource::Gateway(gateway))
            }
        }
    }
}

impl OpenSource {
    /// Embeds `(id, text)` items: vector files look up by id, gateways
    /// embed the text. Order is preserved.
    pub fn embed_items(&self, items: &[(&str, &str)]) -> Result<Vec<Embedding>> {
        match self {
            OpenSource::Vectors { by_id, .. } => items
                .iter()
                .map(|(id, _)| {
                    by_id
                        .get(*id)
                        .cloned()
                        .ok_or_else(|| Error::MissingEmbedding(id.to_string()))
                })
                .collect(),
            OpenSource::Gateway(g) => {
                let texts: Vec<String> = items.iter().map(|(_, t)| t.to_string()).collect();
                g.embed_texts(&texts)
            }
        }
    }
}
