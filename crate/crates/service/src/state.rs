use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use lexlabel::gateway::EmbeddingGateway;
use lexlabel::{Error, Result, SemanticIndex, Taxonomy};

/// One consistent view of the label space.
#[derive(Debug, Clone)]
pub struct Snapshot {
    /// Labels without embeddings; the vectors live in `index`.
    pub taxonomy: Taxonomy,
    pub index: SemanticIndex,
}

impl Snapshot {
    pub fn version(&self) -> u64 {
        self.taxonomy.version()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceConfig {
    /// Output size when a request gives none, normally the tuned `k`.
    pub default_k: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { default_k: 5 }
    }
}

#[derive(Default)]
pub(crate) struct Counters {
    pub requests: AtomicU64,
    pub predictions: AtomicU64,
    pub mutations: AtomicU64,
}

pub(crate) struct Inner {
    snapshot: RwLock<Arc<Snapshot>>,
    /// Serializes mutations; readers never take it.
    pub writer: tokio::sync::Mutex<()>,
    pub gateway: Option<Arc<EmbeddingGateway>>,
    pub config: ServiceConfig,
    pub counters: Counters,
}

/// Shared service state, cheap to clone.
#[derive(Clone)]
pub struct AppState(pub(crate) Arc<Inner>);

impl AppState {
    /// The index must have been built from `taxonomy` at the same version.
    pub fn new(
        taxonomy: Taxonomy,
        index: SemanticIndex,
        gateway: Option<Arc<EmbeddingGateway>>,
        config: ServiceConfig,
    ) -> Result<Self> {
        if config.default_k == 0 {
            return Err(Error::InvalidK(0));
        }
        if taxonomy.version() != index.version() || taxonomy.len() != index.len() {
            return Err(Error::InvalidInput(format!(
                "index (version {}, {} labels) does not match taxonomy (version {}, {} labels)",
                index.version(),
                index.len(),
                taxonomy.version(),
                taxonomy.len()
            )));
        }
        if let Some(e) = taxonomy.ids().find(|id| !index.contains(id.as_str())) {
            return Err(Error::InvalidInput(format!("label {e} is missing from the index")));
        }
        if let Some(expected) = gateway.as_ref().and_then(|g| g.expected_dim()) {
            if expected != index.dim() {
                return Err(Error::DimensionMismatch {
                    expected: index.dim(),
                    actual: expected,
                });
            }
        }
        let mut taxonomy = taxonomy;
        taxonomy.clear_embeddings();
        Ok(AppState(Arc::new(Inner {
            snapshot: RwLock::new(Arc::new(Snapshot { taxonomy, index })),
            writer: tokio::sync::Mutex::new(()),
            gateway,
            config,
            counters: Counters::default(),
        })))
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.0.snapshot.read().expect("snapshot lock").clone()
    }

    pub(crate) fn publish(&self, next: Snapshot) {
        *self.0.snapshot.write().expect("snapshot lock") = Arc::new(next);
        self.0.counters.mutations.fetch_add(1, Ordering::Relaxed);
    }

    pub fn config(&self) -> ServiceConfig {
        self.0.config
    }

    pub fn requests_served(&self) -> u64 {
        self.0.counters.requests.load(Ordering::Relaxed)
    }
}
