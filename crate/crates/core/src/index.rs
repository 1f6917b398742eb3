//! Exact cosine top-k search over unit-normalized rows.
//!
//! [`FlatIndex`] is the shared scan structure. [`SemanticIndex`] specializes
//! it to label embeddings and tracks the taxonomy version it mirrors; the
//! neighbor-vote corpus index in [`crate::annotator`] reuses it for document
//! embeddings.
//!
//! Rows are held behind `Arc`, so cloning an index to build the next snapshot
//! copies pointers only. Adding a row normalizes that row and nothing else.

use std::fs;
use std::hash::Hash;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{vecfile, EmbeddingGateway};
use crate::model::{rank_order, LabelEntry, LabelId, ScoredLabel, Taxonomy};
use crate::vector::{self, Embedding};

/// Work counters shared by an index and every snapshot cloned from it.
#[derive(Debug, Default)]
pub struct OpCounters {
    normalizations: AtomicU64,
    similarity_evaluations: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CounterSnapshot {
    /// Rows normalized on insertion.
    pub normalizations: u64,
    /// Row-query dot products computed by searches.
    pub similarity_evaluations: u64,
}

impl OpCounters {
    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            normalizations: self.normalizations.load(Ordering::Relaxed),
            similarity_evaluations: self.similarity_evaluations.load(Ordering::Relaxed),
        }
    }
}

/// A row id plus its cosine score against the query.
#[derive(Debug, Clone, PartialEq)]
pub struct Hit<K> {
    pub id: K,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct FlatIndex<K> {
    dim: usize,
    rows: IndexMap<K, Arc<[f32]>>,
    counters: Arc<OpCounters>,
}

impl<K> FlatIndex<K>
where
    K: Clone + Ord + Hash + Eq,
{
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyVector);
        }
        Ok(FlatIndex {
            dim,
            rows: IndexMap::new(),
            counters: Arc::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains<Q>(&self, id: &Q) -> bool
    where
        K: std::borrow::Borrow<Q>,
        Q: Hash + Eq + ?Sized,
    {
        self.rows.contains_key(id)
    }

    pub fn counters(&self) -> CounterSnapshot {
        self.counters.snapshot()
    }

    /// Stored unit rows in insertion order.
    pub fn rows(&self) -> impl Iterator<Item = (&K, &[f32])> {
        self.rows.iter().map(|(k, v)| (k, &**v))
    }

    pub(crate) fn row_arc(&self, id: &K) -> Option<&Arc<[f32]>> {
        self.rows.get(id)
    }

    /// Normalizes `embedding` and appends it. `id` must be new.
    pub fn insert(&mut self, id: K, embedding: &Embedding) -> Result<()> {
        if embedding.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: embedding.dim(),
            });
        }
        if self.rows.contains_key(&id) {
            return Err(Error::InvalidInput("duplicate row id".into()));
        }
        let unit = vector::unit_f32(embedding.as_slice())?;
        self.counters.normalizations.fetch_add(1, Ordering::Relaxed);
        self.rows.insert(id, unit.into());
        Ok(())
    }

    /// Appends a row that is already unit length (loaded from disk).
    pub(crate) fn insert_unit(&mut self, id: K, unit: Vec<f32>) -> Result<()> {
        if unit.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: unit.len(),
            });
        }
        let n = vector::norm(&unit);
        if (n - 1.0).abs() > 1e-5 {
            return Err(Error::InvalidInput(format!("stored row has norm {n}, expected 1")));
        }
        self.rows.insert(id, unit.into());
        Ok(())
    }

    pub fn remove<Q>(&mut self, id: &Q) -> bool
    where
        K: std::borrow::Borrow<Q>,
        Q: Hash + Eq + ?Sized,
    {
        self.rows.shift_remove(id).is_some()
    }

    /// The `min(k, len)` rows most cosine-similar to `query`, ranked by score
    /// descending and then id ascending.
    pub fn search(&self, query: &Embedding, k: usize) -> Result<Vec<Hit<K>>> {
        if k == 0 {
            return Err(Error::InvalidK(k));
        }
        if self.rows.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if query.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: query.dim(),
            });
        }
        let q = vector::unit_f64(query.as_slice())?;
        let mut scored: Vec<(f64, &K)> = self.rows.iter().map(|(id, row)| (score_row(row, &q), id)).collect();
        self.counters
            .similarity_evaluations
            .fetch_add(scored.len() as u64, Ordering::Relaxed);

        let cmp = |a: &(f64, &K), b: &(f64, &K)| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1));
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_unstable_by(cmp);
        Ok(scored
            .into_iter()
            .map(|(score, id)| Hit { id: id.clone(), score })
            .collect())
    }
}

fn score_row(row: &[f32], unit_query: &[f64]) -> f64 {
    let s: f64 = row.iter().zip(unit_query).map(|(&r, &q)| f64::from(r) * q).sum();
    vector::clamp_unit(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexStats {
    pub labels: usize,
    pub dim: usize,
    pub version: u64,
}

/// The label index: one unit row per taxonomy label.
#[derive(Debug, Clone)]
pub struct SemanticIndex {
    rows: FlatIndex<LabelId>,
    taxonomy_version: u64,
}

impl SemanticIndex {
    /// Indexes every label of `taxonomy`; all must carry embeddings of one
    /// common dimension.
    pub fn build(taxonomy: &Taxonomy) -> Result<Self> {
        let mut entries = taxonomy.entries();
        let first = entries.next().ok_or(Error::EmptyTaxonomy)?;
        let dim = first
            .embedding
            .as_ref()
            .ok_or_else(|| Error::MissingEmbedding(first.id.to_string()))?
            .dim();
        let mut index = SemanticIndex::empty(dim, taxonomy.version())?;
        for entry in taxonomy.entries() {
            let e = entry
                .embedding
                .as_ref()
                .ok_or_else(|| Error::MissingEmbedding(entry.id.to_string()))?;
            index.rows.insert(entry.id.clone(), e)?;
        }
        Ok(index)
    }

    /// An index with no rows. It can be populated but not searched.
    pub fn empty(dim: usize, taxonomy_version: u64) -> Result<Self> {
        Ok(SemanticIndex {
            rows: FlatIndex::new(dim)?,
            taxonomy_version,
        })
    }

    /// Appends one label row and bumps the version. Existing rows are not
    /// touched.
    pub fn add_label(&mut self, entry: &LabelEntry) -> Result<u64> {
        if self.rows.contains(entry.id.as_str()) {
            return Err(Error::DuplicateLabel(entry.id.to_string()));
        }
        let e = entry
            .embedding
            .as_ref()
            .ok_or_else(|| Error::MissingEmbedding(entry.id.to_string()))?;
        self.rows.insert(entry.id.clone(), e)?;
        self.taxonomy_version += 1;
        Ok(self.taxonomy_version)
    }

    /// Removing the final row is allowed and leaves an unsearchable index.
    pub fn remove_label(&mut self, id: &str) -> Result<u64> {
        if !self.rows.remove(id) {
            return Err(Error::UnknownLabel(id.to_owned()));
        }
        self.taxonomy_version += 1;
        Ok(self.taxonomy_version)
    }

    pub fn search_top_k(&self, query: &Embedding, k: usize) -> Result<Vec<ScoredLabel>> {
        let hits = self.rows.search(query, k)?;
        let out: Vec<ScoredLabel> = hits
            .into_iter()
            .map(|h| ScoredLabel {
                label: h.id,
                score: h.score,
            })
            .collect();
        debug_assert!(out.windows(2).all(|w| rank_order(&w[0], &w[1]).is_lt()));
        Ok(out)
    }

    pub fn stats(&self) -> IndexStats {
        IndexStats {
            labels: self.rows.len(),
            dim: self.rows.dim(),
            version: self.taxonomy_version,
        }
    }

    pub fn version(&self) -> u64 {
        self.taxonomy_version
    }

    pub fn dim(&self) -> usize {
        self.rows.dim()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.rows.contains(id)
    }

    pub fn counters(&self) -> CounterSnapshot {
        self.rows.counters()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&LabelId, &[f32])> {
        self.rows.rows()
    }

    /// Whether two indices share the same allocation for `id`'s row.
    pub fn shares_row(&self, other: &SemanticIndex, id: &LabelId) -> bool {
        match (self.rows.row_arc(id), other.rows.row_arc(id)) {
            (Some(a), Some(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

const MANIFEST_FILE: &str = "taxonomy.jsonl";
const VECTORS_FILE: &str = "vectors.txve";
const META_FILE: &str = "index.json";

#[derive(Debug, Serialize, Deserialize)]
struct IndexMeta {
    format: u32,
    dim: usize,
    version: u64,
    count: usize,
}

/// Embeds a new label's description with one gateway call and adds it to
/// both the taxonomy and the index. Existing rows are not touched.
pub fn add_described_label(
    taxonomy: &mut Taxonomy,
    index: &mut SemanticIndex,
    entry: LabelEntry,
    gateway: &EmbeddingGateway,
) -> Result<u64> {
    if taxonomy.contains(entry.id.as_str()) || index.contains(entry.id.as_str()) {
        return Err(Error::DuplicateLabel(entry.id.to_string()));
    }
    entry.check()?;
    let embedding = gateway
        .embed_texts(std::slice::from_ref(&entry.description))?
        .pop()
        .expect("one text in, one vector out");
    let entry = entry.with_embedding(embedding);
    let version = index.add_label(&entry)?;
    taxonomy.add(entry)?;
    Ok(version)
}

/// Writes `dir/taxonomy.jsonl`, `dir/vectors.txve` and `dir/index.json`.
///
/// The taxonomy and index must describe the same label set at the same
/// version.
pub fn save_index(dir: impl AsRef<Path>, taxonomy: &Taxonomy, index: &SemanticIndex) -> Result<()> {
    let dir = dir.as_ref();
    if taxonomy.version() != index.version()
        || taxonomy.len() != index.len()
        || !taxonomy.ids().all(|id| index.contains(id.as_str()))
    {
        return Err(Error::InvalidInput(
            "taxonomy and index describe different label sets".into(),
        ));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    crate::dataset::write_taxonomy(dir.join(MANIFEST_FILE), taxonomy)?;
    // Row order follows the taxonomy so the files diff cleanly.
    let rows = taxonomy
        .ids()
        .map(|id| (id.as_str(), index.rows.row_arc(id).expect("checked above")));
    vecfile::write_vector_file(dir.join(VECTORS_FILE), index.dim(), rows)?;
    let meta = IndexMeta {
        format: 1,
        dim: index.dim(),
        version: index.version(),
        count: index.len(),
    };
    let mut json = serde_json::to_string_pretty(&meta).expect("plain struct");
    json.push('\n');
    vecfile::write_atomic(&dir.join(META_FILE), json.as_bytes())
}

/// Loads an index written by [`save_index`]. The returned taxonomy carries the
/// stored unit rows as its embeddings.
pub fn load_index(dir: impl AsRef<Path>) -> Result<(Taxonomy, SemanticIndex)> {
    let dir = dir.as_ref();
    let meta_path = dir.join(META_FILE);
    let meta = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: IndexMeta =
        serde_json::from_str(&meta).map_err(|e| Error::InvalidInput(format!("{}: {e}", meta_path.display())))?;
    let vectors = vecfile::load_vector_file(dir.join(VECTORS_FILE))?;
    if vectors.dim != meta.dim || vectors.records.len() != meta.count {
        return Err(Error::InvalidInput(format!(
            "index metadata (dim {}, count {}) disagrees with vector file (dim {}, count {})",
            meta.dim,
            meta.count,
            vectors.dim,
            vectors.records.len()
        )));
    }
    let entries = crate::dataset::read_taxonomy_entries(dir.join(MANIFEST_FILE))?;
    if entries.len() != vectors.records.len() {
        return Err(Error::InvalidInput(format!(
            "taxonomy manifest has {} labels, vector file has {}",
            entries.len(),
            vectors.records.len()
        )));
    }
    let mut index = SemanticIndex::empty(meta.dim, meta.version)?;
    let mut with_vectors = Vec::with_capacity(entries.len());
    for (entry, (id, e)) in entries.into_iter().zip(vectors.records) {
        if entry.id.as_str() != id {
            return Err(Error::InvalidInput(format!(
                "taxonomy manifest lists {} where vector file has {id}",
                entry.id
            )));
        }
        index.rows.insert_unit(entry.id.clone(), e.as_slice().to_vec())?;
        with_vectors.push(entry.with_embedding(e));
    }
    let taxonomy = if with_vectors.is_empty() {
        Taxonomy::empty(meta.version)
    } else {
        Taxonomy::with_version(with_vectors, meta.version)?
    };
    Ok((taxonomy, index))
}
