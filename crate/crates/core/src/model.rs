//! Labels, taxonomies, documents and predictions.

use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::Embedding;

/// Opaque, non-empty label identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LabelId(String);

impl LabelId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::EmptyLabelId);
        }
        Ok(LabelId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for LabelId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        LabelId::new(s)
    }
}

impl From<LabelId> for String {
    fn from(id: LabelId) -> Self {
        id.0
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for LabelId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// One label of the taxonomy: its identity, display name and the description
/// text that stands in for it in embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelEntry {
    pub id: LabelId,
    pub name: String,
    pub description: String,
    pub embedding: Option<Embedding>,
}

impl LabelEntry {
    pub fn new(id: &str, name: &str, description: &str) -> Result<Self> {
        Ok(LabelEntry {
            id: LabelId::new(id)?,
            name: name.to_owned(),
            description: description.to_owned(),
            embedding: None,
        })
    }

    pub fn with_embedding(mut self, embedding: Embedding) -> Self {
        self.embedding = Some(embedding);
        self
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.description.trim().is_empty() {
            return Err(Error::EmptyDescription(self.id.to_string()));
        }
        if let Some(e) = &self.embedding {
            if e.norm() == 0.0 {
                return Err(Error::ZeroVector);
            }
        }
        Ok(())
    }
}

/// The closed label space. Predictions are only ever drawn from here.
///
/// Every mutation bumps [`Taxonomy::version`]. A taxonomy is created with at
/// least one label; it may become empty through removals so that services can
/// be drained and repopulated.
#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    entries: IndexMap<LabelId, LabelEntry>,
    version: u64,
}

impl Taxonomy {
    pub fn new(entries: Vec<LabelEntry>) -> Result<Self> {
        Self::with_version(entries, 1)
    }

    /// Rebuilds a taxonomy at a known version, e.g. when loading a persisted
    /// index.
    pub fn with_version(entries: Vec<LabelEntry>, version: u64) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyTaxonomy);
        }
        let mut map = IndexMap::with_capacity(entries.len());
        for entry in entries {
            entry.check()?;
            if map.contains_key(&entry.id) {
                return Err(Error::DuplicateLabel(entry.id.to_string()));
            }
            map.insert(entry.id.clone(), entry);
        }
        Ok(Taxonomy { entries: map, version })
    }

    /// A taxonomy with no labels, for bootstrap flows.
    pub fn empty(version: u64) -> Self {
        Taxonomy {
            entries: IndexMap::new(),
            version,
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&LabelEntry> {
        self.entries.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &LabelId> {
        self.entries.keys()
    }

    pub fn entries(&self) -> impl Iterator<Item = &LabelEntry> {
        self.entries.values()
    }

    pub fn add(&mut self, entry: LabelEntry) -> Result<u64> {
        entry.check()?;
        if self.entries.contains_key(&entry.id) {
            return Err(Error::DuplicateLabel(entry.id.to_string()));
        }
        self.entries.insert(entry.id.clone(), entry);
        self.version += 1;
        Ok(self.version)
    }

    pub fn remove(&mut self, id: &str) -> Result<LabelEntry> {
        let entry = self
            .entries
            .shift_remove(id)
            .ok_or_else(|| Error::UnknownLabel(id.to_owned()))?;
        self.version += 1;
        Ok(entry)
    }

    /// Replaces an existing entry in place (same position).
    pub fn update(&mut self, entry: LabelEntry) -> Result<u64> {
        entry.check()?;
        let slot = self
            .entries
            .get_mut(&entry.id)
            .ok_or_else(|| Error::UnknownLabel(entry.id.to_string()))?;
        *slot = entry;
        self.version += 1;
        Ok(self.version)
    }

    /// Drops stored vectors, e.g. once an index owns them. Not a mutation
    /// of the label set, so the version is unchanged.
    pub fn clear_embeddings(&mut self) {
        for e in self.entries.values_mut() {
            e.embedding = None;
        }
    }

    /// Attaches embeddings in taxonomy order. Does not change the version:
    /// embeddings are derived data, not part of the label space.
    pub fn set_embeddings(&mut self, embeddings: Vec<Embedding>) -> Result<()> {
        if embeddings.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "{} embeddings for {} labels",
                embeddings.len(),
                self.len()
            )));
        }
        for (entry, e) in self.entries.values_mut().zip(embeddings) {
            if e.norm() == 0.0 {
                return Err(Error::ZeroVector);
            }
            entry.embedding = Some(e);
        }
        Ok(())
    }
}

/// A document `x` with optional gold label set `Y` and embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentRecord {
    pub id: String,
    pub text: String,
    pub gold_labels: Option<BTreeSet<LabelId>>,
    pub embedding: Option<Embedding>,
}

impl DocumentRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        DocumentRecord {
            id: id.into(),
            text: text.into(),
            gold_labels: None,
            embedding: None,
        }
    }

    pub fn with_gold<I, S>(mut self, labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set = labels
            .into_iter()
            .map(|s| LabelId::new(s))
            .collect::<Result<BTreeSet<_>>>()?;
        self.gold_labels = Some(set);
        Ok(self)
    }

    pub fn with_embedding(mut self, embedding: Embedding) -> Self {
        self.embedding = Some(embedding);
        self
    }

    /// Fails on the first gold label that is not in `taxonomy`.
    pub fn check_gold(&self, taxonomy: &Taxonomy) -> Result<()> {
        if let Some(gold) = &self.gold_labels {
            if let Some(bad) = gold.iter().find(|l| !taxonomy.contains(l.as_str())) {
                return Err(Error::GoldOutsideTaxonomy {
                    doc: self.id.clone(),
                    label: bad.to_string(),
                });
            }
        }
        Ok(())
    }

    pub(crate) fn require_embedding(&self) -> Result<&Embedding> {
        self.embedding
            .as_ref()
            .ok_or_else(|| Error::MissingDocEmbedding(self.id.clone()))
    }

    pub(crate) fn require_gold(&self) -> Result<&BTreeSet<LabelId>> {
        self.gold_labels
            .as_ref()
            .ok_or_else(|| Error::MissingGold(self.id.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredLabel {
    pub label: LabelId,
    pub score: f64,
}

/// Ranked labels predicted for one document.
///
/// Items are ordered by score descending, ties by ascending label id, with no
/// repeated labels. Only the annotator constructs these from index output.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub doc_id: String,
    items: Vec<ScoredLabel>,
}

impl PredictionSet {
    pub(crate) fn from_ranked(doc_id: String, items: Vec<ScoredLabel>) -> Self {
        debug_assert!(items.windows(2).all(|w| rank_order(&w[0], &w[1]).is_lt()));
        PredictionSet { doc_id, items }
    }

    /// Builds a set from arbitrary items, sorting them and rejecting repeats.
    pub fn from_items(doc_id: impl Into<String>, mut items: Vec<ScoredLabel>) -> Result<Self> {
        if let Some(item) = items.iter().find(|i| !i.score.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite score for label {}",
                item.label
            )));
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = items.iter().find(|i| !seen.insert(&i.label)) {
            return Err(Error::DuplicateLabel(dup.label.to_string()));
        }
        for i in &mut items {
            i.score += 0.0;
        }
        items.sort_by(rank_order);
        Ok(PredictionSet {
            doc_id: doc_id.into(),
            items,
        })
    }

    pub fn items(&self) -> &[ScoredLabel] {
        &self.items
    }

    pub fn labels(&self) -> impl Iterator<Item = &LabelId> {
        self.items.iter().map(|i| &i.label)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Keeps the `k` highest-ranked items.
    pub fn truncated(&self, k: usize) -> PredictionSet {
        PredictionSet {
            doc_id: self.doc_id.clone(),
            items: self.items.iter().take(k).cloned().collect(),
        }
    }

    pub fn to_record(&self) -> PredictionRecord {
        PredictionRecord {
            doc_id: self.doc_id.clone(),
            labels: self.items.iter().map(|i| i.label.to_string()).collect(),
            scores: self.items.iter().map(|i| i.score).collect(),
        }
    }
}

/// Score descending, then label id ascending.
pub(crate) fn rank_order(a: &ScoredLabel, b: &ScoredLabel) -> std::cmp::Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.label.cmp(&b.label))
}

/// One line of `predictions.jsonl`.
///
/// Labels are plain strings so that the same schema can carry third-party
/// output that may name labels outside the taxonomy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub doc_id: String,
    pub labels: Vec<String>,
    #[serde(default)]
    pub scores: Vec<f64>,
}
