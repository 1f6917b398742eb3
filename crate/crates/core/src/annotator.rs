//! Turning a document embedding into a ranked label set.
//!
//! Two strategies share one output type:
//!
//! * **Label similarity** ranks taxonomy labels by cosine similarity between
//!   the document and each label description, and keeps the top `k`.
//! * **Neighbor vote** finds the `vote_neighbors` most similar training
//!   documents and lets each one vote for its gold labels with weight equal to
//!   its cosine similarity.
//!
//! Either way, labels can only come out of an index whose rows were built
//! from the taxonomy, so nothing outside it is ever predicted.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{CounterSnapshot, FlatIndex, SemanticIndex};
use crate::model::{rank_order, DocumentRecord, LabelId, PredictionSet, ScoredLabel, Taxonomy};
use crate::vector::Embedding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    LabelSimilarity,
    NeighborVote,
}

/// How many ranked labels to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputSize {
    /// Exactly the top `k` (fewer only when fewer candidates exist).
    FixedK,
    /// Top `k`, further dropping labels scoring below the threshold.
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorConfig {
    pub strategy: Strategy,
    pub k: usize,
    pub vote_neighbors: usize,
    pub output_size: OutputSize,
}

impl Default for AnnotatorConfig {
    fn default() -> Self {
        AnnotatorConfig {
            strategy: Strategy::LabelSimilarity,
            k: 5,
            vote_neighbors: 10,
            output_size: OutputSize::FixedK,
        }
    }
}

impl AnnotatorConfig {
    pub fn label_similarity(k: usize) -> Self {
        AnnotatorConfig {
            k,
            ..Default::default()
        }
    }

    pub fn neighbor_vote(k: usize, vote_neighbors: usize) -> Self {
        AnnotatorConfig {
            strategy: Strategy::NeighborVote,
            k,
            vote_neighbors,
            output_size: OutputSize::FixedK,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidK(0));
        }
        if self.strategy == Strategy::NeighborVote && self.vote_neighbors == 0 {
            return Err(Error::InvalidConfig("vote_neighbors must be at least 1".into()));
        }
        if let OutputSize::Threshold(t) = self.output_size {
            if !t.is_finite() {
                return Err(Error::InvalidConfig("threshold must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Training documents indexed by embedding, with their gold label sets.
#[derive(Debug, Clone)]
pub struct TrainingCorpusIndex {
    rows: FlatIndex<String>,
    gold: HashMap<String, BTreeSet<LabelId>>,
}

impl TrainingCorpusIndex {
    /// Every document needs an embedding and gold labels drawn from
    /// `taxonomy`.
    pub fn build(docs: &[DocumentRecord], taxonomy: &Taxonomy) -> Result<Self> {
        let first = docs.first().ok_or(Error::EmptyCorpus)?;
        let mut rows = FlatIndex::new(first.require_embedding()?.dim())?;
        let mut gold = HashMap::with_capacity(docs.len());
        for doc in docs {
            let labels = doc.require_gold()?;
            doc.check_gold(taxonomy)?;
            if gold.contains_key(&doc.id) {
                return Err(Error::DuplicateDocId(doc.id.clone()));
            }
            rows.insert(doc.id.clone(), doc.require_embedding()?)?;
            gold.insert(doc.id.clone(), labels.clone());
        }
        Ok(TrainingCorpusIndex { rows, gold })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.dim()
    }

    pub fn counters(&self) -> CounterSnapshot {
        self.rows.counters()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&String, &[f32])> {
        self.rows.rows()
    }

    pub fn gold(&self, doc_id: &str) -> Option<&BTreeSet<LabelId>> {
        self.gold.get(doc_id)
    }

    /// Drops gold labels no longer in `taxonomy`, keeping the corpus in step
    /// with an evolving label set.
    pub fn retain_labels(&mut self, taxonomy: &Taxonomy) {
        for labels in self.gold.values_mut() {
            labels.retain(|l| taxonomy.contains(l.as_str()));
        }
    }
}

/// Top-`k` labels by cosine similarity to the document.
pub fn predict_label_similarity(
    doc_id: &str,
    doc_vec: &Embedding,
    index: &SemanticIndex,
    k: usize,
) -> Result<PredictionSet> {
    let items = index.search_top_k(doc_vec, k)?;
    Ok(PredictionSet::from_ranked(doc_id.to_owned(), items))
}

/// Similarity-weighted vote of the nearest training documents.
///
/// Each of the `vote_neighbors` nearest documents adds its cosine similarity
/// to every one of its gold labels. Reported scores are those sums divided by
/// the number of neighbors consulted, which keeps them in `[-1, 1]` without
/// changing the ranking.
pub fn predict_neighbor_vote(
    doc_id: &str,
    doc_vec: &Embedding,
    corpus: &TrainingCorpusIndex,
    config: &AnnotatorConfig,
) -> Result<PredictionSet> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let neighbors = corpus.rows.search(doc_vec, config.vote_neighbors)?;
    let mut weights: BTreeMap<&LabelId, f64> = BTreeMap::new();
    for n in &neighbors {
        for label in &corpus.gold[&n.id] {
            *weights.entry(label).or_insert(0.0) += n.score;
        }
    }
    let consulted = neighbors.len() as f64;
    let mut items: Vec<ScoredLabel> = weights
        .into_iter()
        .map(|(label, w)| ScoredLabel {
            label: label.clone(),
            score: crate::vector::clamp_unit(w / consulted),
        })
        .collect();
    items.sort_by(rank_order);
    Ok(PredictionSet::from_ranked(
        doc_id.to_owned(),
        apply_output_size(items, config),
    ))
}

fn apply_output_size(mut items: Vec<ScoredLabel>, config: &AnnotatorConfig) -> Vec<ScoredLabel> {
    items.truncate(config.k);
    if let OutputSize::Threshold(t) = config.output_size {
        items.retain(|i| i.score >= t);
    }
    items
}

/// What a prediction searches: the label index or a training corpus.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Labels(&'a SemanticIndex),
    Corpus(&'a TrainingCorpusIndex),
}

impl Target<'_> {
    pub fn strategy(&self) -> Strategy {
        match self {
            Target::Labels(_) => Strategy::LabelSimilarity,
            Target::Corpus(_) => Strategy::NeighborVote,
        }
    }
}

/// Dispatches on `config.strategy`, which must agree with `target`.
pub fn predict(
    doc_id: &str,
    doc_vec: &Embedding,
    target: Target<'_>,
    config: &AnnotatorConfig,
) -> Result<PredictionSet> {
    config.validate()?;
    match (config.strategy, target) {
        (Strategy::LabelSimilarity, Target::Labels(index)) => {
            let p = predict_label_similarity(doc_id, doc_vec, index, config.k)?;
            Ok(match config.output_size {
                OutputSize::FixedK => p,
                OutputSize::Threshold(_) => {
                    PredictionSet::from_ranked(p.doc_id.clone(), apply_output_size(p.items().to_vec(), config))
                }
            })
        }
        (Strategy::NeighborVote, Target::Corpus(corpus)) => predict_neighbor_vote(doc_id, doc_vec, corpus, config),
        (s, t) => Err(Error::InvalidConfig(format!(
            "strategy {s:?} cannot run against a {:?} target",
            t.strategy()
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    /// Abort on the first failing document (in input order).
    #[default]
    Strict,
    /// Skip failing documents and record why.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemFailure {
    pub doc_id: String,
    pub kind: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct BatchOutput {
    pub predictions: Vec<PredictionSet>,
    pub failures: Vec<ItemFailure>,
}

/// Predicts every document, in parallel, returning results in input order.
pub fn predict_batch(
    docs: &[(String, Embedding)],
    target: Target<'_>,
    config: &AnnotatorConfig,
    mode: BatchMode,
) -> Result<BatchOutput> {
    config.validate()?;
    let results: Vec<Result<PredictionSet>> = docs.par_iter().map(|(id, v)| predict(id, v, target, config)).collect();
    let mut out = BatchOutput::default();
    for ((doc_id, _), r) in docs.iter().zip(results) {
        match r {
            Ok(p) => out.predictions.push(p),
            Err(e) if mode == BatchMode::Lenient => out.failures.push(ItemFailure {
                doc_id: doc_id.clone(),
                kind: e.kind(),
                message: e.to_string(),
            }),
            Err(e) => {
                return Err(Error::BatchItem {
                    doc_id: doc_id.clone(),
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(out)
}
