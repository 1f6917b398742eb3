//! Training-set-size sweeps.
//!
//! The corpus is split once. For each size `n` the training part is
//! subsampled (nested across sizes), `k` is tuned on the validation part and
//! the tuned annotator is scored on the test part. Label-similarity ignores
//! the training documents, so its row is the same at every size.

use serde::{Deserialize, Serialize};

use crate::annotator::{predict, AnnotatorConfig, Strategy, Target, TrainingCorpusIndex};
use crate::dataset::{split_corpus, subsample_train, Split, SplitSpec};
use crate::error::Result;
use crate::index::SemanticIndex;
use crate::metrics::evaluate;
use crate::model::{DocumentRecord, PredictionSet, Taxonomy};
use crate::tuner::{tune_k, TuningSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    /// Training sizes; each must not exceed the training split.
    pub sizes: Vec<usize>,
    pub split: SplitSpec,
    pub tuning: TuningSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub best_k: usize,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub strategy: Strategy,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub rows: Vec<ScalingRow>,
}

pub fn run_scaling(docs: &[DocumentRecord], taxonomy: &Taxonomy, spec: &ScalingSpec) -> Result<ScalingReport> {
    spec.tuning.validate()?;
    let Split { train, val, test } = split_corpus(docs, &spec.split)?;
    let strategy = spec.tuning.base.strategy;
    let label_index = match strategy {
        Strategy::LabelSimilarity => Some(SemanticIndex::build(taxonomy)?),
        Strategy::NeighborVote => None,
    };
    let mut rows = Vec::with_capacity(spec.sizes.len());
    for &n in &spec.sizes {
        let sample = subsample_train(&train, spec.split.seed, n)?;
        let corpus;
        let target = match &label_index {
            Some(index) => Target::Labels(index),
            None => {
                corpus = TrainingCorpusIndex::build(&sample, taxonomy)?;
                Target::Corpus(&corpus)
            }
        };
        let tuned = tune_k(&val, target, taxonomy, &spec.tuning)?;
        let config = AnnotatorConfig {
            k: tuned.best_k,
            ..spec.tuning.base
        };
        let preds: Vec<PredictionSet> = test
            .iter()
            .map(|d| predict(&d.id, d.require_embedding()?, target, &config))
            .collect::<Result<_>>()?;
        let report = evaluate(&preds, &test, taxonomy, spec.tuning.macro_universe)?;
        tracing::info!(n, best_k = tuned.best_k, micro_f1 = report.micro_f1, "scaling point");
        rows.push(ScalingRow {
            n,
            best_k: tuned.best_k,
            micro_f1: report.micro_f1,
            macro_f1: report.macro_f1,
        });
    }
    Ok(ScalingReport {
        strategy,
        n_train: train.len(),
        n_val: val.len(),
        n_test: test.len(),
        rows,
    })
}
