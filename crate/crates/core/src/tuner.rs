//! Choosing the output size `k` on a validation split.
//!
//! Tuning only reads the index: embeddings stay frozen and the best `k` is the
//! grid point with the highest F1, smallest `k` on ties.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotator::{predict, AnnotatorConfig, Target};
use crate::error::{Error, Result};
use crate::metrics::{confusion_counts, macro_f1, micro_f1, MacroUniverse};
use crate::model::{DocumentRecord, PredictionSet, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    MicroF1,
    MacroF1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningSpec {
    pub k_grid: Vec<usize>,
    pub objective: Objective,
    pub macro_universe: MacroUniverse,
    /// Strategy and non-`k` settings; `base.k` is ignored.
    pub base: AnnotatorConfig,
}

impl TuningSpec {
    /// Grid `1..=20`, micro-F1, with the given annotator settings.
    pub fn new(base: AnnotatorConfig) -> Self {
        TuningSpec {
            k_grid: (1..=20).collect(),
            objective: Objective::MicroF1,
            macro_universe: MacroUniverse::default(),
            base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_grid.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if self.k_grid[0] == 0 {
            return Err(Error::InvalidGrid("k must be at least 1".into()));
        }
        if self.k_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Parses `"1..20"` (inclusive), `"5"` or `"5,10,20"`.
pub fn parse_k_grid(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidGrid(format!("cannot parse {s:?}"));
    let grid: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (lo..=hi).collect()
    } else {
        s.split(',')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub best_k: usize,
    pub objective: Objective,
    pub per_k: Vec<KScore>,
}

impl TuningReport {
    pub fn best(&self) -> &KScore {
        self.per_k
            .iter()
            .find(|s| s.k == self.best_k)
            .expect("best_k is a grid point")
    }

    pub fn objective_value(&self, s: &KScore) -> f64 {
        match self.objective {
            Objective::MicroF1 => s.micro_f1,
            Objective::MacroF1 => s.macro_f1,
        }
    }
}

/// Sweeps the whole grid and reports every `(k, F1)` pair.
pub fn tune_k(
    val_docs: &[DocumentRecord],
    target: Target<'_>,
    taxonomy: &Taxonomy,
    spec: &TuningSpec,
) -> Result<TuningReport> {
    spec.validate()?;
    if val_docs.is_empty() {
        return Err(Error::EmptyValidationSet);
    }
    for doc in val_docs {
        doc.require_gold()?;
        doc.check_gold(taxonomy)?;
        doc.require_embedding()?;
    }

    // Output at k is the length-k prefix of the output at the largest k, for
    // both strategies and both output-size rules.
    let k_max = *spec.k_grid.last().expect("validated non-empty");
    let config = AnnotatorConfig { k: k_max, ..spec.base };
    let full: Vec<PredictionSet> = val_docs
        .par_iter()
        .map(|d| predict(&d.id, d.require_embedding()?, target, &config))
        .collect::<Result<_>>()?;

    let per_k: Vec<KScore> = spec
        .k_grid
        .par_iter()
        .map(|&k| {
            let preds: Vec<PredictionSet> = full.iter().map(|p| p.truncated(k)).collect();
            let c = confusion_counts(&preds, val_docs, taxonomy)?;
            Ok(KScore {
                k,
                micro_f1: micro_f1(&c),
                macro_f1: macro_f1(&c, spec.macro_universe),
            })
        })
        .collect::<Result<_>>()?;

    let mut report = TuningReport {
        best_k: per_k[0].k,
        objective: spec.objective,
        per_k,
    };
    let mut best = report.objective_value(&report.per_k[0]);
    for s in &report.per_k[1..] {
        let v = report.objective_value(s);
        if v > best {
            best = v;
            report.best_k = s.k;
        }
    }
    Ok(report)
}
