//! Multi-label precision, recall and F1, pooled (micro) and per label (macro).
//!
//! Any ratio with a zero denominator is 0.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DocumentRecord, LabelId, PredictionSet, Taxonomy};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn support(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-label tp/fp/fn, with one entry for every taxonomy label.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelConfusion {
    pub per_label: BTreeMap<LabelId, Counts>,
}

impl LabelConfusion {
    pub fn for_taxonomy(taxonomy: &Taxonomy) -> Self {
        LabelConfusion {
            per_label: taxonomy.ids().map(|id| (id.clone(), Counts::default())).collect(),
        }
    }

    /// Adds one document's predicted and gold sets.
    pub fn record(&mut self, predicted: &BTreeSet<&LabelId>, gold: &BTreeSet<LabelId>) {
        for label in predicted {
            let c = self.per_label.entry((*label).clone()).or_default();
            if gold.contains(*label) {
                c.tp += 1;
            } else {
                c.fp += 1;
            }
        }
        for label in gold {
            if !predicted.contains(label) {
                self.per_label.entry(label.clone()).or_default().fn_ += 1;
            }
        }
    }

    /// Adds counts from another confusion; the merge is commutative.
    pub fn merge(&mut self, other: &LabelConfusion) {
        for (label, c) in &other.per_label {
            let mine = self.per_label.entry(label.clone()).or_default();
            mine.tp += c.tp;
            mine.fp += c.fp;
            mine.fn_ += c.fn_;
        }
    }

    pub fn pooled(&self) -> Counts {
        self.per_label.values().fold(Counts::default(), |acc, c| Counts {
            tp: acc.tp + c.tp,
            fp: acc.fp + c.fp,
            fn_: acc.fn_ + c.fn_,
        })
    }
}

/// Which labels the macro average runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacroUniverse {
    /// Labels with at least one gold occurrence in the evaluated split.
    #[default]
    GoldSupported,
    /// Every taxonomy label.
    FullTaxonomy,
}

/// Tallies per-label counts, matching predictions to gold documents by id.
///
/// Every prediction needs a gold document with labels, every gold document
/// needs a prediction, and every label must be in `taxonomy`.
pub fn confusion_counts(
    preds: &[PredictionSet],
    gold: &[DocumentRecord],
    taxonomy: &Taxonomy,
) -> Result<LabelConfusion> {
    let mut gold_by_id: HashMap<&str, &BTreeSet<LabelId>> = HashMap::with_capacity(gold.len());
    for doc in gold {
        let labels = doc.require_gold()?;
        doc.check_gold(taxonomy)?;
        if gold_by_id.insert(doc.id.as_str(), labels).is_some() {
            return Err(Error::DuplicateDocId(doc.id.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    let mut confusion = LabelConfusion::for_taxonomy(taxonomy);
    for p in preds {
        let g = gold_by_id
            .get(p.doc_id.as_str())
            .ok_or_else(|| Error::UnknownDoc(p.doc_id.clone()))?;
        if !seen.insert(p.doc_id.as_str()) {
            return Err(Error::DuplicateDocId(p.doc_id.clone()));
        }
        let predicted: BTreeSet<&LabelId> = p.labels().collect();
        if let Some(bad) = predicted.iter().find(|l| !taxonomy.contains(l.as_str())) {
            return Err(Error::LabelOutsideTaxonomy {
                doc: p.doc_id.clone(),
                label: bad.to_string(),
            });
        }
        confusion.record(&predicted, g);
    }
    if let Some(missing) = gold.iter().find(|d| !seen.contains(d.id.as_str())) {
        return Err(Error::MissingPrediction(missing.id.clone()));
    }
    Ok(confusion)
}

pub fn micro_f1(c: &LabelConfusion) -> f64 {
    c.pooled().f1()
}

pub fn macro_f1(c: &LabelConfusion, universe: MacroUniverse) -> f64 {
    macro_average(c, universe, Counts::f1)
}

fn macro_average(c: &LabelConfusion, universe: MacroUniverse, metric: fn(&Counts) -> f64) -> f64 {
    let included: Vec<&Counts> = c
        .per_label
        .values()
        .filter(|c| universe == MacroUniverse::FullTaxonomy || c.support() > 0)
        .collect();
    if included.is_empty() {
        return 0.0;
    }
    included.iter().map(|c| metric(c)).sum::<f64>() / included.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: LabelId,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_docs: usize,
    pub macro_universe: MacroUniverse,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_label: Vec<LabelScore>,
}

impl EvalReport {
    pub fn from_confusion(c: &LabelConfusion, n_docs: usize, universe: MacroUniverse) -> Self {
        let pooled = c.pooled();
        EvalReport {
            n_docs,
            macro_universe: universe,
            micro_precision: pooled.precision(),
            micro_recall: pooled.recall(),
            micro_f1: pooled.f1(),
            macro_precision: macro_average(c, universe, Counts::precision),
            macro_recall: macro_average(c, universe, Counts::recall),
            macro_f1: macro_f1(c, universe),
            per_label: c
                .per_label
                .iter()
                .map(|(label, c)| LabelScore {
                    label: label.clone(),
                    precision: c.precision(),
                    recall: c.recall(),
                    f1: c.f1(),
                    support: c.support(),
                })
                .collect(),
        }
    }
}

pub fn evaluate(
    preds: &[PredictionSet],
    gold: &[DocumentRecord],
    taxonomy: &Taxonomy,
    universe: MacroUniverse,
) -> Result<EvalReport> {
    let c = confusion_counts(preds, gold, taxonomy)?;
    Ok(EvalReport::from_confusion(&c, preds.len(), universe))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LabelEntry, ScoredLabel};
    use approx::assert_abs_diff_eq;

    fn tax(ids: &[&str]) -> Taxonomy {
        Taxonomy::new(ids.iter().map(|i| LabelEntry::new(i, i, "x").unwrap()).collect()).unwrap()
    }

    fn pred(doc: &str, labels: &[&str]) -> PredictionSet {
        PredictionSet::from_items(
            doc,
            labels
                .iter()
                .map(|l| ScoredLabel {
                    label: LabelId::new(*l).unwrap(),
                    score: 0.5,
                })
                .collect(),
        )
        .unwrap()
    }

    fn gold(doc: &str, labels: &[&str]) -> DocumentRecord {
        DocumentRecord::new(doc, "").with_gold(labels.iter().copied()).unwrap()
    }

    fn counts(c: &LabelConfusion, l: &str) -> Counts {
        c.per_label[l]
    }

    #[test]
    fn one_document_counts() {
        let t = tax(&["A", "B", "C"]);
        let c = confusion_counts(&[pred("d", &["A", "B"])], &[gold("d", &["A", "C"])], &t).unwrap();
        assert_eq!(counts(&c, "A"), Counts { tp: 1, fp: 0, fn_: 0 });
        assert_eq!(counts(&c, "B"), Counts { tp: 0, fp: 1, fn_: 0 });
        assert_eq!(counts(&c, "C"), Counts { tp: 0, fp: 0, fn_: 1 });
        // pooled tp=1, fp=1, fn=1
        assert_eq!(micro_f1(&c), 0.5);
    }

    #[test]
    fn perfect_and_empty_predictions() {
        let t = tax(&["A", "B"]);
        let c = confusion_counts(
            &[pred("1", &["A"]), pred("2", &["A", "B"])],
            &[gold("1", &["A"]), gold("2", &["A", "B"])],
            &t,
        )
        .unwrap();
        assert!(c.per_label.values().all(|c| c.fp == 0 && c.fn_ == 0));
        assert_eq!(micro_f1(&c), 1.0);

        let c = confusion_counts(&[pred("1", &[])], &[gold("1", &["A"])], &t).unwrap();
        assert_eq!(c.pooled(), Counts { tp: 0, fp: 0, fn_: 1 });
    }

    #[test]
    fn degenerate_micro() {
        assert_eq!(micro_f1(&LabelConfusion::default()), 0.0);
        let mut c = LabelConfusion::default();
        c.per_label
            .insert(LabelId::new("A").unwrap(), Counts { tp: 4, fp: 0, fn_: 0 });
        assert_eq!(micro_f1(&c), 1.0);
        assert_eq!(macro_f1(&c, MacroUniverse::GoldSupported), 1.0);
    }

    #[test]
    fn macro_examples() {
        let mut c = LabelConfusion::default();
        let put = |c: &mut LabelConfusion, l: &str, tp, fp, fn_| {
            c.per_label.insert(LabelId::new(l).unwrap(), Counts { tp, fp, fn_ });
        };
        put(&mut c, "A", 1, 0, 0);
        put(&mut c, "B", 0, 1, 1);
        assert_eq!(macro_f1(&c, MacroUniverse::GoldSupported), 0.5);

        // F1 1.0, 0.5, 0.5
        let mut c = LabelConfusion::default();
        put(&mut c, "A", 2, 0, 0);
        put(&mut c, "B", 1, 1, 1);
        put(&mut c, "C", 1, 0, 2);
        assert_abs_diff_eq!(counts(&c, "C").f1(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(macro_f1(&c, MacroUniverse::GoldSupported), 2.0 / 3.0, epsilon = 1e-15);

        // A label with no gold support only counts under the full-taxonomy universe.
        put(&mut c, "D", 0, 3, 0);
        assert_abs_diff_eq!(macro_f1(&c, MacroUniverse::GoldSupported), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(macro_f1(&c, MacroUniverse::FullTaxonomy), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn single_label_macro_equals_micro() {
        let t = tax(&["A"]);
        let c = confusion_counts(
            &[pred("1", &["A"]), pred("2", &["A"]), pred("3", &[])],
            &[gold("1", &["A"]), gold("2", &[]), gold("3", &["A"])],
            &t,
        )
        .unwrap();
        assert_eq!(micro_f1(&c), macro_f1(&c, MacroUniverse::GoldSupported));
    }

    #[test]
    fn disjoint_scores_zero() {
        let t = tax(&["A", "B"]);
        let r = evaluate(&[pred("1", &["B"])], &[gold("1", &["A"])], &t, MacroUniverse::default()).unwrap();
        assert_eq!(
            (r.micro_f1, r.macro_f1, r.micro_precision, r.micro_recall),
            (0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn alignment_errors() {
        let t = tax(&["A"]);
        assert!(matches!(
            confusion_counts(&[pred("x", &["A"])], &[gold("1", &["A"])], &t),
            Err(Error::UnknownDoc(d)) if d == "x"
        ));
        assert!(matches!(
            confusion_counts(&[pred("1", &["A"])], &[DocumentRecord::new("1", "")], &t),
            Err(Error::MissingGold(_))
        ));
        assert!(matches!(
            confusion_counts(&[pred("1", &["Z"])], &[gold("1", &["A"])], &t),
            Err(Error::LabelOutsideTaxonomy { .. })
        ));
        assert!(matches!(
            confusion_counts(&[], &[gold("1", &["A"])], &t),
            Err(Error::MissingPrediction(_))
        ));
    }

    #[test]
    fn merge_is_commutative() {
        let t = tax(&["A", "B"]);
        let a = confusion_counts(&[pred("1", &["A"])], &[gold("1", &["B"])], &t).unwrap();
        let b = confusion_counts(&[pred("2", &["B"])], &[gold("2", &["B"])], &t).unwrap();
        let mut ab = a.clone();
        ab.merge(&b);
        let mut ba = b.clone();
        ba.merge(&a);
        assert_eq!(ab, ba);
    }
}
