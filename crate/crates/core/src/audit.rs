//! Auditing predicted label sets against a closed taxonomy.
//!
//! A sample *hallucinates* when at least one of its predicted labels is not a
//! taxonomy label. Labels are compared after NFC normalization and trimming
//! surrounding whitespace, and otherwise exactly: no case folding or fuzzy
//! matching, since that would quietly repair the very errors being counted.
//! Close string matches are reported separately as an advisory.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::dataset::{jsonl_lines, open};
use crate::error::{Error, Result};
use crate::model::{PredictionRecord, PredictionSet, Taxonomy};

/// Minimum normalized Levenshtein similarity for a near-miss advisory.
pub const NEAR_MISS_THRESHOLD: f64 = 0.8;

pub fn normalize_label(s: &str) -> String {
    s.trim().nfc().collect()
}

/// Normalized view of a taxonomy for membership checks.
#[derive(Debug, Clone)]
pub struct TaxonomyMatcher {
    /// normalized key → canonical id
    keys: HashMap<String, String>,
    accept_names: bool,
}

impl TaxonomyMatcher {
    pub fn new(taxonomy: &Taxonomy) -> Self {
        Self::build(taxonomy, false)
    }

    /// Also accepts a label's display name in place of its id.
    pub fn accepting_names(taxonomy: &Taxonomy) -> Self {
        Self::build(taxonomy, true)
    }

    fn build(taxonomy: &Taxonomy, accept_names: bool) -> Self {
        let mut keys = HashMap::new();
        for e in taxonomy.entries() {
            keys.insert(normalize_label(e.id.as_str()), e.id.to_string());
        }
        if accept_names {
            for e in taxonomy.entries() {
                keys.entry(normalize_label(&e.name)).or_insert_with(|| e.id.to_string());
            }
        }
        TaxonomyMatcher { keys, accept_names }
    }

    pub fn is_valid(&self, label: &str) -> bool {
        self.keys.contains_key(&normalize_label(label))
    }

    /// The closest valid label by normalized Levenshtein similarity.
    pub fn nearest(&self, label: &str) -> Option<(String, f64)> {
        let probe = normalize_label(label);
        self.keys
            .iter()
            .map(|(key, id)| (id, strsim::normalized_levenshtein(&probe, key)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(id, s)| (id.clone(), s))
    }

    pub fn accepts_names(&self) -> bool {
        self.accept_names
    }
}

/// The labels in `labels` that are not in the taxonomy, in first-seen order
/// and without repeats. `Ok(())` when there are none.
pub fn validate_labels<'a, I>(labels: I, matcher: &TaxonomyMatcher) -> std::result::Result<(), Vec<String>>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut seen = HashSet::new();
    let invalid: Vec<String> = labels
        .into_iter()
        .filter(|l| !matcher.is_valid(l))
        .filter(|l| seen.insert(*l))
        .map(str::to_owned)
        .collect();
    if invalid.is_empty() {
        Ok(())
    } else {
        Err(invalid)
    }
}

/// Gate for anything leaving the system: the exact invalid subset, if any.
pub fn validate_or_reject(pred: &PredictionSet, taxonomy: &Taxonomy) -> std::result::Result<(), Vec<String>> {
    validate_labels(pred.labels().map(|l| l.as_str()), &TaxonomyMatcher::new(taxonomy))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offense {
    pub doc_id: String,
    pub label: String,
    /// Closest valid label by string similarity. Advisory only.
    pub nearest_valid: Option<String>,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelFrequency {
    pub label: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub n_samples: u64,
    pub n_hallucinating_samples: u64,
    /// Hallucinating samples over all samples.
    pub rate: f64,
    pub offending: Vec<Offense>,
    /// Invalid labels by frequency, ties alphabetical.
    pub top_hallucinated: Vec<LabelFrequency>,
    /// Invalid label occurrences over all predicted label occurrences. A
    /// per-label view, not the per-sample rate above.
    pub per_label_rate: f64,
    pub n_predicted_labels: u64,
    /// Offending labels whose nearest valid label clears
    /// [`NEAR_MISS_THRESHOLD`]. Counts are unaffected.
    pub near_misses: Vec<Offense>,
}

impl AuditReport {
    pub fn rate_percent(&self) -> f64 {
        self.rate * 100.0
    }

    /// Rate formatted the way it is usually quoted: `0.9%`, `0.12%`, `0%`.
    pub fn rate_display(&self) -> String {
        let s = format!("{:.4}", self.rate_percent());
        let s = s.trim_end_matches('0').trim_end_matches('.');
        format!("{s}%")
    }
}

/// Streaming audit over prediction records.
#[derive(Debug)]
pub struct Auditor<'a> {
    matcher: &'a TaxonomyMatcher,
    n_samples: u64,
    n_hallucinating: u64,
    n_labels: u64,
    n_invalid_labels: u64,
    offending: Vec<Offense>,
    freq: BTreeMap<String, u64>,
}

impl<'a> Auditor<'a> {
    pub fn new(matcher: &'a TaxonomyMatcher) -> Self {
        Auditor {
            matcher,
            n_samples: 0,
            n_hallucinating: 0,
            n_labels: 0,
            n_invalid_labels: 0,
            offending: Vec::new(),
            freq: BTreeMap::new(),
        }
    }

    pub fn observe(&mut self, doc_id: &str, labels: &[String]) {
        self.n_samples += 1;
        self.n_labels += labels.len() as u64;
        let mut any = false;
        for label in labels {
            if self.matcher.is_valid(label) {
                continue;
            }
            any = true;
            self.n_invalid_labels += 1;
            let shown = label.trim().to_owned();
            *self.freq.entry(shown.clone()).or_insert(0) += 1;
            let (nearest_valid, similarity) = match self.matcher.nearest(label) {
                Some((id, s)) => (Some(id), s),
                None => (None, 0.0),
            };
            self.offending.push(Offense {
                doc_id: doc_id.to_owned(),
                label: shown,
                nearest_valid,
                similarity,
            });
        }
        if any {
            self.n_hallucinating += 1;
        }
    }

    pub fn finish(self) -> Result<AuditReport> {
        if self.n_samples == 0 {
            return Err(Error::EmptyPredictions);
        }
        let mut top: Vec<LabelFrequency> = self
            .freq
            .into_iter()
            .map(|(label, count)| LabelFrequency { label, count })
            .collect();
        top.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.label.cmp(&b.label)));
        let near_misses = self
            .offending
            .iter()
            .filter(|o| o.similarity >= NEAR_MISS_THRESHOLD)
            .cloned()
            .collect();
        Ok(AuditReport {
            n_samples: self.n_samples,
            n_hallucinating_samples: self.n_hallucinating,
            rate: self.n_hallucinating as f64 / self.n_samples as f64,
            offending: self.offending,
            top_hallucinated: top,
            per_label_rate: if self.n_labels == 0 {
                0.0
            } else {
                self.n_invalid_labels as f64 / self.n_labels as f64
            },
            n_predicted_labels: self.n_labels,
            near_misses,
        })
    }
}

#[derive(Debug, Deserialize)]
struct AuditLine {
    doc_id: String,
    labels: Vec<String>,
}

/// Audits a `predictions.jsonl` file. The file is only read.
pub fn audit_predictions(path: impl AsRef<Path>, matcher: &TaxonomyMatcher) -> Result<AuditReport> {
    audit_reader(open(path.as_ref())?, matcher)
}

pub fn audit_reader<R: std::io::BufRead>(reader: R, matcher: &TaxonomyMatcher) -> Result<AuditReport> {
    let mut auditor = Auditor::new(matcher);
    for item in jsonl_lines(reader) {
        let (n, text) = item?;
        let line: AuditLine = serde_json::from_str(&text).map_err(|e| Error::MalformedLine {
            line: n,
            message: e.to_string(),
        })?;
        auditor.observe(&line.doc_id, &line.labels);
    }
    auditor.finish()
}

/// Audits in-memory engine output.
pub fn audit_records(records: &[PredictionRecord], matcher: &TaxonomyMatcher) -> Result<AuditReport> {
    let mut auditor = Auditor::new(matcher);
    for r in records {
        auditor.observe(&r.doc_id, &r.labels);
    }
    auditor.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LabelEntry, LabelId, ScoredLabel};
    use std::io::Cursor;

    fn eurlex_like() -> Taxonomy {
        Taxonomy::new(
            ["EU law", "external trade", "economic analysis", "agricultural policy"]
                .iter()
                .map(|l| LabelEntry::new(l, l, "d").unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn set(labels: &[&str]) -> PredictionSet {
        PredictionSet::from_items(
            "d",
            labels
                .iter()
                .enumerate()
                .map(|(i, l)| ScoredLabel {
                    label: LabelId::new(*l).unwrap(),
                    score: 1.0 - i as f64 / 10.0,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_out_of_vocabulary_topic() {
        let t = eurlex_like();
        assert_eq!(
            validate_or_reject(&set(&["EU law", "external trade", "statistics"]), &t),
            Err(vec!["statistics".to_string()])
        );
        assert_eq!(validate_or_reject(&set(&[]), &t), Ok(()));
        assert_eq!(validate_or_reject(&set(&["EU law", "economic analysis"]), &t), Ok(()));
    }

    #[test]
    fn matching_normalizes_but_does_not_fold() {
        let t = Taxonomy::new(vec![LabelEntry::new("caf\u{e9}", "Cafe", "d").unwrap()]).unwrap();
        let m = TaxonomyMatcher::new(&t);
        assert!(m.is_valid("  cafe\u{301} "));
        assert!(!m.is_valid("Caf\u{e9}"));
        assert!(!m.is_valid("Cafe"));
        assert!(TaxonomyMatcher::accepting_names(&t).is_valid("Cafe"));
    }

    #[test]
    fn per_sample_rate_and_ranking() {
        let t = eurlex_like();
        let m = TaxonomyMatcher::new(&t);
        let input = r#"{"doc_id":"1","labels":["EU law","statistics","insurance"]}
{"doc_id":"2","labels":["EU law"]}
{"doc_id":"3","labels":["statistics"]}

{"doc_id":"4","labels":[]}
"#;
        let r = audit_reader(Cursor::new(input), &m).unwrap();
        assert_eq!((r.n_samples, r.n_hallucinating_samples), (4, 2));
        assert_eq!(r.rate, 0.5);
        assert_eq!(r.rate_display(), "50%");
        assert_eq!(r.offending.len(), 3);
        assert_eq!(
            r.top_hallucinated,
            vec![
                LabelFrequency {
                    label: "statistics".into(),
                    count: 2
                },
                LabelFrequency {
                    label: "insurance".into(),
                    count: 1
                },
            ]
        );
        assert_eq!(r.n_predicted_labels, 5);
        assert_eq!(r.per_label_rate, 3.0 / 5.0);
    }

    #[test]
    fn near_misses_are_advisory() {
        let t = eurlex_like();
        let m = TaxonomyMatcher::new(&t);
        let input = r#"{"doc_id":"1","labels":["external trades"]}
{"doc_id":"2","labels":["statistics"]}
"#;
        let r = audit_reader(Cursor::new(input), &m).unwrap();
        assert_eq!(r.n_hallucinating_samples, 2);
        assert_eq!(r.near_misses.len(), 1);
        assert_eq!(r.near_misses[0].nearest_valid.as_deref(), Some("external trade"));
    }

    #[test]
    fn errors() {
        let m = TaxonomyMatcher::new(&eurlex_like());
        assert!(matches!(
            audit_reader(Cursor::new("\n\n"), &m),
            Err(Error::EmptyPredictions)
        ));
        assert!(matches!(
            audit_reader(Cursor::new("{\"doc_id\":\"1\",\"labels\":[1]}\n"), &m),
            Err(Error::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn rate_display_trims() {
        let mut r = AuditReport {
            n_samples: 1000,
            n_hallucinating_samples: 9,
            rate: 9.0 / 1000.0,
            offending: vec![],
            top_hallucinated: vec![],
            per_label_rate: 0.0,
            n_predicted_labels: 0,
            near_misses: vec![],
        };
        assert_eq!(r.rate_display(), "0.9%");
        r.rate = 6.0 / 5000.0;
        assert_eq!(r.rate_display(), "0.12%");
        r.rate = 0.0;
        assert_eq!(r.rate_display(), "0%");
    }
}
