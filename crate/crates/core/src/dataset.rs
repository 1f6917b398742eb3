//! JSONL ingestion of taxonomies and documents, corpus statistics, splits and
//! nested training subsamples.
//!
//! Taxonomy lines: `{"id": "...", "name": "...", "description": "..."}`.
//! Document lines: `{"id": "...", "text": "...", "labels": ["..."]}` with
//! `labels` optional.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DocumentRecord, LabelEntry, LabelId, Taxonomy};

#[derive(Debug, Serialize, Deserialize)]
struct TaxonomyLine {
    id: String,
    #[serde(default)]
    name: Option<String>,
    description: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct DocumentLine {
    id: String,
    #[serde(default)]
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

/// Non-blank lines of a JSONL stream with 1-based line numbers.
pub(crate) fn jsonl_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader.lines().enumerate().filter_map(|(i, line)| match line {
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(Ok((i + 1, l))),
        Err(e) => Some(Err(Error::MalformedLine {
            line: i + 1,
            message: e.to_string(),
        })),
    })
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn parse_line<T: serde::de::DeserializeOwned>(line: usize, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::MalformedLine {
        line,
        message: e.to_string(),
    })
}

pub(crate) fn read_taxonomy_entries(path: impl AsRef<Path>) -> Result<Vec<LabelEntry>> {
    parse_taxonomy_entries(open(path.as_ref())?)
}

fn parse_taxonomy_entries<R: BufRead>(reader: R) -> Result<Vec<LabelEntry>> {
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for item in jsonl_lines(reader) {
        let (n, text) = item?;
        let line: TaxonomyLine = parse_line(n, &text)?;
        if line.id.is_empty() {
            return Err(Error::MalformedLine {
                line: n,
                message: "empty label id".into(),
            });
        }
        if !seen.insert(line.id.clone()) {
            return Err(Error::DuplicateLabel(line.id));
        }
        if line.description.trim().is_empty() {
            return Err(Error::EmptyDescription(line.id));
        }
        let name = line.name.unwrap_or_else(|| line.id.clone());
        entries.push(LabelEntry::new(&line.id, &name, &line.description)?);
    }
    Ok(entries)
}

pub fn load_taxonomy(path: impl AsRef<Path>) -> Result<Taxonomy> {
    Taxonomy::new(read_taxonomy_entries(path)?)
}

pub fn parse_taxonomy<R: BufRead>(reader: R) -> Result<Taxonomy> {
    Taxonomy::new(parse_taxonomy_entries(reader)?)
}

pub fn write_taxonomy(path: impl AsRef<Path>, taxonomy: &Taxonomy) -> Result<()> {
    let mut out = Vec::new();
    for e in taxonomy.entries() {
        let line = TaxonomyLine {
            id: e.id.to_string(),
            name: Some(e.name.clone()),
            description: e.description.clone(),
        };
        serde_json::to_writer(&mut out, &line).expect("plain struct");
        out.push(b'\n');
    }
    crate::gateway::vecfile::write_atomic(path.as_ref(), &out)
}

/// What to do with gold labels outside the taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldPolicy {
    #[default]
    Strict,
    /// Drop the offending labels and report them.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedLabel {
    pub doc_id: String,
    pub label: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedDocuments {
    pub docs: Vec<DocumentRecord>,
    pub dropped: Vec<DroppedLabel>,
}

pub fn load_documents(path: impl AsRef<Path>, taxonomy: &Taxonomy, policy: GoldPolicy) -> Result<LoadedDocuments> {
    parse_documents(open(path.as_ref())?, taxonomy, policy)
}

pub fn parse_documents<R: BufRead>(reader: R, taxonomy: &Taxonomy, policy: GoldPolicy) -> Result<LoadedDocuments> {
    let mut out = LoadedDocuments::default();
    let mut seen = HashSet::new();
    for item in jsonl_lines(reader) {
        let (n, text) = item?;
        let line: DocumentLine = parse_line(n, &text)?;
        if line.id.is_empty() {
            return Err(Error::MalformedLine {
                line: n,
                message: "empty document id".into(),
            });
        }
        if !seen.insert(line.id.clone()) {
            return Err(Error::DuplicateDocId(line.id));
        }
        let gold = match line.labels {
            None => None,
            Some(labels) => {
                let mut set = BTreeSet::new();
                for label in labels {
                    if taxonomy.contains(&label) {
                        set.insert(LabelId::new(label)?);
                    } else if policy == GoldPolicy::Lenient {
                        out.dropped.push(DroppedLabel {
                            doc_id: line.id.clone(),
                            label,
                        });
                    } else {
                        return Err(Error::GoldOutsideTaxonomy { doc: line.id, label });
                    }
                }
                Some(set)
            }
        };
        out.docs.push(DocumentRecord {
            id: line.id,
            text: line.text,
            gold_labels: gold,
            embedding: None,
        });
    }
    Ok(out)
}

pub fn write_documents(path: impl AsRef<Path>, docs: &[DocumentRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for d in docs {
        let line = DocumentLine {
            id: d.id.clone(),
            text: d.text.clone(),
            labels: d
                .gold_labels
                .as_ref()
                .map(|g| g.iter().map(|l| l.to_string()).collect()),
        };
        serde_json::to_writer(&mut out, &line).expect("plain struct");
        out.push(b'\n');
    }
    crate::gateway::vecfile::write_atomic(path, &out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_docs: usize,
    pub cardinality: usize,
    pub total_assignments: usize,
    /// Mean number of gold labels per document, unrounded.
    pub avg_labels_per_doc: f64,
    pub support: BTreeMap<LabelId, usize>,
}

impl CorpusStats {
    /// Average labels per document rounded to two decimals.
    pub fn avg_labels_display(&self) -> String {
        format!("{:.2}", self.avg_labels_per_doc)
    }
}

/// Requires gold labels on every document.
pub fn corpus_stats(docs: &[DocumentRecord], taxonomy: &Taxonomy) -> Result<CorpusStats> {
    if docs.is_empty() {
        return Err(Error::NoGoldLabels);
    }
    let mut support: BTreeMap<LabelId, usize> = taxonomy.ids().map(|id| (id.clone(), 0)).collect();
    let mut total = 0usize;
    for d in docs {
        let gold = d.gold_labels.as_ref().ok_or(Error::NoGoldLabels)?;
        d.check_gold(taxonomy)?;
        total += gold.len();
        for l in gold {
            *support.get_mut(l).expect("checked against taxonomy") += 1;
        }
    }
    Ok(CorpusStats {
        n_docs: docs.len(),
        cardinality: taxonomy.len(),
        total_assignments: total,
        avg_labels_per_doc: total as f64 / docs.len() as f64,
        support,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    #[serde(default)]
    pub subsample_sizes: Vec<usize>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            seed: 13,
            train_fraction: 0.8,
            val_fraction: 0.1,
            subsample_sizes: Vec::new(),
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |f: f64| f > 0.0 && f < 1.0;
        if !ok(self.train_fraction) || !ok(self.val_fraction) {
            return Err(Error::InvalidSplit("fractions must lie in (0, 1)".into()));
        }
        if self.train_fraction + self.val_fraction > 1.0 {
            return Err(Error::InvalidSplit("train + val fractions exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Split {
    pub train: Vec<DocumentRecord>,
    pub val: Vec<DocumentRecord>,
    pub test: Vec<DocumentRecord>,
}

/// Seeded shuffle, then train / val / test by fraction (test takes the rest).
/// Each part keeps the corpus's original relative order.
pub fn split_corpus(docs: &[DocumentRecord], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let order = shuffled_positions(docs.len(), spec.seed);
    let n_train = (docs.len() as f64 * spec.train_fraction).floor() as usize;
    let n_val = (docs.len() as f64 * spec.val_fraction).floor() as usize;
    let pick = |range: &[usize]| {
        let mut idx = range.to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| docs[i].clone()).collect::<Vec<_>>()
    };
    Ok(Split {
        train: pick(&order[..n_train]),
        val: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
    })
}

fn shuffled_positions(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// A uniform sample of `size` documents without replacement.
///
/// The sample is a prefix of one seeded shuffle, so for a fixed seed smaller
/// samples are subsets of larger ones. Documents keep their original order.
pub fn subsample_train(docs: &[DocumentRecord], seed: u64, size: usize) -> Result<Vec<DocumentRecord>> {
    if size > docs.len() {
        return Err(Error::SizeTooLarge {
            requested: size,
            available: docs.len(),
        });
    }
    let mut idx = shuffled_positions(docs.len(), seed);
    idx.truncate(size);
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| docs[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn tax() -> Taxonomy {
        parse_taxonomy(Cursor::new(
            "{\"id\":\"A\",\"name\":\"Alpha\",\"description\":\"first\"}\n\
             {\"id\":\"B\",\"description\":\"second\"}\n\n\
             {\"id\":\"C\",\"name\":\"Gamma\",\"description\":\"third\"}\n",
        ))
        .unwrap()
    }

    #[test]
    fn taxonomy_parsing() {
        let t = tax();
        assert_eq!(t.len(), 3);
        assert_eq!(t.get("B").unwrap().name, "B");
        let dup = "{\"id\":\"A\",\"description\":\"x\"}\n{\"id\":\"A\",\"description\":\"y\"}\n";
        assert!(matches!(
            parse_taxonomy(Cursor::new(dup)),
            Err(Error::DuplicateLabel(_))
        ));
        let blank = "{\"id\":\"A\",\"description\":\"\"}\n";
        assert!(matches!(
            parse_taxonomy(Cursor::new(blank)),
            Err(Error::EmptyDescription(_))
        ));
        assert!(matches!(
            parse_taxonomy(Cursor::new("{\"id\":\"A\"}\n")),
            Err(Error::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn documents_parsing() {
        let t = tax();
        let good = "{\"id\":\"d1\",\"text\":\"x\",\"labels\":[\"A\"]}\n\
                    {\"id\":\"d2\",\"text\":\"y\"}\n\
                    {\"id\":\"d3\",\"text\":\"z\",\"labels\":[]}\n";
        let docs = parse_documents(Cursor::new(good), &t, GoldPolicy::Strict).unwrap().docs;
        assert_eq!(docs.len(), 3);
        assert!(docs[1].gold_labels.is_none());
        assert_eq!(docs[2].gold_labels.as_ref().unwrap().len(), 0);

        let bad = "{\"id\":\"d1\",\"text\":\"x\",\"labels\":[\"A\",\"Q\"]}\n";
        assert!(matches!(
            parse_documents(Cursor::new(bad), &t, GoldPolicy::Strict),
            Err(Error::GoldOutsideTaxonomy { doc, label }) if doc == "d1" && label == "Q"
        ));
        let lenient = parse_documents(Cursor::new(bad), &t, GoldPolicy::Lenient).unwrap();
        assert_eq!(
            lenient.dropped,
            vec![DroppedLabel {
                doc_id: "d1".into(),
                label: "Q".into()
            }]
        );
        assert_eq!(lenient.docs[0].gold_labels.as_ref().unwrap().len(), 1);

        let dup = "{\"id\":\"d1\",\"text\":\"x\"}\n{\"id\":\"d1\",\"text\":\"y\"}\n";
        assert!(matches!(
            parse_documents(Cursor::new(dup), &t, GoldPolicy::Strict),
            Err(Error::DuplicateDocId(_))
        ));
        assert!(matches!(
            parse_documents(Cursor::new("{\"id\":\"d1\"}\nnot json\n"), &t, GoldPolicy::Strict),
            Err(Error::MalformedLine { line: 2, .. })
        ));
        assert!(parse_documents(Cursor::new(""), &t, GoldPolicy::Strict)
            .unwrap()
            .docs
            .is_empty());
    }

    #[test]
    fn document_round_trip() {
        let t = tax();
        let docs = vec![
            DocumentRecord::new("a", "text \"quoted\"\nnewline")
                .with_gold(["A", "C"])
                .unwrap(),
            DocumentRecord::new("b", "unlabelled"),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_documents(&path, &docs).unwrap();
        assert_eq!(load_documents(&path, &t, GoldPolicy::Strict).unwrap().docs, docs);
    }

    #[test]
    fn stats() {
        let t = tax();
        let docs = vec![
            DocumentRecord::new("1", "").with_gold(["A"]).unwrap(),
            DocumentRecord::new("2", "").with_gold(["A", "B"]).unwrap(),
        ];
        let s = corpus_stats(&docs, &t).unwrap();
        assert_eq!(s.avg_labels_per_doc, 1.5);
        assert_eq!(s.cardinality, 3);
        assert_eq!(s.support[&LabelId::new("A").unwrap()], 2);
        assert_eq!(s.support[&LabelId::new("C").unwrap()], 0);

        let ones: Vec<_> = (0..4)
            .map(|i| DocumentRecord::new(i.to_string(), "").with_gold(["B"]).unwrap())
            .collect();
        assert_eq!(corpus_stats(&ones, &t).unwrap().avg_labels_per_doc, 1.0);
        assert!(matches!(
            corpus_stats(&[DocumentRecord::new("x", "")], &t),
            Err(Error::NoGoldLabels)
        ));
        assert!(matches!(corpus_stats(&[], &t), Err(Error::NoGoldLabels)));
    }

    fn numbered(n: usize) -> Vec<DocumentRecord> {
        (0..n).map(|i| DocumentRecord::new(format!("{i:05}"), "")).collect()
    }

    #[test]
    fn subsampling() {
        let docs = numbered(3000);
        assert_eq!(subsample_train(&docs, 5, 3000).unwrap(), docs);
        assert_eq!(
            subsample_train(&docs, 5, 100).unwrap(),
            subsample_train(&docs, 5, 100).unwrap()
        );
        let small: HashSet<String> = subsample_train(&docs, 5, 100)
            .unwrap()
            .into_iter()
            .map(|d| d.id)
            .collect();
        let large: HashSet<String> = subsample_train(&docs, 5, 2000)
            .unwrap()
            .into_iter()
            .map(|d| d.id)
            .collect();
        assert!(small.is_subset(&large));
        assert_ne!(
            subsample_train(&docs, 6, 100).unwrap(),
            subsample_train(&docs, 5, 100).unwrap()
        );
        assert!(matches!(
            subsample_train(&docs, 5, 3001),
            Err(Error::SizeTooLarge { .. })
        ));
    }

    #[test]
    fn splitting() {
        let docs = numbered(1000);
        let s = split_corpus(&docs, &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (800, 100, 100));
        let mut all: Vec<String> = s
            .train
            .iter()
            .chain(&s.val)
            .chain(&s.test)
            .map(|d| d.id.clone())
            .collect();
        all.sort();
        assert_eq!(all, docs.iter().map(|d| d.id.clone()).collect::<Vec<_>>());
        let bad = SplitSpec {
            train_fraction: 0.95,
            val_fraction: 0.1,
            ..Default::default()
        };
        assert!(split_corpus(&docs, &bad).is_err());
    }
}
