//! Seeded synthetic corpora with known geometry.
//!
//! Useful for exercising the pipeline without real data: [`exact_geometry`]
//! places each document's gold labels strictly nearest to it, and
//! [`clustered_corpus`] draws documents around the sum of their labels'
//! centroids so that neighbor voting improves as training data grows.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::{DocumentRecord, LabelEntry, LabelId, Taxonomy};
use crate::vector::Embedding;

pub struct ExactGeometry {
    pub taxonomy: Taxonomy,
    pub docs: Vec<DocumentRecord>,
    pub labels_per_doc: usize,
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Random orthonormal basis of R^dim via Gram-Schmidt.
fn orthonormal_basis(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v = gaussian(rng, dim);
        for b in &basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn to_embedding(v: &[f64]) -> Embedding {
    Embedding::new(v.iter().map(|&x| x as f32).collect()).expect("finite by construction")
}

fn label_name(i: usize) -> String {
    format!("L{i:03}")
}

/// `n_labels` orthonormal label vectors and `n_docs` documents with
/// `labels_per_doc` gold labels each. In the label basis a document has
/// weight in `[0.6, 1.0]` on each gold label and at most `0.2` elsewhere, so
/// its gold labels are exactly its nearest labels.
pub fn exact_geometry(n_labels: usize, n_docs: usize, labels_per_doc: usize, seed: u64) -> ExactGeometry {
    assert!(labels_per_doc <= n_labels, "labels_per_doc exceeds n_labels");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = orthonormal_basis(&mut rng, n_labels);
    let entries = basis
        .iter()
        .enumerate()
        .map(|(i, b)| {
            LabelEntry::new(&label_name(i), &label_name(i), &format!("synthetic label {i}"))
                .expect("valid id")
                .with_embedding(to_embedding(b))
        })
        .collect();
    let taxonomy = Taxonomy::new(entries).expect("distinct ids");

    let docs = (0..n_docs)
        .map(|d| {
            let gold: BTreeSet<usize> = sample(&mut rng, n_labels, labels_per_doc).into_iter().collect();
            let coords: Vec<f64> = (0..n_labels)
                .map(|l| {
                    if gold.contains(&l) {
                        rng.random_range(0.6..=1.0)
                    } else {
                        rng.random_range(0.0..=0.2)
                    }
                })
                .collect();
            let mut v = vec![0.0; n_labels];
            for (c, b) in coords.iter().zip(&basis) {
                v.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
            }
            DocumentRecord::new(format!("doc{d:05}"), format!("synthetic document {d}"))
                .with_gold(gold.iter().map(|&l| label_name(l)))
                .expect("valid ids")
                .with_embedding(to_embedding(&v))
        })
        .collect();
    ExactGeometry {
        taxonomy,
        docs,
        labels_per_doc,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterSpec {
    pub n_labels: usize,
    pub dim: usize,
    pub n_docs: usize,
    /// Each document has between 1 and this many gold labels.
    pub max_labels_per_doc: usize,
    /// Per-coordinate standard deviation of document noise, relative to unit
    /// centroids.
    pub doc_noise: f64,
    /// Per-coordinate noise added to centroids to form label-description
    /// embeddings.
    pub description_noise: f64,
    pub seed: u64,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        // 50 labels keep per-label support growing through a few thousand
        // training documents, so neighbor voting has not saturated by then.
        ClusterSpec {
            n_labels: 50,
            dim: 32,
            n_docs: 5000,
            max_labels_per_doc: 3,
            doc_noise: 0.35,
            description_noise: 0.15,
            seed: 17,
        }
    }
}

pub struct ClusteredCorpus {
    pub taxonomy: Taxonomy,
    pub docs: Vec<DocumentRecord>,
}

/// Documents scattered around the sum of their labels' centroids; the
/// taxonomy's embeddings are noisy copies of the centroids.
pub fn clustered_corpus(spec: &ClusterSpec) -> ClusteredCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = |v: Vec<f64>| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let centroids: Vec<Vec<f64>> = (0..spec.n_labels).map(|_| unit(gaussian(&mut rng, spec.dim))).collect();
    let entries = centroids
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let noisy: Vec<f64> = c
                .iter()
                .map(|x| x + spec.description_noise * normal(&mut rng))
                .collect();
            LabelEntry::new(&label_name(i), &label_name(i), &format!("synthetic topic {i}"))
                .expect("valid id")
                .with_embedding(to_embedding(&noisy))
        })
        .collect();
    let taxonomy = Taxonomy::new(entries).expect("distinct ids");

    let max = spec.max_labels_per_doc.clamp(1, spec.n_labels);
    let docs = (0..spec.n_docs)
        .map(|d| {
            let n = rng.random_range(1..=max);
            let gold: BTreeSet<usize> = sample(&mut rng, spec.n_labels, n).into_iter().collect();
            let mut v = vec![0.0; spec.dim];
            for &l in &gold {
                v.iter_mut().zip(&centroids[l]).for_each(|(x, c)| *x += c);
            }
            for x in v.iter_mut() {
                *x += spec.doc_noise * normal(&mut rng);
            }
            DocumentRecord::new(format!("doc{d:05}"), format!("synthetic document {d}"))
                .with_gold(gold.iter().map(|&l| label_name(l)))
                .expect("valid ids")
                .with_embedding(to_embedding(&v))
        })
        .collect();
    ClusteredCorpus { taxonomy, docs }
}

/// Gold label ids of a document, for tests that need plain strings.
pub fn gold_ids(doc: &DocumentRecord) -> Vec<&str> {
    doc.gold_labels.iter().flatten().map(LabelId::as_str).collect()
}
