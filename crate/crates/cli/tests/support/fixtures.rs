//! Deterministic generator for the shipped audit and statistics fixtures.
//!
//! Each fixture directory holds `taxonomy.jsonl`, `gold.jsonl` (with the
//! target average labels per document) and `predictions.jsonl` shaped like
//! generative-model output: mostly valid labels, a fixed number of samples
//! naming labels outside the taxonomy, and a few valid labels padded with
//! whitespace.

#![allow(dead_code)]

use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub struct FixtureSpec {
    pub name: &'static str,
    pub n_samples: usize,
    /// Total gold assignments; divided by `n_samples` gives the average.
    pub gold_assignments: usize,
    /// Out-of-taxonomy labels and how many samples carry each.
    pub hallucinations: &'static [(&'static str, usize)],
    pub seed: u64,
}

pub const ECTHR_A: FixtureSpec = FixtureSpec {
    name: "ecthr_a",
    n_samples: 1000,
    gold_assignments: 1160,
    hallucinations: &[
        ("Article 7", 4),
        ("Article 18", 3),
        ("Article 13", 1),
        ("Article 17", 1),
    ],
    seed: 101,
};

pub const ECTHR_B: FixtureSpec = FixtureSpec {
    name: "ecthr_b",
    n_samples: 1000,
    gold_assignments: 1450,
    hallucinations: &[("Article 13", 3), ("Article 7", 2), ("Article 4", 1), ("Article 34", 1)],
    seed: 202,
};

pub const EURLEX: FixtureSpec = FixtureSpec {
    name: "eurlex",
    n_samples: 5000,
    gold_assignments: 22550,
    hallucinations: &[("statistics", 3), ("insurance", 2), ("economy", 1)],
    seed: 303,
};

pub const ALL: [&FixtureSpec; 3] = [&ECTHR_A, &ECTHR_B, &EURLEX];

const ECHR_ARTICLES: [(&str, &str); 10] = [
    ("Article 2", "Right to life"),
    ("Article 3", "Prohibition of torture and inhuman or degrading treatment"),
    ("Article 5", "Right to liberty and security"),
    ("Article 6", "Right to a fair trial"),
    ("Article 8", "Right to respect for private and family life"),
    ("Article 9", "Freedom of thought, conscience and religion"),
    ("Article 10", "Freedom of expression"),
    ("Article 11", "Freedom of assembly and association"),
    ("Article 14", "Prohibition of discrimination"),
    ("P1-1", "Protection of property"),
];

pub const EUROVOC_TOPICS: [&str; 100] = [
    "political framework",
    "political party",
    "electoral procedure and voting",
    "parliament",
    "parliamentary proceedings",
    "politics and public safety",
    "executive power and public service",
    "international affairs",
    "cooperation policy",
    "international security",
    "defence",
    "EU law",
    "sources and branches of the law",
    "civil law",
    "criminal law",
    "justice",
    "organisation of the legal system",
    "international law",
    "rights and freedoms",
    "economic policy",
    "economic growth",
    "economic analysis",
    "regions and regional policy",
    "national accounts",
    "economic structure",
    "monetary relations",
    "monetary economics",
    "financial institutions and credit",
    "free movement of capital",
    "financing and investment",
    "public finance and budget policy",
    "budget",
    "taxation",
    "prices",
    "trade policy",
    "tariff policy",
    "trade",
    "international trade",
    "external trade",
    "consumption",
    "marketing",
    "distributive trades",
    "communications",
    "information and information processing",
    "information technology and data processing",
    "documentation",
    "business organisation",
    "business classification",
    "legal form of organisations",
    "management",
    "accounting",
    "competition",
    "employment",
    "labour market",
    "organisation of work and working conditions",
    "personnel management and staff remuneration",
    "labour law and labour relations",
    "demography and population",
    "family",
    "migration",
    "social framework",
    "social protection",
    "health",
    "culture and religion",
    "education",
    "science",
    "natural and applied sciences",
    "land transport",
    "maritime and inland waterway transport",
    "air and space transport",
    "transport policy",
    "environmental policy",
    "natural environment",
    "deterioration of the environment",
    "agricultural policy",
    "agricultural structures and production",
    "farming systems",
    "means of agricultural production",
    "agricultural activity",
    "forestry",
    "fisheries",
    "plant product",
    "animal product",
    "processed agricultural produce",
    "beverages and sugar",
    "foodstuff",
    "food technology",
    "production",
    "technology and technical regulations",
    "research and intellectual property",
    "energy policy",
    "coal and mining industries",
    "oil and gas industry",
    "electrical and nuclear industries",
    "industrial structures and policy",
    "chemistry",
    "iron, steel and other metal industries",
    "mechanical engineering",
    "building and public works",
    "European Union institutions",
];

#[derive(Serialize)]
struct TaxonomyLine<'a> {
    id: &'a str,
    name: &'a str,
    description: String,
}

#[derive(Serialize)]
struct GoldLine<'a> {
    id: &'a str,
    text: String,
    labels: Vec<&'a str>,
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    doc_id: &'a str,
    labels: Vec<String>,
}

fn taxonomy(spec: &FixtureSpec) -> Vec<(String, String, String)> {
    if spec.name == "eurlex" {
        EUROVOC_TOPICS
            .iter()
            .map(|t| (t.to_string(), t.to_string(), format!("Documents concerning {t}.")))
            .collect()
    } else {
        ECHR_ARTICLES
            .iter()
            .map(|(id, name)| {
                (
                    id.to_string(),
                    name.to_string(),
                    format!("{id} of the Convention: {name}."),
                )
            })
            .collect()
    }
}

fn jsonl<T: Serialize>(rows: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r).unwrap();
        out.push(b'\n');
    }
    out
}

/// File name to bytes, in a fixed order.
pub fn render(spec: &FixtureSpec) -> Vec<(&'static str, Vec<u8>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels = taxonomy(spec);
    let k = labels.len();
    let ids: Vec<String> = (0..spec.n_samples).map(|i| format!("{}-{i:05}", spec.name)).collect();

    // Exact gold total: every document gets `base` labels and a shuffled
    // subset gets one more.
    let base = spec.gold_assignments / spec.n_samples;
    let extra = spec.gold_assignments % spec.n_samples;
    let mut counts: Vec<usize> = (0..spec.n_samples).map(|i| base + usize::from(i < extra)).collect();
    counts.shuffle(&mut rng);
    let gold: Vec<Vec<usize>> = counts
        .iter()
        .map(|&c| {
            let mut g = sample(&mut rng, k, c).into_vec();
            g.sort_unstable();
            g
        })
        .collect();

    let n_bad: usize = spec.hallucinations.iter().map(|(_, n)| n).sum();
    let chosen = sample(&mut rng, spec.n_samples, n_bad + 5).into_vec();
    let (bad_docs, padded_docs) = chosen.split_at(n_bad);
    let mut invalid_for = vec![None; spec.n_samples];
    let mut slot = 0;
    for (label, n) in spec.hallucinations {
        for _ in 0..*n {
            invalid_for[bad_docs[slot]] = Some(*label);
            slot += 1;
        }
    }

    let mut first_statistics = true;
    let mut preds = Vec::with_capacity(spec.n_samples);
    for (i, g) in gold.iter().enumerate() {
        let mut p: Vec<String> = g.iter().map(|&l| labels[l].0.clone()).collect();
        if p.len() > 1 && rng.random_bool(0.3) {
            p.remove(rng.random_range(0..p.len()));
        }
        if rng.random_bool(0.3) {
            let extra = &labels[rng.random_range(0..k)].0;
            if !p.contains(extra) {
                p.push(extra.clone());
            }
        }
        p.shuffle(&mut rng);
        if padded_docs.contains(&i) {
            p[0] = format!("  {} ", p[0]);
        }
        if let Some(bad) = invalid_for[i] {
            if bad == "statistics" && first_statistics {
                first_statistics = false;
                p = vec!["EU law".into(), "external trade".into(), "statistics".into()];
            } else {
                let at = rng.random_range(0..=p.len());
                p.insert(at, bad.to_string());
            }
        }
        preds.push(PredictionLine {
            doc_id: &ids[i],
            labels: p,
        });
    }

    let tax_lines: Vec<TaxonomyLine> = labels
        .iter()
        .map(|(id, name, d)| TaxonomyLine {
            id,
            name,
            description: d.clone(),
        })
        .collect();
    let gold_lines: Vec<GoldLine> = ids
        .iter()
        .zip(&gold)
        .map(|(id, g)| GoldLine {
            id,
            text: format!("Synthetic {} case {id}.", spec.name),
            labels: g.iter().map(|&l| labels[l].0.as_str()).collect(),
        })
        .collect();
    vec![
        ("taxonomy.jsonl", jsonl(&tax_lines)),
        ("gold.jsonl", jsonl(&gold_lines)),
        ("predictions.jsonl", jsonl(&preds)),
    ]
}

/// Writes every fixture under `root/<name>/`.
pub fn write_all(root: &Path) -> std::io::Result<()> {
    for spec in ALL {
        let dir = root.join(spec.name);
        std::fs::create_dir_all(&dir)?;
        for (file, bytes) in render(spec) {
            std::fs::File::create(dir.join(file))?.write_all(&bytes)?;
        }
    }
    Ok(())
}
