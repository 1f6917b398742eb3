//! Brute-force reference implementations shared by integration tests.
//!
//! These deliberately avoid the library's search and counting code paths:
//! scores are recomputed from stored rows with plain loops and every result
//! comes from a full sort.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;

/// Query normalized in `f64`, matching the precision the index uses for
/// queries.
pub fn unit_query(q: &[f32]) -> Vec<f64> {
    let mut sq = 0.0f64;
    for &x in q {
        sq += f64::from(x) * f64::from(x);
    }
    let n = sq.sqrt();
    q.iter().map(|&x| f64::from(x) / n).collect()
}

pub fn score(row: &[f32], q: &[f64]) -> f64 {
    let mut s = 0.0f64;
    for i in 0..row.len() {
        s += f64::from(row[i]) * q[i];
    }
    s.clamp(-1.0, 1.0)
}

fn by_score_then_id(a: &(String, f64), b: &(String, f64)) -> Ordering {
    match b.1.partial_cmp(&a.1).expect("finite scores") {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    }
}

/// Sorts every row and keeps the first `k`.
pub fn brute_top_k(rows: &[(String, Vec<f32>)], query: &[f32], k: usize) -> Vec<(String, f64)> {
    let q = unit_query(query);
    let mut all: Vec<(String, f64)> = rows.iter().map(|(id, r)| (id.clone(), score(r, &q))).collect();
    all.sort_by(by_score_then_id);
    all.truncate(k);
    all
}

/// Label vote over the `n` nearest rows; each neighbour adds its score to
/// each of its labels, sums are divided by the neighbours consulted.
pub fn brute_neighbor_vote(
    rows: &[(String, Vec<f32>)],
    gold: &HashMap<String, BTreeSet<String>>,
    query: &[f32],
    n: usize,
    k: usize,
) -> Vec<(String, f64)> {
    let neighbors = brute_top_k(rows, query, n);
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for (id, s) in &neighbors {
        for label in &gold[id] {
            *sums.entry(label.clone()).or_insert(0.0) += s;
        }
    }
    let m = neighbors.len() as f64;
    let mut out: Vec<(String, f64)> = sums.into_iter().map(|(l, s)| (l, (s / m).clamp(-1.0, 1.0))).collect();
    out.sort_by(by_score_then_id);
    out.truncate(k);
    out
}

pub struct NaiveF1 {
    pub micro: f64,
    /// Averaged over labels with gold support.
    pub macro_supported: f64,
    /// Averaged over every label in `labels`.
    pub macro_full: f64,
}

fn f1(tp: f64, fp: f64, fn_: f64) -> f64 {
    let p = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
    let r = if tp + fn_ == 0.0 { 0.0 } else { tp / (tp + fn_) };
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-label counting by scanning every (document, label) pair.
pub fn naive_f1(preds: &[Vec<String>], gold: &[Vec<String>], labels: &[String]) -> NaiveF1 {
    let (mut tp_all, mut fp_all, mut fn_all) = (0.0, 0.0, 0.0);
    let (mut sum_sup, mut n_sup, mut sum_full) = (0.0, 0.0, 0.0);
    for label in labels {
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for d in 0..gold.len() {
            let p = preds[d].contains(label);
            let g = gold[d].contains(label);
            if p && g {
                tp += 1.0;
            } else if p {
                fp += 1.0;
            } else if g {
                fn_ += 1.0;
            }
        }
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        let f = f1(tp, fp, fn_);
        sum_full += f;
        if tp + fn_ > 0.0 {
            sum_sup += f;
            n_sup += 1.0;
        }
    }
    NaiveF1 {
        micro: f1(tp_all, fp_all, fn_all),
        macro_supported: if n_sup == 0.0 { 0.0 } else { sum_sup / n_sup },
        macro_full: if labels.is_empty() {
            0.0
        } else {
            sum_full / labels.len() as f64
        },
    }
}

pub fn gaussian_vec<R: Rng>(rng: &mut R, d: usize) -> Vec<f32> {
    loop {
        let v: Vec<f32> = (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        if v.iter().any(|&x| x != 0.0) {
            return v;
        }
    }
}

/// Entries from a handful of small integers, so exact score ties occur.
pub fn coarse_vec<R: Rng>(rng: &mut R, d: usize) -> Vec<f32> {
    loop {
        let v: Vec<f32> = (0..d).map(|_| rng.random_range(-2i8..=2) as f32).collect();
        if v.iter().any(|&x| x != 0.0) {
            return v;
        }
    }
}
