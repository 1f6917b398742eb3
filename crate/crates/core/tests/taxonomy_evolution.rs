//! Adding a label costs one embedding of its description and leaves every
//! existing row untouched.

use std::sync::Arc;

use lexlabel::gateway::{EmbeddingGateway, GatewayConfig, HashingEmbedder};
use lexlabel::{add_described_label, Embedding, LabelEntry, SemanticIndex, Taxonomy};

fn taxonomy(k: usize, embedder: &HashingEmbedder) -> Taxonomy {
    Taxonomy::new(
        (0..k)
            .map(|i| {
                let description = format!("topic number {i} about matter {}", i * 7);
                LabelEntry::new(&format!("L{i}"), &format!("Label {i}"), &description)
                    .unwrap()
                    .with_embedding(Embedding::new(embedder.embed_one(&description)).unwrap())
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn add_is_one_call_and_no_recomputation() {
    let embedder = HashingEmbedder::new(64);
    for k in [10, 100, 1000] {
        let mut tax = taxonomy(k, &embedder);
        let mut index = SemanticIndex::build(&tax).unwrap();
        let before_rows: Vec<Vec<u32>> = index
            .rows()
            .map(|(_, r)| r.iter().map(|x| x.to_bits()).collect())
            .collect();
        let snapshot = index.clone();
        let counters = index.counters();
        let gateway = EmbeddingGateway::new(Arc::new(embedder.clone()), None, GatewayConfig::default()).unwrap();

        let entry = LabelEntry::new("new", "New label", "freshly introduced legal concept").unwrap();
        let version = add_described_label(&mut tax, &mut index, entry, &gateway).unwrap();

        assert_eq!(gateway.stats().remote_calls, 1);
        assert_eq!(gateway.stats().texts_sent, 1);
        let after = index.counters();
        assert_eq!(after.normalizations - counters.normalizations, 1);
        assert_eq!(after.similarity_evaluations, counters.similarity_evaluations);
        assert_eq!(version, tax.version());
        assert_eq!(index.len(), k + 1);
        let after_rows: Vec<Vec<u32>> = index
            .rows()
            .take(k)
            .map(|(_, r)| r.iter().map(|x| x.to_bits()).collect())
            .collect();
        assert_eq!(before_rows, after_rows);
        for id in snapshot.rows().map(|(id, _)| id.clone()).collect::<Vec<_>>() {
            assert!(index.shares_row(&snapshot, &id));
        }
        assert!(!snapshot.contains("new"));
    }
}

#[test]
fn duplicate_add_makes_no_call() {
    let embedder = HashingEmbedder::new(16);
    let mut tax = taxonomy(3, &embedder);
    let mut index = SemanticIndex::build(&tax).unwrap();
    let gateway = EmbeddingGateway::new(Arc::new(embedder), None, GatewayConfig::default()).unwrap();
    let dup = LabelEntry::new("L1", "x", "whatever").unwrap();
    assert!(add_described_label(&mut tax, &mut index, dup, &gateway).is_err());
    assert_eq!(gateway.stats().remote_calls, 0);
    assert_eq!(index.len(), 3);
}
