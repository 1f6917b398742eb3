//! Closed-vocabulary multi-label annotation by cosine retrieval.
//!
//! Documents and label descriptions are embedded into one vector space by an
//! external model. A document is annotated with the labels whose vectors are
//! nearest to it ([`annotator::Strategy::LabelSimilarity`]) or with the labels
//! of its nearest annotated neighbours ([`annotator::Strategy::NeighborVote`]).
//! The only tuned quantity is the output size `k`. Because every prediction
//! is drawn from the taxonomy, a prediction can never name a label that does
//! not exist.
//!
//! ```
//! use lexlabel::{Embedding, LabelEntry, SemanticIndex, Taxonomy};
//!
//! let taxonomy = Taxonomy::new(vec![
//!     LabelEntry::new("A", "Alpha", "first").unwrap().with_embedding(Embedding::new(vec![1.0, 0.0]).unwrap()),
//!     LabelEntry::new("B", "Beta", "second").unwrap().with_embedding(Embedding::new(vec![0.0, 1.0]).unwrap()),
//! ]).unwrap();
//! let index = SemanticIndex::build(&taxonomy).unwrap();
//! let hits = index.search_top_k(&Embedding::new(vec![0.9, 0.1]).unwrap(), 1).unwrap();
//! assert_eq!(hits[0].label.as_str(), "A");
//! ```

pub mod annotator;
pub mod audit;
pub mod cost;
pub mod dataset;
pub mod error;
pub mod gateway;
pub mod index;
pub mod metrics;
pub mod model;
pub mod scaling;
pub mod synthetic;
pub mod tuner;
pub mod vector;

pub use annotator::{predict, predict_batch, AnnotatorConfig, OutputSize, Strategy, Target, TrainingCorpusIndex};
pub use error::{Error, ErrorFamily, Result};
pub use index::{add_described_label, load_index, save_index, SemanticIndex};
pub use metrics::{evaluate, EvalReport, MacroUniverse};
pub use model::{DocumentRecord, LabelEntry, LabelId, PredictionSet, ScoredLabel, Taxonomy};
pub use tuner::{tune_k, TuningReport, TuningSpec};
pub use vector::{cosine_similarity, Embedding};

/// Runs the guide's code blocks as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/labels-and-index.md")]
    mod labels_and_index {}
    #[doc = include_str!("../../../book/src/annotating.md")]
    mod annotating {}
    #[doc = include_str!("../../../book/src/tuning-and-evaluation.md")]
    mod tuning_and_evaluation {}
    #[doc = include_str!("../../../book/src/closed-world.md")]
    mod closed_world {}
    #[doc = include_str!("../../../book/src/embeddings.md")]
    mod embeddings {}
    #[doc = include_str!("../../../book/src/cost.md")]
    mod cost {}
    #[doc = include_str!("../../../book/src/scaling.md")]
    mod scaling {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/service.md")]
    mod service {}
}
