use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report.
///
/// Variants are grouped into coarse [`ErrorFamily`] values so that front ends
/// (the CLI exit code, the HTTP status) can map them without matching on every
/// variant.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("vector has zero norm")]
    ZeroVector,
    #[error("vector has a non-finite entry at position {position}")]
    NonFiniteEntry { position: usize },
    #[error("vector has no entries")]
    EmptyVector,

    #[error("label id must be non-empty")]
    EmptyLabelId,
    #[error("label {0} has an empty description")]
    EmptyDescription(String),
    #[error("duplicate label {0}")]
    DuplicateLabel(String),
    #[error("unknown label {0}")]
    UnknownLabel(String),
    #[error("taxonomy must contain at least one label")]
    EmptyTaxonomy,
    #[error("no embedding for {0}")]
    MissingEmbedding(String),

    #[error("index is empty")]
    EmptyIndex,
    #[error("k must be at least 1, got {0}")]
    InvalidK(usize),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("annotator configuration error: {0}")]
    InvalidConfig(String),

    #[error("document id must be non-empty")]
    EmptyDocId,
    #[error("duplicate document id {0}")]
    DuplicateDocId(String),
    #[error("document {0} has no embedding")]
    MissingDocEmbedding(String),
    #[error("document {doc}: gold label {label} is not in the taxonomy")]
    GoldOutsideTaxonomy { doc: String, label: String },
    #[error("validation set is empty")]
    EmptyValidationSet,
    #[error("invalid k grid: {0}")]
    InvalidGrid(String),

    #[error("document {0} has no gold labels")]
    MissingGold(String),
    #[error("prediction for unknown document {0}")]
    UnknownDoc(String),
    #[error("no prediction for document {0}")]
    MissingPrediction(String),
    #[error("document {doc}: predicted label {label} is not in the taxonomy")]
    LabelOutsideTaxonomy { doc: String, label: String },
    #[error("corpus has no gold labels")]
    NoGoldLabels,
    #[error("requested sample of {requested} but only {available} documents are available")]
    SizeTooLarge { requested: usize, available: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("embedding service unreachable: {0}")]
    ServiceUnreachable(String),
    #[error("malformed embedding service response: {0}")]
    MalformedResponse(String),
    #[error("embedding service rejected the request with status {status}: {message}")]
    ServiceRejected { status: u16, message: String },
    #[error("text at position {index} is empty")]
    EmptyText { index: usize },

    #[error("corrupt vector file header: {0}")]
    CorruptHeader(String),
    #[error("record count mismatch: header declares {expected}, found {actual}")]
    CountMismatch { expected: u64, actual: u64 },
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("prediction file contains no samples")]
    EmptyPredictions,
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parameter {name} must be non-negative and finite, got {value}")]
    NonPositiveParam { name: &'static str, value: f64 },

    #[error("document {doc_id}: {source}")]
    BatchItem {
        doc_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error grouping used for exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorFamily {
    /// Bad vectors: wrong dimension, zero norm, NaN.
    Vector,
    /// Taxonomy and label-set violations, including closed-world failures.
    Taxonomy,
    /// Index and annotator preconditions (empty index, bad k).
    Search,
    /// Corpus, split and evaluation alignment problems.
    Data,
    /// Embedding service failures.
    Service,
    /// Malformed files.
    Format,
    /// Filesystem errors.
    Io,
}

impl Error {
    pub fn family(&self) -> ErrorFamily {
        use Error::*;
        match self {
            DimensionMismatch { .. } | ZeroVector | NonFiniteEntry { .. } | EmptyVector => ErrorFamily::Vector,
            EmptyLabelId
            | EmptyDescription(_)
            | DuplicateLabel(_)
            | UnknownLabel(_)
            | EmptyTaxonomy
            | MissingEmbedding(_)
            | GoldOutsideTaxonomy { .. }
            | LabelOutsideTaxonomy { .. } => ErrorFamily::Taxonomy,
            EmptyIndex | InvalidK(_) | EmptyCorpus | InvalidConfig(_) | InvalidGrid(_) => ErrorFamily::Search,
            EmptyDocId
            | DuplicateDocId(_)
            | MissingDocEmbedding(_)
            | EmptyValidationSet
            | MissingGold(_)
            | UnknownDoc(_)
            | MissingPrediction(_)
            | NoGoldLabels
            | SizeTooLarge { .. }
            | InvalidSplit(_)
            | EmptyPredictions
            | NonPositiveParam { .. } => ErrorFamily::Data,
            ServiceUnreachable(_) | MalformedResponse(_) | ServiceRejected { .. } | EmptyText { .. } => {
                ErrorFamily::Service
            }
            CorruptHeader(_) | CountMismatch { .. } | MalformedLine { .. } | InvalidInput(_) => ErrorFamily::Format,
            BatchItem { source, .. } => source.family(),
            Io { .. } => ErrorFamily::Io,
        }
    }

    /// Short stable name of the variant, for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        use Error::*;
        match self {
            DimensionMismatch { .. } => "DimensionMismatch",
            ZeroVector => "ZeroVector",
            NonFiniteEntry { .. } => "NonFiniteEntry",
            EmptyVector => "EmptyVector",
            EmptyLabelId => "EmptyLabelId",
            EmptyDescription(_) => "EmptyDescription",
            DuplicateLabel(_) => "DuplicateLabel",
            UnknownLabel(_) => "UnknownLabel",
            EmptyTaxonomy => "EmptyTaxonomy",
            MissingEmbedding(_) => "MissingEmbedding",
            EmptyIndex => "EmptyIndex",
            InvalidK(_) => "InvalidK",
            EmptyCorpus => "EmptyCorpus",
            InvalidConfig(_) => "InvalidConfig",
            EmptyDocId => "EmptyDocId",
            DuplicateDocId(_) => "DuplicateDocId",
            MissingDocEmbedding(_) => "MissingDocEmbedding",
            GoldOutsideTaxonomy { .. } => "GoldOutsideTaxonomy",
            EmptyValidationSet => "EmptyValidationSet",
            InvalidGrid(_) => "InvalidGrid",
            MissingGold(_) => "MissingGold",
            UnknownDoc(_) => "UnknownDoc",
            MissingPrediction(_) => "MissingPrediction",
            LabelOutsideTaxonomy { .. } => "LabelOutsideTaxonomy",
            NoGoldLabels => "NoGoldLabels",
            SizeTooLarge { .. } => "SizeTooLarge",
            InvalidSplit(_) => "InvalidSplit",
            ServiceUnreachable(_) => "ServiceUnreachable",
            MalformedResponse(_) => "MalformedResponse",
            ServiceRejected { .. } => "ServiceRejected",
            EmptyText { .. } => "EmptyText",
            CorruptHeader(_) => "CorruptHeader",
            CountMismatch { .. } => "CountMismatch",
            MalformedLine { .. } => "MalformedLine",
            EmptyPredictions => "EmptyPredictions",
            InvalidInput(_) => "InvalidInput",
            NonPositiveParam { .. } => "NonPositiveParam",
            BatchItem { source, .. } => source.kind(),
            Io { .. } => "Io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
