//! Analysis metrics over a corpus of (concept, message) pairs.
//!
//! All metrics are pure functions of an immutable [`Corpus`]. Entropies are
//! reported in bits; every score that is a ratio of entropies is
//! base-invariant. Counting uses ordered maps throughout so repeated runs
//! produce bit-identical results.

mod compositional;
mod corpus;
mod entropy;
mod redundancy;
mod report;

pub use compositional::{
    bosdis, cosine_distance, levenshtein, posdis, spearman, topographic_similarity,
    DEFAULT_MAX_PAIRS,
};
pub use corpus::{Corpus, CorpusMeta, CorpusRecord};
pub use entropy::{
    conditional_entropy_bits, consistency, effectiveness, entropy_bits, entropy_scores_for,
    nmi, ConceptMessageTable, EntropyScores,
};
pub use redundancy::{symbol_redundancy, RedundancyReport};
pub use report::{
    compute_report, message_length_stats, symbol_occurrence_by_level, write_per_level_csv,
    write_report_json, write_report_text, MessageLengthStats, MetricsReport, PerLevelMetrics,
    SymbolOccurrenceRow, SymbolOccurrenceTable,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("metric requires a nonempty corpus")]
    EmptyCorpus,
    #[error("degenerate corpus: {0}")]
    Degenerate(String),
    #[error("inconsistent corpus: {0}")]
    Inconsistent(String),
    #[error("{0}")]
    Concept(#[from] crate::concept::ConceptError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
