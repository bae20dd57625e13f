//! Sentence provenance across versioned releases of a flat-file protein
//! database: parsing, segmentation, a merge-aware occurrence store, reuse
//! statistics, propagation-pattern detection and curator classification.

pub mod curation;
pub mod flatfile;
pub mod ingest;
pub mod patterns;
pub mod release;
pub mod segment;
pub mod stats;
pub mod store;

pub use release::{Ordinal, Release, Section};
pub use store::{ClusterId, Corpus, Occurrence, ReleaseId, SentenceId, SentenceTimeline, StoreError, StoreFile};
