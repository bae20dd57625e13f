//! Synthetic release corpora with known ground truth, and a brute-force
//! reference detector to check the real one against.

pub mod compare;
pub mod generate;
pub mod labels;
pub mod ledger;
pub mod oracle;

pub use generate::{generate, sentence_text, GeneratedRelease, GeneratorParams, ParamError, SyntheticCorpus};
pub use labels::{label_counts, release_key, Labels, SectionTag, SentenceLabels};
pub use ledger::{Event, GroundTruthLedger, ReleaseCounts};
pub use oracle::{brute_force_detect, DumpRelease, DumpRow, OccurrenceDump, OracleError, OracleLimits};
