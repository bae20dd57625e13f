//! Manifest-driven ingestion: parse release files, segment their comments and
//! load the result into a corpus, one committed release at a time.
//!
//! Manifest format, tab-separated, `#` comments and an optional header row:
//!
//! ```text
//! section  label  date        path
//! SwissProt  9    1988-11-01  sprot9.dat.gz
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::flatfile::{open_release_file, parse_release, Diagnostic};
use crate::release::{Release, Section};
use crate::segment::{entry_sentences, Segmenter};
use crate::store::{Corpus, StoreError, StoreFile};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub release: Release,
    pub path: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("release file not found: {0}")]
    MissingFile(PathBuf),
    #[error("{section} {label} ({date}) is older than already ingested {section} {latest_label} ({latest_date})")]
    DateRegression {
        section: Section,
        label: String,
        date: NaiveDate,
        latest_label: String,
        latest_date: NaiveDate,
    },
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestRow>, IngestError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if rows.is_empty() && fields[0].eq_ignore_ascii_case("section") {
            continue;
        }
        let err = |reason: String| IngestError::Manifest {
            line: line_no,
            reason,
        };
        if fields.len() != 4 {
            return Err(err(format!("expected 4 tab-separated fields, got {}", fields.len())));
        }
        let section: Section = fields[0].parse().map_err(|e: crate::release::UnknownSection| err(e.to_string()))?;
        if fields[1].is_empty() {
            return Err(err("empty release label".into()));
        }
        let date: NaiveDate = fields[2]
            .parse()
            .map_err(|_| err(format!("bad date {:?}, expected YYYY-MM-DD", fields[2])))?;
        let path = base.join(fields[3]);
        rows.push(ManifestRow {
            release: Release::new(section, fields[1], date),
            path,
        });
    }
    Ok(rows)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Read {
        path: path.to_owned(),
        source,
    })?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

/// One entry after segmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedEntry {
    pub accessions: Vec<String>,
    /// Canonical sentences with their mention counts.
    pub sentences: Vec<(String, u32)>,
}

#[derive(Debug, Clone)]
pub struct ParsedRelease {
    pub release: Release,
    pub entries: Vec<ParsedEntry>,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn parse_release_file(path: &Path, release: Release, segmenter: &Segmenter) -> Result<ParsedRelease, IngestError> {
    let read_err = |source| IngestError::Read {
        path: path.to_owned(),
        source,
    };
    let reader = open_release_file(path).map_err(read_err)?;
    let mut entries_iter = parse_release(reader, Arc::new(release.clone()));
    let mut entries = Vec::new();
    for entry in entries_iter.by_ref() {
        let entry = entry.map_err(read_err)?;
        entries.push(ParsedEntry {
            sentences: entry_sentences(segmenter, &entry.comment_text),
            accessions: entry.accessions,
        });
    }
    Ok(ParsedRelease {
        release,
        entries,
        diagnostics: entries_iter.take_diagnostics(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleaseReport {
    pub section: Section,
    pub label: String,
    pub date: NaiveDate,
    /// True when the release was already in the store and left untouched.
    pub skipped: bool,
    pub entries: u64,
    pub annotated_entries: u64,
    /// Sentence occurrences recorded, one per sentence per entry.
    pub sentences: u64,
    pub new_sentences: u64,
    pub diagnostics: Vec<Diagnostic>,
}

/// Loads one parsed release into the corpus.
pub fn apply_release(corpus: &mut Corpus, parsed: ParsedRelease) -> Result<ReleaseReport, StoreError> {
    let before = corpus.sentence_count() as u64;
    let rid = corpus.register_release(parsed.release.clone())?;
    let mut report = ReleaseReport {
        section: parsed.release.section,
        label: parsed.release.label.clone(),
        date: parsed.release.date,
        skipped: false,
        entries: 0,
        annotated_entries: 0,
        sentences: 0,
        new_sentences: 0,
        diagnostics: parsed.diagnostics,
    };
    for entry in parsed.entries {
        let cluster = corpus.upsert_entry(rid, &entry.accessions)?;
        report.entries += 1;
        report.annotated_entries += !entry.sentences.is_empty() as u64;
        report.sentences += entry.sentences.len() as u64;
        for (text, mentions) in &entry.sentences {
            corpus.add_occurrence_mentions(text, cluster, rid, *mentions)?;
        }
    }
    report.new_sentences = corpus.sentence_count() as u64 - before;
    Ok(report)
}

fn skipped_report(release: &Release) -> ReleaseReport {
    ReleaseReport {
        section: release.section,
        label: release.label.clone(),
        date: release.date,
        skipped: true,
        entries: 0,
        annotated_entries: 0,
        sentences: 0,
        new_sentences: 0,
        diagnostics: Vec::new(),
    }
}

/// Releases in `rows` not yet in the corpus, date-ordered, after checking
/// that none of them predates an ingested release of its section and that
/// every file exists.
pub fn plan_ingest(corpus: &Corpus, rows: &[ManifestRow]) -> Result<Vec<ManifestRow>, IngestError> {
    let mut pending = Vec::new();
    for row in rows {
        let r = &row.release;
        if let Some(id) = corpus.find_release(r.section, &r.label) {
            let existing = corpus.release(id);
            if existing.date != r.date {
                return Err(StoreError::ReleaseConflict {
                    section: r.section,
                    label: r.label.clone(),
                    existing: existing.date,
                    requested: r.date,
                }
                .into());
            }
            continue;
        }
        if let Some(&(_, latest)) = corpus.section_releases(r.section).last() {
            let latest = corpus.release(latest);
            if r.date < latest.date {
                return Err(IngestError::DateRegression {
                    section: r.section,
                    label: r.label.clone(),
                    date: r.date,
                    latest_label: latest.label.clone(),
                    latest_date: latest.date,
                });
            }
        }
        if !row.path.is_file() {
            return Err(IngestError::MissingFile(row.path.clone()));
        }
        pending.push(row.clone());
    }
    pending.sort_by(|a, b| a.release.chronological_cmp(&b.release));
    Ok(pending)
}

#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    /// Release files parsed concurrently.
    pub workers: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()).min(8),
        }
    }
}

/// Ingests every new release listed in `rows`, committing each one to `store`
/// before the next is applied. Releases already present are reported as
/// skipped.
pub fn ingest(
    store: Option<&mut StoreFile>,
    corpus: &mut Corpus,
    rows: &[ManifestRow],
    segmenter: &Segmenter,
    options: IngestOptions,
) -> Result<Vec<ReleaseReport>, IngestError> {
    let pending = plan_ingest(corpus, rows)?;
    let mut store = store;
    let mut reports: Vec<ReleaseReport> = rows
        .iter()
        .filter(|row| !pending.iter().any(|p| p.release == row.release))
        .map(|row| skipped_report(&row.release))
        .collect();

    for batch in pending.chunks(options.workers.max(1)) {
        let parsed: Vec<Result<ParsedRelease, IngestError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .iter()
                .map(|row| scope.spawn(|| parse_release_file(&row.path, row.release.clone(), segmenter)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("parser thread panicked"))
                .collect()
        });
        for result in parsed {
            let report = apply_release(corpus, result?)?;
            if let Some(store) = store.as_deref_mut() {
                store.commit(corpus)?;
            }
            reports.push(report);
        }
    }
    corpus.compact();
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SP9: &str = "ID   A\nAC   P07658;\nCC   -!- FUNCTION: Binds zinc. Inactivated by cyanide.\n//\nID   B\nAC   Q00001;\n//\n";
    const SP10: &str = "ID   A\nAC   P07658; P07203;\nCC   -!- FUNCTION: Binds zinc. Binds zinc.\n//\n";

    fn write_fixture(dir: &Path) -> PathBuf {
        fs::write(dir.join("sp9.dat"), SP9).unwrap();
        fs::write(dir.join("sp10.dat"), SP10).unwrap();
        let manifest = dir.join("manifest.tsv");
        fs::write(
            &manifest,
            "section\tlabel\tdate\tpath\n# comment\nSwissProt\t10\t1989-01-01\tsp10.dat\nSwissProt\t9\t1988-11-01\tsp9.dat\n",
        )
        .unwrap();
        manifest
    }

    #[test]
    fn ingests_in_date_order_and_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_fixture(dir.path());
        let rows = read_manifest(&manifest).unwrap();
        let mut corpus = Corpus::new();
        let seg = Segmenter::default();
        let reports = ingest(None, &mut corpus, &rows, &seg, IngestOptions::default()).unwrap();
        let labels: Vec<&str> = reports.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, vec!["9", "10"]);
        assert_eq!((reports[0].entries, reports[0].annotated_entries, reports[0].sentences), (2, 1, 2));
        assert_eq!((reports[1].entries, reports[1].sentences, reports[1].new_sentences), (1, 1, 0));
        assert_eq!(corpus.occurrence_count(), 3);

        let again = ingest(None, &mut corpus, &rows, &seg, IngestOptions::default()).unwrap();
        assert!(again.iter().all(|r| r.skipped));
        assert_eq!(corpus.occurrence_count(), 3);
        assert!(ingest(None, &mut corpus, &[], &seg, IngestOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn rejects_regressions_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_fixture(dir.path());
        let rows = read_manifest(&manifest).unwrap();
        let mut corpus = Corpus::new();
        let seg = Segmenter::default();
        ingest(None, &mut corpus, &rows[..1], &seg, IngestOptions::default()).unwrap();
        assert!(matches!(
            ingest(None, &mut corpus, &rows[1..], &seg, IngestOptions::default()),
            Err(IngestError::DateRegression { .. })
        ));
        let missing = parse_manifest("TrEMBL\t1\t1996-11-01\tnope.dat\n", dir.path()).unwrap();
        assert!(matches!(
            ingest(None, &mut corpus, &missing, &seg, IngestOptions::default()),
            Err(IngestError::MissingFile(_))
        ));
    }

    #[test]
    fn manifest_errors_carry_line_numbers() {
        let err = parse_manifest("SwissProt\t9\t1988-11-01\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, IngestError::Manifest { line: 1, .. }));
        let err = parse_manifest("\nPIR\t9\t1988-11-01\tx\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, IngestError::Manifest { line: 2, .. }));
        let err = parse_manifest("SwissProt\t9\t1988-13-01\tx\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, IngestError::Manifest { line: 1, .. }));
    }

    #[test]
    fn committed_releases_survive_reload() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_fixture(dir.path());
        let rows = read_manifest(&manifest).unwrap();
        let store_path = dir.path().join("corpus.store");
        let (mut store, mut corpus) = StoreFile::open(&store_path).unwrap();
        ingest(Some(&mut store), &mut corpus, &rows, &Segmenter::default(), IngestOptions { workers: 2 }).unwrap();
        let reloaded = StoreFile::load(&store_path).unwrap();
        assert_eq!(reloaded.occurrence_count(), 3);
        assert_eq!(reloaded.cluster_of("P07203"), reloaded.cluster_of("P07658"));
    }
}
