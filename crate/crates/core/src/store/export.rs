//! Tab-separated export of the corpus, and import of the same bundle.
//!
//! `occurrences.tsv` is the diffable occurrence relation
//! (`sentence_id`, `cluster_id`, `section`, `release_label`), sorted
//! numerically by sentence, cluster and release date. The other files carry
//! what is needed to rebuild an identical store.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::{Corpus, Occurrence, ReleaseId, StoreError};
use crate::release::{Release, Section};

pub const RELEASES_FILE: &str = "releases.tsv";
pub const ACCESSIONS_FILE: &str = "accessions.tsv";
pub const SENTENCES_FILE: &str = "sentences.tsv";
pub const ENTRIES_FILE: &str = "entries.tsv";
pub const OCCURRENCES_FILE: &str = "occurrences.tsv";

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("{file}:{line}: {reason}")]
    Parse {
        file: &'static str,
        line: usize,
        reason: String,
    },
    #[error("import target must be an empty corpus")]
    NotEmpty,
    #[error("rebuilt occurrence relation differs from {OCCURRENCES_FILE}")]
    Mismatch,
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Writes the sorted occurrence relation.
pub fn write_occurrence_tsv<W: Write>(corpus: &Corpus, out: W) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    for sid in corpus.sentence_ids() {
        let mut occ: Vec<Occurrence> = corpus
            .occurrences(sid)
            .map_err(|e| io::Error::other(e.to_string()))?;
        occ.sort_unstable_by_key(|o| (o.cluster, o.ordinal));
        for o in occ {
            let release = corpus.release(o.release);
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                sid.0, o.cluster.0, release.section, release.label
            )?;
        }
    }
    out.flush()
}

/// Writes the full bundle into `dir` (created if missing).
pub fn export_bundle(corpus: &Corpus, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;

    let mut w = BufWriter::new(File::create(dir.join(RELEASES_FILE))?);
    for (ord, _, r) in corpus.releases_chrono() {
        writeln!(w, "{}\t{}\t{}\t{}", ord, r.section, r.label, r.date)?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(dir.join(ACCESSIONS_FILE))?);
    for node in 0..corpus.accession_count() as u32 {
        writeln!(w, "{}\t{}", node, corpus.accession(node).unwrap_or_default())?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(dir.join(SENTENCES_FILE))?);
    for sid in corpus.sentence_ids() {
        writeln!(w, "{}\t{}", sid.0, corpus.sentence_text(sid).unwrap_or_default())?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(dir.join(ENTRIES_FILE))?);
    for (_, rid, r) in corpus.releases_chrono() {
        for row in corpus.entries(rid) {
            let nodes: Vec<String> = row.nodes.iter().map(u32::to_string).collect();
            let sentences: Vec<String> = row
                .sentences
                .iter()
                .map(|(s, m)| format!("{s}:{m}"))
                .collect();
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                r.section,
                r.label,
                nodes.join(";"),
                sentences.join(",")
            )?;
        }
    }
    w.flush()?;

    write_occurrence_tsv(corpus, File::create(dir.join(OCCURRENCES_FILE))?)
}

fn lines(dir: &Path, file: &'static str) -> Result<Vec<(usize, String)>, BundleError> {
    let reader = BufReader::new(File::open(dir.join(file))?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if !line.is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

fn parse_err(file: &'static str, line: usize, reason: impl Into<String>) -> BundleError {
    BundleError::Parse {
        file,
        line,
        reason: reason.into(),
    }
}

fn fields<'a>(
    file: &'static str,
    line_no: usize,
    line: &'a str,
    n: usize,
) -> Result<Vec<&'a str>, BundleError> {
    let parts: Vec<&str> = line.split('\t').collect();
    if parts.len() != n {
        return Err(parse_err(file, line_no, format!("expected {n} fields, got {}", parts.len())));
    }
    Ok(parts)
}

fn num<T: std::str::FromStr>(file: &'static str, line: usize, s: &str) -> Result<T, BundleError> {
    s.parse()
        .map_err(|_| parse_err(file, line, format!("not a number: {s:?}")))
}

/// Rebuilds a bundle written by [`export_bundle`] into an empty corpus, then
/// checks the rebuilt occurrence relation against the exported one.
pub fn import_bundle(dir: &Path, corpus: &mut Corpus) -> Result<(), BundleError> {
    if corpus.release_count() != 0 || corpus.accession_count() != 0 || corpus.sentence_count() != 0 {
        return Err(BundleError::NotEmpty);
    }

    for (n, line) in lines(dir, RELEASES_FILE)? {
        let f = fields(RELEASES_FILE, n, &line, 4)?;
        let section: Section = f[1]
            .parse()
            .map_err(|e: crate::release::UnknownSection| parse_err(RELEASES_FILE, n, e.to_string()))?;
        let date: NaiveDate = f[3]
            .parse()
            .map_err(|_| parse_err(RELEASES_FILE, n, format!("bad date {:?}", f[3])))?;
        corpus.register_release(Release::new(section, f[2], date))?;
    }

    for (n, line) in lines(dir, ACCESSIONS_FILE)? {
        let f = fields(ACCESSIONS_FILE, n, &line, 2)?;
        let node: u32 = num(ACCESSIONS_FILE, n, f[0])?;
        if corpus.intern_accession(f[1]) != node {
            return Err(parse_err(ACCESSIONS_FILE, n, "accessions out of order"));
        }
    }

    for (n, line) in lines(dir, SENTENCES_FILE)? {
        let f = fields(SENTENCES_FILE, n, &line, 2)?;
        let id: u32 = num(SENTENCES_FILE, n, f[0])?;
        if corpus.intern_sentence(f[1])? != id {
            return Err(parse_err(SENTENCES_FILE, n, "sentences out of order"));
        }
    }

    for (n, line) in lines(dir, ENTRIES_FILE)? {
        let f = fields(ENTRIES_FILE, n, &line, 4)?;
        let section: Section = f[0]
            .parse()
            .map_err(|e: crate::release::UnknownSection| parse_err(ENTRIES_FILE, n, e.to_string()))?;
        let rid: ReleaseId = corpus
            .find_release(section, f[1])
            .ok_or_else(|| parse_err(ENTRIES_FILE, n, format!("unknown release {}", f[1])))?;
        let nodes = f[2]
            .split(';')
            .map(|s| num::<u32>(ENTRIES_FILE, n, s))
            .collect::<Result<Vec<_>, _>>()?;
        if nodes.iter().any(|&x| x as usize >= corpus.accession_count()) {
            return Err(parse_err(ENTRIES_FILE, n, "unknown accession node"));
        }
        let first = nodes[0];
        corpus.upsert_nodes(rid, nodes)?;
        if f[3].is_empty() {
            continue;
        }
        for pair in f[3].split(',') {
            let (s, m) = pair
                .split_once(':')
                .ok_or_else(|| parse_err(ENTRIES_FILE, n, format!("bad sentence ref {pair:?}")))?;
            let s: u32 = num(ENTRIES_FILE, n, s)?;
            let m: u32 = num(ENTRIES_FILE, n, m)?;
            if s as usize >= corpus.sentence_count() {
                return Err(parse_err(ENTRIES_FILE, n, format!("unknown sentence {s}")));
            }
            corpus.attach(s, first, rid.0, m);
        }
    }
    corpus.compact();

    let mut rebuilt = Vec::new();
    write_occurrence_tsv(corpus, &mut rebuilt)?;
    let original = fs::read(dir.join(OCCURRENCES_FILE))?;
    if rebuilt != original {
        return Err(BundleError::Mismatch);
    }
    Ok(())
}
