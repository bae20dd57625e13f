//! Streaming reader for line-coded flat-file releases.
//!
//! A release file is a sequence of entries, each a group of lines terminated
//! by `//`. Every other line starts with a two-letter line code (`ID`, `AC`,
//! `CC`, ...) followed by spaces; sequence data lines after `SQ` start with
//! blanks. Only the accession (`AC`) and comment (`CC`) lines are kept.
//!
//! Problems never abort a parse: they are reported as [`Diagnostic`]s, the
//! offending line (or truncated final entry) is dropped and reading goes on.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;
use std::sync::Arc;

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use crate::release::Release;

/// One entry of a release: its accessions (primary first) and cleaned comment text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEntry {
    pub accessions: Vec<String>,
    pub comment_text: String,
    pub release: Arc<Release>,
    /// Line number of the entry's first line.
    pub line_no: u64,
}

impl RawEntry {
    pub fn primary_accession(&self) -> &str {
        &self.accessions[0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagnosticReason {
    MalformedLine { text: String },
    InvalidAccession { accession: String },
    MissingAccession,
    TruncatedEntry,
    /// A delimited copyright/licence banner was dropped from the comment text.
    RemovedBanner { lines: usize },
    /// A banner delimiter was never closed; its lines were kept as text.
    UnterminatedBanner,
}

impl fmt::Display for DiagnosticReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnosticReason::MalformedLine { text } => {
                write!(f, "malformed line skipped: {text:?}")
            }
            DiagnosticReason::InvalidAccession { accession } => {
                write!(f, "invalid accession skipped: {accession:?}")
            }
            DiagnosticReason::MissingAccession => f.write_str("entry without accession dropped"),
            DiagnosticReason::TruncatedEntry => {
                f.write_str("end of input before `//`, partial entry dropped")
            }
            DiagnosticReason::RemovedBanner { lines } => {
                write!(f, "removed {lines}-line comment banner")
            }
            DiagnosticReason::UnterminatedBanner => {
                f.write_str("unterminated comment banner kept as text")
            }
        }
    }
}

/// A parse diagnostic, serialized as one log record per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub release_label: String,
    pub line_no: u64,
    pub reason: DiagnosticReason,
}

impl Diagnostic {
    /// Removals are expected and audited; everything else is a problem with the input.
    pub fn is_removal(&self) -> bool {
        matches!(self.reason, DiagnosticReason::RemovedBanner { .. })
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.release_label, self.line_no, self.reason)
    }
}

/// `[A-Z][A-Z0-9]{5,9}`
pub fn is_valid_accession(acc: &str) -> bool {
    let bytes = acc.as_bytes();
    (6..=10).contains(&bytes.len())
        && bytes[0].is_ascii_uppercase()
        && bytes[1..]
            .iter()
            .all(|b| b.is_ascii_uppercase() || b.is_ascii_digit())
}

/// Decodes one raw line: UTF-8 when valid, otherwise byte-wise Latin-1.
fn decode_line(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_owned(),
        Err(_) => bytes.iter().map(|&b| b as char).collect(),
    }
}

/// Opens a release file, transparently decompressing gzip input (detected by
/// magic bytes rather than by file extension).
pub fn open_release_file(path: &Path) -> io::Result<Box<dyn BufRead + Send>> {
    let mut file = BufReader::with_capacity(1 << 16, File::open(path)?);
    let is_gzip = file.fill_buf()?.starts_with(&[0x1f, 0x8b]);
    if is_gzip {
        Ok(Box::new(BufReader::with_capacity(
            1 << 16,
            MultiGzDecoder::new(file),
        )))
    } else {
        Ok(Box::new(file))
    }
}

/// Wraps any reader the same way [`open_release_file`] does.
pub fn maybe_gunzip<R: Read + Send + 'static>(reader: R) -> io::Result<Box<dyn BufRead + Send>> {
    let mut buffered = BufReader::new(reader);
    if buffered.fill_buf()?.starts_with(&[0x1f, 0x8b]) {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(buffered))))
    } else {
        Ok(Box::new(buffered))
    }
}

/// Streams the entries of one release.
pub fn parse_release<R: BufRead>(reader: R, release: Arc<Release>) -> EntryReader<R> {
    EntryReader {
        reader,
        release,
        line_no: 0,
        buf: Vec::with_capacity(128),
        diagnostics: Vec::new(),
        finished: false,
    }
}

/// Iterator over the entries of a release; see [`parse_release`].
pub struct EntryReader<R> {
    reader: R,
    release: Arc<Release>,
    line_no: u64,
    buf: Vec<u8>,
    diagnostics: Vec<Diagnostic>,
    finished: bool,
}

#[derive(Default)]
struct PendingEntry {
    first_line: u64,
    accessions: Vec<String>,
    cc_lines: Vec<(u64, String)>,
    in_sequence: bool,
    seen_any: bool,
}

enum LineKind<'a> {
    Terminator,
    Coded(&'a str, &'a str),
    Continuation,
    Blank,
    Malformed,
}

fn classify(line: &str) -> LineKind<'_> {
    if line.starts_with("//") && line[2..].trim().is_empty() {
        return LineKind::Terminator;
    }
    if line.trim().is_empty() {
        return LineKind::Blank;
    }
    let bytes = line.as_bytes();
    if bytes[0] == b' ' || bytes[0] == b'\t' {
        return LineKind::Continuation;
    }
    if bytes.len() >= 2
        && bytes[0].is_ascii_uppercase()
        && (bytes[1].is_ascii_uppercase() || bytes[1].is_ascii_digit())
        && (bytes.len() == 2 || bytes[2] == b' ')
    {
        return LineKind::Coded(&line[..2], &line[2..]);
    }
    LineKind::Malformed
}

impl<R: BufRead> EntryReader<R> {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    pub fn take_diagnostics(&mut self) -> Vec<Diagnostic> {
        std::mem::take(&mut self.diagnostics)
    }

    pub fn release(&self) -> &Arc<Release> {
        &self.release
    }

    fn diagnose(&mut self, line_no: u64, reason: DiagnosticReason) {
        self.diagnostics.push(Diagnostic {
            release_label: self.release.label.clone(),
            line_no,
            reason,
        });
    }

    fn read_line(&mut self) -> io::Result<Option<String>> {
        self.buf.clear();
        if self.reader.read_until(b'\n', &mut self.buf)? == 0 {
            return Ok(None);
        }
        self.line_no += 1;
        while matches!(self.buf.last(), Some(b'\n' | b'\r')) {
            self.buf.pop();
        }
        Ok(Some(decode_line(&self.buf)))
    }

    fn finish_entry(&mut self, pending: PendingEntry) -> Option<RawEntry> {
        if pending.accessions.is_empty() {
            self.diagnose(pending.first_line, DiagnosticReason::MissingAccession);
            return None;
        }
        let (line_numbers, lines): (Vec<u64>, Vec<String>) = pending.cc_lines.into_iter().unzip();
        let cleaned = clean_comment_lines_audited(&lines);
        for removal in cleaned.removals {
            let line_no = line_numbers.get(removal.first_line).copied().unwrap_or(0);
            let reason = match removal.kind {
                RemovalKind::Banner => DiagnosticReason::RemovedBanner {
                    lines: removal.line_count,
                },
                RemovalKind::UnterminatedBanner => DiagnosticReason::UnterminatedBanner,
            };
            self.diagnose(line_no, reason);
        }
        Some(RawEntry {
            accessions: pending.accessions,
            comment_text: cleaned.text,
            release: Arc::clone(&self.release),
            line_no: pending.first_line,
        })
    }

    fn next_entry(&mut self) -> io::Result<Option<RawEntry>> {
        let mut pending = PendingEntry::default();
        loop {
            let Some(line) = self.read_line()? else {
                if pending.seen_any {
                    self.diagnose(pending.first_line, DiagnosticReason::TruncatedEntry);
                }
                return Ok(None);
            };
            let line_no = self.line_no;
            if !pending.seen_any {
                pending.first_line = line_no;
            }
            match classify(&line) {
                LineKind::Terminator => {
                    if let Some(entry) = self.finish_entry(std::mem::take(&mut pending)) {
                        return Ok(Some(entry));
                    }
                    continue;
                }
                LineKind::Coded(code, rest) => {
                    pending.seen_any = true;
                    pending.in_sequence = code == "SQ";
                    match code {
                        "AC" => {
                            for acc in rest.split(';') {
                                let acc = acc.trim();
                                if acc.is_empty() {
                                    continue;
                                }
                                if is_valid_accession(acc) {
                                    pending.accessions.push(acc.to_owned());
                                } else {
                                    self.diagnose(
                                        line_no,
                                        DiagnosticReason::InvalidAccession {
                                            accession: acc.to_owned(),
                                        },
                                    );
                                }
                            }
                        }
                        "CC" => pending.cc_lines.push((line_no, line)),
                        _ => {}
                    }
                }
                LineKind::Continuation if pending.in_sequence => {}
                LineKind::Continuation | LineKind::Blank | LineKind::Malformed => {
                    self.diagnose(line_no, DiagnosticReason::MalformedLine { text: line });
                }
            }
        }
    }
}

impl<R: BufRead> Iterator for EntryReader<R> {
    type Item = io::Result<RawEntry>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        match self.next_entry() {
            Ok(Some(entry)) => Some(Ok(entry)),
            Ok(None) => {
                self.finished = true;
                None
            }
            Err(e) => {
                self.finished = true;
                Some(Err(e))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemovalKind {
    Banner,
    UnterminatedBanner,
}

/// A run of comment lines that did not make it into the cleaned text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Removal {
    /// Index into the input line slice.
    pub first_line: usize,
    pub line_count: usize,
    pub kind: RemovalKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CleanedComment {
    pub text: String,
    pub removals: Vec<Removal>,
}

/// Strips `CC` codes, topic headings and copyright banners from comment lines.
///
/// Topic blocks (each `-!-` heading starts one) are separated by a newline in
/// the output; continuation lines inside a block are joined with single spaces.
pub fn clean_comment_lines<S: AsRef<str>>(cc_lines: &[S]) -> String {
    clean_comment_lines_audited(cc_lines).text
}

/// [`clean_comment_lines`], also reporting which lines were dropped.
pub fn clean_comment_lines_audited<S: AsRef<str>>(cc_lines: &[S]) -> CleanedComment {
    let mut blocks: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut removals = Vec::new();
    // (index of opening delimiter, buffered content lines)
    let mut banner: Option<(usize, Vec<&str>)> = None;

    fn flush(blocks: &mut Vec<String>, current: &mut String) {
        if !current.is_empty() {
            blocks.push(std::mem::take(current));
        }
    }
    fn append(current: &mut String, text: &str) {
        if text.is_empty() {
            return;
        }
        if !current.is_empty() {
            current.push(' ');
        }
        current.push_str(text);
    }

    for (idx, raw) in cc_lines.iter().enumerate() {
        let content = strip_line_code(raw.as_ref());
        if is_banner_delimiter(content) {
            match banner.take() {
                Some((start, _)) => removals.push(Removal {
                    first_line: start,
                    line_count: idx - start + 1,
                    kind: RemovalKind::Banner,
                }),
                None => {
                    flush(&mut blocks, &mut current);
                    banner = Some((idx, Vec::new()));
                }
            }
            continue;
        }
        if let Some((_, buffered)) = banner.as_mut() {
            buffered.push(content);
            continue;
        }
        if let Some(rest) = content.strip_prefix("-!-") {
            flush(&mut blocks, &mut current);
            match strip_topic_heading(rest.trim_start()) {
                Some(body) => append(&mut current, body),
                None => append(&mut current, content),
            }
        } else {
            append(&mut current, content);
        }
    }

    if let Some((start, buffered)) = banner {
        // Never lose words to a banner that was not closed.
        removals.push(Removal {
            first_line: start,
            line_count: 1,
            kind: RemovalKind::UnterminatedBanner,
        });
        for content in buffered {
            if content.starts_with("-!-") {
                flush(&mut blocks, &mut current);
            }
            append(&mut current, content);
        }
    }
    flush(&mut blocks, &mut current);

    CleanedComment {
        text: blocks.join("\n"),
        removals,
    }
}

fn strip_line_code(line: &str) -> &str {
    line.strip_prefix("CC").unwrap_or(line).trim()
}

/// A line opening or closing a removable banner starts with at least ten dashes.
fn is_banner_delimiter(content: &str) -> bool {
    content.bytes().take_while(|&b| b == b'-').count() >= 10
}

/// Recognizes `KEYWORD[ KEYWORD...]:` where keywords are upper-case, and
/// returns the text after the colon.
fn strip_topic_heading(rest: &str) -> Option<&str> {
    let colon = rest.find(':')?;
    let heading = &rest[..colon];
    let valid = !heading.is_empty()
        && heading.split(' ').all(|word| {
            let mut chars = word.chars();
            matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
                && chars.all(|c| {
                    c.is_ascii_uppercase() || c.is_ascii_digit() || matches!(c, '_' | '-' | '/')
                })
        });
    valid.then(|| rest[colon + 1..].trim_start())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    use crate::release::Section;

    fn release() -> Arc<Release> {
        Arc::new(Release::new(
            Section::SwissProt,
            "9",
            NaiveDate::from_ymd_opt(1988, 11, 1).unwrap(),
        ))
    }

    fn parse_str(input: &str) -> (Vec<RawEntry>, Vec<Diagnostic>) {
        let mut reader = parse_release(input.as_bytes(), release());
        let entries = reader.by_ref().collect::<io::Result<Vec<_>>>().unwrap();
        (entries, reader.take_diagnostics())
    }

    #[test]
    fn accession_grammar() {
        assert!(is_valid_accession("P07203"));
        assert!(is_valid_accession("A0A023GPI8"));
        assert!(!is_valid_accession("p07203"));
        assert!(!is_valid_accession("P0720"));
        assert!(!is_valid_accession("P07203X12345"));
        assert!(!is_valid_accession("P07-03"));
    }

    #[test]
    fn selenocysteine_entry() {
        let input = "\
ID   GSHC_HUMAN     STANDARD;      PRT;   201 AA.
AC   P07203;
DE   GLUTATHIONE PEROXIDASE (EC 1.11.1.9).
CC   -!- FUNCTION: PROTECTS THE HEMOGLOBIN IN ERYTHROCYTES AGAINST
CC       OXIDATIVE BREAKDOWN.
CC   -!- The active-site selenocysteine is encoded by the opal codon, UGA.
SQ   SEQUENCE   201 AA;  22088 MW;  1063 CN;
     MCAARLAAAA AAAQSVYAFS ARPLAGGEPV SLGSLRGKVL LIENVASLUG TTVRDYTQMN
//
";
        let (entries, diags) = parse_str(input);
        assert!(diags.is_empty(), "{diags:?}");
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].accessions, vec!["P07203"]);
        assert!(entries[0]
            .comment_text
            .contains("The active-site selenocysteine is encoded by the opal codon, UGA."));
    }

    #[test]
    fn entry_without_comments_is_still_emitted() {
        let (entries, _) = parse_str("ID   X\nAC   Q00001;\nSQ   SEQUENCE\n     MKV\n//\n");
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].accessions, vec!["Q00001"]);
        assert_eq!(entries[0].comment_text, "");
    }

    #[test]
    fn multiple_accession_lines_accumulate_in_order() {
        let (entries, _) = parse_str("AC   P22352; O43787;\nAC   Q86W78;\n//\n");
        assert_eq!(entries[0].accessions, vec!["P22352", "O43787", "Q86W78"]);
        assert_eq!(entries[0].primary_accession(), "P22352");
    }

    #[test]
    fn malformed_lines_are_diagnosed_and_skipped() {
        let (entries, diags) = parse_str("AC   P07203;\ngarbage here\nCC   Binds zinc.\n//\n");
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].comment_text, "Binds zinc.");
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].line_no, 2);
        assert!(matches!(diags[0].reason, DiagnosticReason::MalformedLine { .. }));
    }

    #[test]
    fn truncated_final_entry_is_dropped() {
        let (entries, diags) = parse_str("AC   P07203;\n//\nAC   P07658;\nCC   Binds zinc.\n");
        assert_eq!(entries.len(), 1);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].reason, DiagnosticReason::TruncatedEntry);
        assert_eq!(diags[0].line_no, 3);
    }

    #[test]
    fn invalid_accessions_are_reported() {
        let (entries, diags) = parse_str("AC   P07203; bad;\n//\nAC   nope;\n//\n");
        assert_eq!(entries.len(), 1);
        assert_eq!(diags.len(), 3);
        assert_eq!(diags[2].reason, DiagnosticReason::MissingAccession);
    }

    #[test]
    fn latin1_bytes_decode_losslessly() {
        let mut input = b"AC   P07203;\nCC   Found in ".to_vec();
        input.push(0xE9); // e-acute in Latin-1, invalid as UTF-8 here
        input.extend_from_slice(b"toile cells.\n//\n");
        let mut reader = parse_release(&input[..], release());
        let entry = reader.next().unwrap().unwrap();
        assert_eq!(entry.comment_text, "Found in \u{e9}toile cells.");
    }

    #[test]
    fn crlf_line_endings() {
        let (entries, diags) = parse_str("AC   P07203;\r\nCC   Binds zinc.\r\n//\r\n");
        assert!(diags.is_empty());
        assert_eq!(entries[0].comment_text, "Binds zinc.");
    }

    #[test]
    fn heading_is_stripped_and_continuation_joined() {
        let lines = [
            "CC   -!- FUNCTION: May have an essential function in",
            "CC       lipopolysaccharides biosynthesis.",
        ];
        assert_eq!(
            clean_comment_lines(&lines),
            "May have an essential function in lipopolysaccharides biosynthesis."
        );
    }

    #[test]
    fn pure_banner_is_removed() {
        let lines = [
            "CC   ---------- copyright banner ----------",
            "CC   Distributed under ...",
            "CC   ----------",
        ];
        let cleaned = clean_comment_lines_audited(&lines);
        assert_eq!(cleaned.text, "");
        assert_eq!(
            cleaned.removals,
            vec![Removal {
                first_line: 0,
                line_count: 3,
                kind: RemovalKind::Banner
            }]
        );
    }

    #[test]
    fn two_topics_and_a_banner() {
        let lines = [
            "CC   -!- FUNCTION: Protects the hemoglobin in erythrocytes against",
            "CC       oxidative breakdown.",
            "CC   -!- SUBCELLULAR LOCATION: Cytoplasm",
            "CC   -----------------------------------------------------------------------",
            "CC   Copyrighted by the UniProt Consortium, see http://www.uniprot.org/terms",
            "CC   Distributed under the Creative Commons Attribution-NoDerivs License",
            "CC   -----------------------------------------------------------------------",
        ];
        assert_eq!(
            clean_comment_lines(&lines),
            "Protects the hemoglobin in erythrocytes against oxidative breakdown.\nCytoplasm"
        );
    }

    #[test]
    fn unrecognized_decoration_passes_through() {
        let lines = ["CC   -!- note that this is lower case: keep", "CC   -!- "];
        assert_eq!(
            clean_comment_lines(&lines),
            "-!- note that this is lower case: keep\n-!-"
        );
    }

    #[test]
    fn unterminated_banner_keeps_its_words() {
        let lines = ["CC   -!- PTM: Glycosylated.", "CC   ------------", "CC   Some note."];
        let cleaned = clean_comment_lines_audited(&lines);
        assert_eq!(cleaned.text, "Glycosylated.\nSome note.");
        assert_eq!(cleaned.removals[0].kind, RemovalKind::UnterminatedBanner);
    }

    #[test]
    fn multiword_and_punctuated_headings() {
        assert_eq!(strip_topic_heading("CATALYTIC ACTIVITY: 2 x"), Some("2 x"));
        assert_eq!(strip_topic_heading("MASS SPECTROMETRY: Mass=1"), Some("Mass=1"));
        assert_eq!(strip_topic_heading("Function: no"), None);
        assert_eq!(strip_topic_heading("no colon here"), None);
    }
}
