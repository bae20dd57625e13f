//! The four propagation patterns, evaluated per sentence with set operations
//! over its occurrences.
//!
//! Presence and absence are judged on section-local timelines: a cluster seen
//! in Swiss-Prot is only ever "absent" at a registered Swiss-Prot release, so
//! the unsynchronised release calendars of the two sections never look like
//! removals.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::release::{Ordinal, Section};
use crate::store::{ClusterId, Corpus, Occurrence, SentenceId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    MissingOrigin,
    ReappearingEntry,
    TransientAppearance,
    OriginatingInTrembl,
}

impl PatternKind {
    pub const ALL: [PatternKind; 4] = [
        PatternKind::MissingOrigin,
        PatternKind::ReappearingEntry,
        PatternKind::TransientAppearance,
        PatternKind::OriginatingInTrembl,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PatternKind::MissingOrigin => "missing_origin",
            PatternKind::ReappearingEntry => "reappearing_entry",
            PatternKind::TransientAppearance => "transient_appearance",
            PatternKind::OriginatingInTrembl => "originating_in_trembl",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown pattern kind {0:?}")]
pub struct UnknownPattern(pub String);

impl FromStr for PatternKind {
    type Err = UnknownPattern;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "missing_origin" => Ok(PatternKind::MissingOrigin),
            "reappearing_entry" | "reappearing" => Ok(PatternKind::ReappearingEntry),
            "transient_appearance" | "transient" => Ok(PatternKind::TransientAppearance),
            "originating_in_trembl" | "trembl_origin" => Ok(PatternKind::OriginatingInTrembl),
            _ => Err(UnknownPattern(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Gap {
    pub cluster: ClusterId,
    /// Last release where the sentence was present before the gap.
    pub gap_start: Ordinal,
    /// Release where it is present again.
    pub gap_end: Ordinal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Appearance {
    pub cluster: ClusterId,
    pub ordinal: Ordinal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Evidence {
    MissingOrigin {
        first_set: Vec<ClusterId>,
        last_set: Vec<ClusterId>,
    },
    Reappearing {
        gaps: Vec<Gap>,
    },
    Transient {
        appearances: Vec<Appearance>,
    },
    TremblOrigin {
        first_trembl: Ordinal,
        first_swissprot: Ordinal,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternReport {
    pub kind: PatternKind,
    pub sentence_id: SentenceId,
    /// Clusters holding the sentence at its earliest release.
    pub origin_clusters: Vec<ClusterId>,
    pub evidence: Evidence,
}

/// Section layout of the registered releases, optionally cut off at a bound.
#[derive(Debug, Clone)]
pub struct ReleaseContext {
    /// Indexed by ordinal - 1.
    sections: Vec<Section>,
    /// Position of each release within its own section, indexed by ordinal - 1.
    positions: Vec<u32>,
    /// Ordinal of every section release within the bound, per section.
    section_ordinals: [Vec<Ordinal>; 2],
    bound: Ordinal,
}

impl ReleaseContext {
    /// `sections[i]` is the section of the release with ordinal `i + 1`.
    pub fn from_sections(sections: &[Section], bound: Option<Ordinal>) -> Self {
        let bound = bound
            .unwrap_or(Ordinal(sections.len() as u32))
            .min(Ordinal(sections.len() as u32));
        let mut positions = Vec::with_capacity(sections.len());
        let mut section_ordinals: [Vec<Ordinal>; 2] = [Vec::new(), Vec::new()];
        for (i, s) in sections.iter().enumerate() {
            let list = &mut section_ordinals[s.index()];
            positions.push(list.len() as u32);
            if (i as u32) < bound.0 {
                list.push(Ordinal(i as u32 + 1));
            }
        }
        ReleaseContext {
            sections: sections.to_vec(),
            positions,
            section_ordinals,
            bound,
        }
    }

    pub fn new(corpus: &Corpus, bound: Option<Ordinal>) -> Self {
        let sections: Vec<Section> = corpus.releases_chrono().map(|(_, _, r)| r.section).collect();
        Self::from_sections(&sections, bound)
    }

    pub fn bound(&self) -> Ordinal {
        self.bound
    }

    pub fn section_of(&self, ordinal: Ordinal) -> Section {
        self.sections[ordinal.0 as usize - 1]
    }

    fn position(&self, ordinal: Ordinal) -> u32 {
        self.positions[ordinal.0 as usize - 1]
    }

    /// Last release of each section within the bound.
    pub fn latest(&self) -> Vec<Ordinal> {
        self.section_ordinals
            .iter()
            .filter_map(|l| l.last().copied())
            .collect()
    }

    /// Newest release of `section` not after `ordinal`.
    pub fn section_release_at_or_before(&self, section: Section, ordinal: Ordinal) -> Option<Ordinal> {
        let list = &self.section_ordinals[section.index()];
        let n = list.partition_point(|o| *o <= ordinal);
        n.checked_sub(1).map(|i| list[i])
    }

    fn section_last(&self, section: Section) -> Option<Ordinal> {
        self.section_ordinals[section.index()].last().copied()
    }
}

/// Occurrences of one sentence within the bound, as (ordinal, cluster) sorted.
fn visible(ctx: &ReleaseContext, occ: &[Occurrence]) -> Vec<(Ordinal, ClusterId)> {
    let mut v: Vec<(Ordinal, ClusterId)> = occ
        .iter()
        .filter(|o| o.ordinal <= ctx.bound)
        .map(|o| (o.ordinal, o.cluster))
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn clusters_at(points: &[(Ordinal, ClusterId)], ordinal: Ordinal) -> Vec<ClusterId> {
    points
        .iter()
        .filter(|(o, _)| *o == ordinal)
        .map(|(_, c)| *c)
        .collect()
}

/// Positions of a (cluster, section) group, in order.
fn groups(ctx: &ReleaseContext, points: &[(Ordinal, ClusterId)]) -> Vec<((ClusterId, Section), Vec<Ordinal>)> {
    let mut keyed: Vec<((ClusterId, Section), Ordinal)> = points
        .iter()
        .map(|&(o, c)| ((c, ctx.section_of(o)), o))
        .collect();
    keyed.sort_unstable();
    let mut out: Vec<((ClusterId, Section), Vec<Ordinal>)> = Vec::new();
    for (key, o) in keyed {
        match out.last_mut() {
            Some((k, list)) if *k == key => list.push(o),
            _ => out.push((key, vec![o])),
        }
    }
    out
}

fn origins(points: &[(Ordinal, ClusterId)]) -> Vec<ClusterId> {
    points.first().map(|&(o, _)| clusters_at(points, o)).unwrap_or_default()
}

fn report(kind: PatternKind, sentence: SentenceId, points: &[(Ordinal, ClusterId)], evidence: Evidence) -> PatternReport {
    PatternReport {
        kind,
        sentence_id: sentence,
        origin_clusters: origins(points),
        evidence,
    }
}

pub fn detect_missing_origin(ctx: &ReleaseContext, sentence: SentenceId, occ: &[Occurrence]) -> Option<PatternReport> {
    missing_origin(ctx, sentence, &visible(ctx, occ))
}

/// The first set is the clusters at the sentence's earliest release. The last
/// set is taken at its latest release, together with the holders at the newest
/// release of the other section up to then, so that a sentence still present
/// in a section whose calendar simply lags is not mistaken for removed.
fn missing_origin(ctx: &ReleaseContext, sentence: SentenceId, points: &[(Ordinal, ClusterId)]) -> Option<PatternReport> {
    let (first, last) = (points.first()?.0, points.last()?.0);
    if last <= first {
        return None;
    }
    let f: BTreeSet<ClusterId> = clusters_at(points, first).into_iter().collect();
    let mut l: BTreeSet<ClusterId> = BTreeSet::new();
    for section in Section::ALL {
        if let Some(o) = ctx.section_release_at_or_before(section, last) {
            l.extend(clusters_at(points, o));
        }
    }
    if !f.is_disjoint(&l) {
        return None;
    }
    Some(report(
        PatternKind::MissingOrigin,
        sentence,
        points,
        Evidence::MissingOrigin {
            first_set: f.into_iter().collect(),
            last_set: l.into_iter().collect(),
        },
    ))
}

pub fn detect_reappearing(ctx: &ReleaseContext, sentence: SentenceId, occ: &[Occurrence]) -> Option<PatternReport> {
    reappearing(ctx, sentence, &visible(ctx, occ))
}

fn reappearing(ctx: &ReleaseContext, sentence: SentenceId, points: &[(Ordinal, ClusterId)]) -> Option<PatternReport> {
    let mut gaps = Vec::new();
    for ((cluster, _), ordinals) in groups(ctx, points) {
        for pair in ordinals.windows(2) {
            if ctx.position(pair[1]) > ctx.position(pair[0]) + 1 {
                gaps.push(Gap {
                    cluster,
                    gap_start: pair[0],
                    gap_end: pair[1],
                });
            }
        }
    }
    if gaps.is_empty() {
        return None;
    }
    gaps.sort_unstable();
    Some(report(PatternKind::ReappearingEntry, sentence, points, Evidence::Reappearing { gaps }))
}

pub fn detect_transient(ctx: &ReleaseContext, sentence: SentenceId, occ: &[Occurrence]) -> Option<PatternReport> {
    transient(ctx, sentence, &visible(ctx, occ))
}

fn transient(ctx: &ReleaseContext, sentence: SentenceId, points: &[(Ordinal, ClusterId)]) -> Option<PatternReport> {
    let mut appearances = Vec::new();
    for ((cluster, section), ordinals) in groups(ctx, points) {
        // a sentence at the section's newest release may still persist, so it is never flagged
        if ordinals.len() == 1 && Some(ordinals[0]) != ctx.section_last(section) {
            appearances.push(Appearance {
                cluster,
                ordinal: ordinals[0],
            });
        }
    }
    if appearances.is_empty() {
        return None;
    }
    appearances.sort_unstable_by_key(|a| (a.ordinal, a.cluster));
    Some(report(
        PatternKind::TransientAppearance,
        sentence,
        points,
        Evidence::Transient { appearances },
    ))
}

pub fn detect_trembl_origin(ctx: &ReleaseContext, sentence: SentenceId, occ: &[Occurrence]) -> Option<PatternReport> {
    trembl_origin(ctx, sentence, &visible(ctx, occ))
}

fn trembl_origin(ctx: &ReleaseContext, sentence: SentenceId, points: &[(Ordinal, ClusterId)]) -> Option<PatternReport> {
    let first = points.first()?.0;
    if ctx.section_of(first) != Section::TrEMBL {
        return None;
    }
    let first_sp = points
        .iter()
        .map(|(o, _)| *o)
        .find(|o| ctx.section_of(*o) == Section::SwissProt)?;
    Some(report(
        PatternKind::OriginatingInTrembl,
        sentence,
        points,
        Evidence::TremblOrigin {
            first_trembl: first,
            first_swissprot: first_sp,
        },
    ))
}

/// Every pattern the sentence shows, in [`PatternKind::ALL`] order.
pub fn detect_all(ctx: &ReleaseContext, sentence: SentenceId, occ: &[Occurrence]) -> Vec<PatternReport> {
    let points = visible(ctx, occ);
    [
        missing_origin(ctx, sentence, &points),
        reappearing(ctx, sentence, &points),
        transient(ctx, sentence, &points),
        trembl_origin(ctx, sentence, &points),
    ]
    .into_iter()
    .flatten()
    .collect()
}

/// Pattern counts over all sentences and over those present at the latest
/// release of either section.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternSummary {
    /// Sentences with at least one occurrence within the bound.
    pub sentences: u64,
    pub sentences_latest: u64,
    /// Indexed by [`PatternKind::index`].
    pub all: [u64; 4],
    pub latest: [u64; 4],
}

impl PatternSummary {
    pub fn count(&self, kind: PatternKind) -> u64 {
        self.all[kind.index()]
    }

    pub fn count_latest(&self, kind: PatternKind) -> u64 {
        self.latest[kind.index()]
    }

    pub fn merge(&mut self, other: &PatternSummary) {
        self.sentences += other.sentences;
        self.sentences_latest += other.sentences_latest;
        for i in 0..4 {
            self.all[i] += other.all[i];
            self.latest[i] += other.latest[i];
        }
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "pattern\tall_versions\tlatest_version")?;
        for kind in PatternKind::ALL {
            writeln!(out, "{}\t{}\t{}", kind, self.count(kind), self.count_latest(kind))?;
        }
        writeln!(out, "unique_sentences\t{}\t{}", self.sentences, self.sentences_latest)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScanError {
    #[error("no release labelled {0:?}")]
    UnknownLabel(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanFilter {
    /// Treat the release(s) with this label as the newest; later releases are ignored.
    pub latest_label: Option<String>,
}

impl ScanFilter {
    pub fn context(&self, corpus: &Corpus) -> Result<ReleaseContext, ScanError> {
        let bound = match &self.latest_label {
            None => None,
            Some(label) => {
                let ids = corpus.releases_labelled(label);
                if ids.is_empty() {
                    return Err(ScanError::UnknownLabel(label.clone()));
                }
                ids.into_iter().map(|id| corpus.ordinal(id)).max()
            }
        };
        Ok(ReleaseContext::new(corpus, bound))
    }
}

/// Runs every detector over every sentence in id order, handing each report
/// to `sink` as it is found.
pub fn scan_corpus<F>(corpus: &Corpus, filter: &ScanFilter, mut sink: F) -> Result<PatternSummary, ScanError>
where
    F: FnMut(&PatternReport) -> io::Result<()>,
{
    let ctx = filter.context(corpus)?;
    let latest = ctx.latest();
    let mut summary = PatternSummary::default();
    for sid in corpus.sentence_ids() {
        let occ = corpus
            .occurrences(sid)
            .map_err(|e| io::Error::other(e.to_string()))?;
        let in_bound = occ.iter().any(|o| o.ordinal <= ctx.bound());
        if !in_bound {
            continue;
        }
        let at_latest = occ.iter().any(|o| latest.contains(&o.ordinal));
        summary.sentences += 1;
        summary.sentences_latest += at_latest as u64;
        for r in detect_all(&ctx, sid, &occ) {
            summary.all[r.kind.index()] += 1;
            if at_latest {
                summary.latest[r.kind.index()] += 1;
            }
            sink(&r)?;
        }
    }
    Ok(summary)
}
