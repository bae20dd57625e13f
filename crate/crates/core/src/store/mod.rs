//! The versioned occurrence corpus.
//!
//! Four relations are kept: releases, interned sentences, accession clusters
//! and entry rows (one per entry per release, holding that entry's sentences).
//! A per-sentence posting index over the entry rows answers timeline queries.
//!
//! Entry identity across releases is the accession cluster, applied
//! retroactively: once two accessions are listed together, every past and
//! future occurrence under either of them belongs to the same cluster.

mod export;
mod file;
mod unionfind;

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::release::{Ordinal, Release, Section};
use crate::segment::is_canonical;
use unionfind::AccessionSets;

pub use export::{
    export_bundle, import_bundle, write_occurrence_tsv, BundleError, ACCESSIONS_FILE, ENTRIES_FILE, OCCURRENCES_FILE,
    RELEASES_FILE, SENTENCES_FILE,
};
pub use file::{StoreFile, StoreLock, LockMode, FORMAT_VERSION, MAGIC};

/// Handle of a registered release. Ordinals can shift when an earlier-dated
/// release is registered later; handles never do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReleaseId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SentenceId(pub u32);

/// A merge-aware entry identity: the smallest accession node of the cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub u32);

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("release {section} {label} already registered with date {existing}, not {requested}")]
    ReleaseConflict {
        section: Section,
        label: String,
        existing: chrono::NaiveDate,
        requested: chrono::NaiveDate,
    },
    #[error("unknown release {0:?}")]
    UnknownRelease(String),
    #[error("entry has no accessions")]
    EmptyAccessions,
    #[error("sentence text is not canonical: {0:?}")]
    NonCanonical(String),
    #[error("unknown sentence id {0}")]
    UnknownSentence(u32),
    #[error("unknown cluster id {0}")]
    UnknownCluster(u32),
    #[error("store file {path}: {reason}")]
    Format { path: String, reason: String },
    #[error("store is locked by another process: {0}")]
    Locked(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One logical occurrence: sentence in cluster at release.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Occurrence {
    pub ordinal: Ordinal,
    pub cluster: ClusterId,
    pub sentence: SentenceId,
    pub release: ReleaseId,
    /// Times the sentence was written in the cluster's entries at that release.
    pub mentions: u32,
}

/// One entry of one release.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryRow {
    /// Accession nodes as listed; the first one is the primary accession.
    pub nodes: Vec<u32>,
    /// `(sentence, mentions)` in first-seen order.
    pub sentences: Vec<(u32, u32)>,
}

impl EntryRow {
    pub fn is_annotated(&self) -> bool {
        !self.sentences.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Posting {
    release: u32,
    node: u32,
    mentions: u32,
}

/// Journal of mutations, replayed to rebuild a corpus from a store file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) enum Op {
    Release(Release),
    Accession(String),
    Sentence(String),
    Entry { release: u32, nodes: Vec<u32> },
    Occurrence { sentence: u32, node: u32, release: u32, mentions: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterTrack {
    pub cluster: ClusterId,
    pub ordinals: Vec<Ordinal>,
}

/// Everything needed to draw one sentence's propagation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceTimeline {
    pub sentence: SentenceId,
    pub text: String,
    /// Ordered by first appearance, then cluster id.
    pub tracks: Vec<ClusterTrack>,
    /// Number of clusters holding the sentence at each release where it occurs.
    pub counts: Vec<(Ordinal, u32)>,
    /// Registered releases of each section inside the sentence's active span,
    /// indexed by [`Section::index`].
    pub rails: [Vec<Ordinal>; 2],
}

impl SentenceTimeline {
    pub fn occurrence_count(&self) -> usize {
        self.tracks.iter().map(|t| t.ordinals.len()).sum()
    }

    pub fn peak(&self) -> Option<(Ordinal, u32)> {
        // first release reaching the maximum
        self.counts
            .iter()
            .copied()
            .fold(None, |best, (ord, n)| match best {
                Some((_, m)) if m >= n => best,
                _ => Some((ord, n)),
            })
    }
}

#[derive(Debug, Default)]
struct Interner {
    texts: Vec<Box<str>>,
    ids: HashMap<Box<str>, u32>,
}

impl Interner {
    fn get(&self, text: &str) -> Option<u32> {
        self.ids.get(text).copied()
    }

    /// Returns the id and whether it was new.
    fn intern(&mut self, text: &str) -> (u32, bool) {
        if let Some(id) = self.ids.get(text) {
            return (*id, false);
        }
        let id = self.texts.len() as u32;
        let boxed: Box<str> = text.into();
        self.texts.push(boxed.clone());
        self.ids.insert(boxed, id);
        (id, true)
    }

    fn text(&self, id: u32) -> Option<&str> {
        self.texts.get(id as usize).map(|s| &**s)
    }

    fn len(&self) -> usize {
        self.texts.len()
    }
}

#[derive(Debug, Default)]
pub struct Corpus {
    releases: Vec<Release>,
    /// Release ids in chronological order.
    chrono: Vec<ReleaseId>,
    /// Ordinal by release id.
    ordinals: Vec<Ordinal>,
    release_keys: HashMap<(Section, String), ReleaseId>,
    accessions: Interner,
    sets: AccessionSets,
    sentences: Interner,
    postings: Vec<Vec<Posting>>,
    entries: Vec<Vec<EntryRow>>,
    /// Latest entry row of each (release, cluster root), for attaching occurrences.
    open_rows: HashMap<(u32, u32), usize>,
    journal: Option<Vec<Op>>,
    primary_index: OnceLock<HashMap<(u32, u32), u32>>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// A corpus that records its mutations for [`StoreFile::commit`].
    pub fn journaled() -> Self {
        Corpus {
            journal: Some(Vec::new()),
            ..Self::default()
        }
    }

    pub(crate) fn take_journal(&mut self) -> Vec<Op> {
        match self.journal.as_mut() {
            Some(ops) => std::mem::take(ops),
            None => Vec::new(),
        }
    }

    pub(crate) fn set_journaling(&mut self, on: bool) {
        self.journal = on.then(Vec::new);
    }

    pub(crate) fn has_pending_changes(&self) -> bool {
        self.journal.as_ref().is_some_and(|ops| !ops.is_empty())
    }

    fn log(&mut self, op: impl FnOnce() -> Op) {
        if let Some(ops) = self.journal.as_mut() {
            ops.push(op());
        }
    }

    fn invalidate(&mut self) {
        self.primary_index.take();
    }

    pub(crate) fn apply(&mut self, op: Op) -> Result<(), StoreError> {
        match op {
            Op::Release(r) => {
                self.register_release(r)?;
            }
            Op::Accession(a) => {
                self.intern_accession(&a);
            }
            Op::Sentence(s) => {
                self.intern_sentence(&s)?;
            }
            Op::Entry { release, nodes } => {
                self.check_release(release)?;
                if nodes.iter().any(|&n| n as usize >= self.sets.len()) {
                    return Err(StoreError::UnknownCluster(nodes[0]));
                }
                self.upsert_nodes(ReleaseId(release), nodes)?;
            }
            Op::Occurrence {
                sentence,
                node,
                release,
                mentions,
            } => {
                self.check_release(release)?;
                if sentence as usize >= self.sentences.len() {
                    return Err(StoreError::UnknownSentence(sentence));
                }
                if node as usize >= self.sets.len() {
                    return Err(StoreError::UnknownCluster(node));
                }
                self.attach(sentence, node, release, mentions);
            }
        }
        Ok(())
    }

    // ---------------------------------------------------------------- releases

    /// Registers a release, or returns the existing handle when the same
    /// section, label and date were registered before.
    pub fn register_release(&mut self, release: Release) -> Result<ReleaseId, StoreError> {
        let key = (release.section, release.label.clone());
        if let Some(&id) = self.release_keys.get(&key) {
            let existing = &self.releases[id.0 as usize];
            if existing.date != release.date {
                return Err(StoreError::ReleaseConflict {
                    section: release.section,
                    label: release.label,
                    existing: existing.date,
                    requested: release.date,
                });
            }
            return Ok(id);
        }
        let id = ReleaseId(self.releases.len() as u32);
        self.log(|| Op::Release(release.clone()));
        let pos = self
            .chrono
            .partition_point(|other| self.releases[other.0 as usize].chronological_cmp(&release).is_lt());
        self.releases.push(release);
        self.entries.push(Vec::new());
        self.ordinals.push(Ordinal(0));
        self.chrono.insert(pos, id);
        for (i, rid) in self.chrono.iter().enumerate() {
            self.ordinals[rid.0 as usize] = Ordinal(i as u32 + 1);
        }
        self.release_keys.insert(key, id);
        self.invalidate();
        Ok(id)
    }

    fn check_release(&self, raw: u32) -> Result<(), StoreError> {
        if (raw as usize) < self.releases.len() {
            Ok(())
        } else {
            Err(StoreError::UnknownRelease(format!("#{raw}")))
        }
    }

    pub fn release(&self, id: ReleaseId) -> &Release {
        &self.releases[id.0 as usize]
    }

    pub fn ordinal(&self, id: ReleaseId) -> Ordinal {
        self.ordinals[id.0 as usize]
    }

    pub fn release_at(&self, ordinal: Ordinal) -> Option<ReleaseId> {
        self.chrono.get((ordinal.0 as usize).checked_sub(1)?).copied()
    }

    pub fn release_count(&self) -> usize {
        self.releases.len()
    }

    /// All releases in chronological order.
    pub fn releases_chrono(&self) -> impl Iterator<Item = (Ordinal, ReleaseId, &Release)> + '_ {
        self.chrono
            .iter()
            .enumerate()
            .map(|(i, &id)| (Ordinal(i as u32 + 1), id, &self.releases[id.0 as usize]))
    }

    /// Releases of one section in chronological order.
    pub fn section_releases(&self, section: Section) -> Vec<(Ordinal, ReleaseId)> {
        self.releases_chrono()
            .filter(|(_, _, r)| r.section == section)
            .map(|(o, id, _)| (o, id))
            .collect()
    }

    pub fn find_release(&self, section: Section, label: &str) -> Option<ReleaseId> {
        self.release_keys.get(&(section, label.to_owned())).copied()
    }

    /// Releases of any section carrying `label`.
    pub fn releases_labelled(&self, label: &str) -> Vec<ReleaseId> {
        Section::ALL
            .iter()
            .filter_map(|&s| self.find_release(s, label))
            .collect()
    }

    pub fn latest_release(&self) -> Option<ReleaseId> {
        self.chrono.last().copied()
    }

    // -------------------------------------------------------------- accessions

    fn intern_accession(&mut self, accession: &str) -> u32 {
        let (id, new) = self.accessions.intern(accession);
        if new {
            self.sets.push();
            self.log(|| Op::Accession(accession.to_owned()));
        }
        id
    }

    /// Records an entry of `release`: joins every cluster touching any of the
    /// accessions and returns the merged cluster. The first accession is the
    /// entry's primary accession at this release.
    pub fn upsert_entry<S: AsRef<str>>(
        &mut self,
        release: ReleaseId,
        accessions: &[S],
    ) -> Result<ClusterId, StoreError> {
        self.check_release(release.0)?;
        if accessions.is_empty() {
            return Err(StoreError::EmptyAccessions);
        }
        let mut nodes = Vec::with_capacity(accessions.len());
        for acc in accessions {
            let node = self.intern_accession(acc.as_ref().trim());
            if !nodes.contains(&node) {
                nodes.push(node);
            }
        }
        self.upsert_nodes(release, nodes)
    }

    fn upsert_nodes(&mut self, release: ReleaseId, nodes: Vec<u32>) -> Result<ClusterId, StoreError> {
        if nodes.is_empty() {
            return Err(StoreError::EmptyAccessions);
        }
        self.log(|| Op::Entry {
            release: release.0,
            nodes: nodes.clone(),
        });
        let first = nodes[0];
        for &n in &nodes[1..] {
            self.sets.union(first, n);
        }
        let root = self.sets.find(first);
        let rows = &mut self.entries[release.0 as usize];
        rows.push(EntryRow {
            nodes,
            sentences: Vec::new(),
        });
        self.open_rows.insert((release.0, root), rows.len() - 1);
        self.invalidate();
        Ok(ClusterId(self.sets.label(first)))
    }

    pub fn accession(&self, node: u32) -> Option<&str> {
        self.accessions.text(node)
    }

    pub fn accession_count(&self) -> usize {
        self.accessions.len()
    }

    pub fn cluster_of(&self, accession: &str) -> Option<ClusterId> {
        self.accessions
            .get(accession)
            .map(|n| ClusterId(self.sets.label(n)))
    }

    /// Current id of the cluster containing a (possibly outdated) cluster id.
    pub fn resolve_cluster(&self, cluster: ClusterId) -> Result<ClusterId, StoreError> {
        if cluster.0 as usize >= self.sets.len() {
            return Err(StoreError::UnknownCluster(cluster.0));
        }
        Ok(ClusterId(self.sets.label(cluster.0)))
    }

    /// All accessions of a cluster, in the order they were first seen.
    pub fn cluster_accessions(&self, cluster: ClusterId) -> Vec<&str> {
        let mut nodes = self.sets.members(cluster.0).to_vec();
        nodes.sort_unstable();
        nodes
            .into_iter()
            .filter_map(|n| self.accessions.text(n))
            .collect()
    }

    pub fn cluster_count(&self) -> usize {
        (0..self.sets.len() as u32)
            .filter(|&n| self.sets.label(n) == n)
            .count()
    }

    /// Entries recorded for a release, in file order.
    pub fn entries(&self, release: ReleaseId) -> &[EntryRow] {
        &self.entries[release.0 as usize]
    }

    pub fn cluster_of_node(&self, node: u32) -> ClusterId {
        ClusterId(self.sets.label(node))
    }

    /// Primary accession the cluster carried at a release, if it had an entry
    /// there. With several entries of one cluster in a release, the first wins.
    pub fn primary_accession_at(&self, cluster: ClusterId, release: ReleaseId) -> Option<&str> {
        let index = self.primary_index.get_or_init(|| {
            let mut index = HashMap::new();
            for (rid, rows) in self.entries.iter().enumerate() {
                for row in rows {
                    let label = self.sets.label(row.nodes[0]);
                    index.entry((label, rid as u32)).or_insert(row.nodes[0]);
                }
            }
            index
        });
        let label = self.sets.label(cluster.0);
        index
            .get(&(label, release.0))
            .and_then(|&n| self.accessions.text(n))
    }

    /// Flattens the cluster forest; call once ingestion is finished.
    pub fn compact(&mut self) {
        self.sets.compress_all();
        self.open_rows.shrink_to_fit();
    }

    // --------------------------------------------------------------- sentences

    fn intern_sentence(&mut self, text: &str) -> Result<u32, StoreError> {
        if !is_canonical(text) {
            return Err(StoreError::NonCanonical(text.to_owned()));
        }
        let (id, new) = self.sentences.intern(text);
        if new {
            self.postings.push(Vec::new());
            self.log(|| Op::Sentence(text.to_owned()));
        }
        Ok(id)
    }

    /// Records that canonical `text` occurs in `cluster` at `release`.
    pub fn add_occurrence(
        &mut self,
        text: &str,
        cluster: ClusterId,
        release: ReleaseId,
    ) -> Result<SentenceId, StoreError> {
        self.add_occurrence_mentions(text, cluster, release, 1)
    }

    /// [`Corpus::add_occurrence`] with the number of times the entry mentions it.
    /// Adding an existing (sentence, cluster, release) triple again is a no-op.
    pub fn add_occurrence_mentions(
        &mut self,
        text: &str,
        cluster: ClusterId,
        release: ReleaseId,
        mentions: u32,
    ) -> Result<SentenceId, StoreError> {
        self.check_release(release.0)?;
        if cluster.0 as usize >= self.sets.len() {
            return Err(StoreError::UnknownCluster(cluster.0));
        }
        let sentence = self.intern_sentence(text)?;
        self.attach(sentence, cluster.0, release.0, mentions.max(1));
        Ok(SentenceId(sentence))
    }

    fn attach(&mut self, sentence: u32, node: u32, release: u32, mentions: u32) {
        let root = self.sets.find(node);
        let row_idx = match self.open_rows.get(&(release, root)) {
            Some(&i) => i,
            None => {
                // No entry was upserted for this cluster at this release.
                let rows = &mut self.entries[release as usize];
                rows.push(EntryRow {
                    nodes: vec![node],
                    sentences: Vec::new(),
                });
                self.open_rows.insert((release, root), rows.len() - 1);
                rows.len() - 1
            }
        };
        let row = &mut self.entries[release as usize][row_idx];
        if row.sentences.iter().any(|&(s, _)| s == sentence) {
            return;
        }
        let row_node = row.nodes[0];
        row.sentences.push((sentence, mentions));
        self.postings[sentence as usize].push(Posting {
            release,
            node: row_node,
            mentions,
        });
        self.log(|| Op::Occurrence {
            sentence,
            node,
            release,
            mentions,
        });
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    pub fn sentence_id(&self, text: &str) -> Option<SentenceId> {
        self.sentences.get(text).map(SentenceId)
    }

    pub fn sentence_text(&self, id: SentenceId) -> Option<&str> {
        self.sentences.text(id.0)
    }

    pub fn sentence_ids(&self) -> impl Iterator<Item = SentenceId> {
        (0..self.sentences.len() as u32).map(SentenceId)
    }

    /// Sentences containing `needle` (case-insensitive), in id order, at most `cap`.
    pub fn search(&self, needle: &str, cap: usize) -> Vec<SentenceId> {
        let needle = needle.to_lowercase();
        self.sentences
            .texts
            .iter()
            .enumerate()
            .filter(|(_, t)| t.contains(needle.as_str()))
            .take(cap)
            .map(|(i, _)| SentenceId(i as u32))
            .collect()
    }

    /// Logical occurrences of a sentence, sorted by (ordinal, cluster).
    /// Raw rows that collapse into one cluster at a release are merged and
    /// their mentions summed.
    pub fn occurrences(&self, sentence: SentenceId) -> Result<Vec<Occurrence>, StoreError> {
        let postings = self
            .postings
            .get(sentence.0 as usize)
            .ok_or(StoreError::UnknownSentence(sentence.0))?;
        let mut out: Vec<Occurrence> = postings
            .iter()
            .map(|p| Occurrence {
                ordinal: self.ordinals[p.release as usize],
                cluster: ClusterId(self.sets.label(p.node)),
                sentence,
                release: ReleaseId(p.release),
                mentions: p.mentions,
            })
            .collect();
        out.sort_unstable();
        out.dedup_by(|later, earlier| {
            if later.ordinal == earlier.ordinal && later.cluster == earlier.cluster {
                earlier.mentions += later.mentions;
                true
            } else {
                false
            }
        });
        Ok(out)
    }

    /// Total logical occurrences across all sentences.
    pub fn occurrence_count(&self) -> usize {
        self.sentence_ids()
            .map(|s| self.occurrences(s).map(|o| o.len()).unwrap_or(0))
            .sum()
    }

    /// Distinct clusters that ever held the sentence.
    pub fn lifetime_cluster_count(&self, sentence: SentenceId) -> Result<usize, StoreError> {
        let mut clusters: Vec<ClusterId> =
            self.occurrences(sentence)?.iter().map(|o| o.cluster).collect();
        clusters.sort_unstable();
        clusters.dedup();
        Ok(clusters.len())
    }

    pub fn timeline(&self, sentence: SentenceId) -> Result<SentenceTimeline, StoreError> {
        let occurrences = self.occurrences(sentence)?;
        let text = self
            .sentence_text(sentence)
            .ok_or(StoreError::UnknownSentence(sentence.0))?
            .to_owned();

        let mut by_cluster: BTreeMap<ClusterId, Vec<Ordinal>> = BTreeMap::new();
        let mut counts: BTreeMap<Ordinal, u32> = BTreeMap::new();
        for occ in &occurrences {
            by_cluster.entry(occ.cluster).or_default().push(occ.ordinal);
            *counts.entry(occ.ordinal).or_default() += 1;
        }
        let mut tracks: Vec<ClusterTrack> = by_cluster
            .into_iter()
            .map(|(cluster, ordinals)| ClusterTrack { cluster, ordinals })
            .collect();
        tracks.sort_by_key(|t| (t.ordinals[0], t.cluster));

        let mut rails: [Vec<Ordinal>; 2] = [Vec::new(), Vec::new()];
        if let (Some(first), Some(last)) = (occurrences.first(), occurrences.last()) {
            for (ord, _, rel) in self.releases_chrono() {
                if ord >= first.ordinal && ord <= last.ordinal {
                    rails[rel.section.index()].push(ord);
                }
            }
        }
        Ok(SentenceTimeline {
            sentence,
            text,
            tracks,
            counts: counts.into_iter().collect(),
            rails,
        })
    }
}
