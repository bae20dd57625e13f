//! The generator's record of what it did, and the pattern labels that follow
//! from it.
//!
//! Labels are derived by replaying the events: each entry's sentence set is
//! rebuilt release by release, entries are grouped into clusters through the
//! recorded merges, and every pattern is read off per-cluster sets of
//! release positions.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::generate::{sentence_text, GeneratorParams};
use crate::labels::{release_key, Labels, SectionTag, SentenceLabels};
use crate::oracle::{DumpRelease, DumpRow, OccurrenceDump};

/// Releases are referred to by their chronological index, entries by their
/// creation index and sentences by their pool index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Create { release: usize, entry: usize },
    Add { release: usize, entry: usize, sentence: usize, source: Option<usize> },
    Remove { release: usize, entry: usize, sentence: usize },
    ReAdd { release: usize, entry: usize, sentence: usize },
    Merge { release: usize, survivor: usize, absorbed: usize },
}

impl Event {
    pub fn release(&self) -> usize {
        match *self {
            Event::Create { release, .. }
            | Event::Add { release, .. }
            | Event::Remove { release, .. }
            | Event::ReAdd { release, .. }
            | Event::Merge { release, .. } => release,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRelease {
    pub section: SectionTag,
    pub label: String,
    pub date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub accession: String,
    pub section: SectionTag,
}

/// Per-release counts as written to the flat file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleaseCounts {
    pub entries: u64,
    pub annotated_entries: u64,
    /// Sentence slots summed over entries.
    pub sentences: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthLedger {
    pub params: GeneratorParams,
    pub releases: Vec<LedgerRelease>,
    pub entries: Vec<LedgerEntry>,
    pub events: Vec<Event>,
    /// Filled in by [`GroundTruthLedger::with_expected_labels`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Labels>,
}

/// Entry-level presence: for each release, the alive entries of its section
/// and the sentences each one lists.
struct Replay {
    listed: Vec<Vec<(usize, BTreeSet<usize>)>>,
    merges: Vec<(usize, usize)>,
}

impl GroundTruthLedger {
    fn replay(&self) -> Replay {
        let n = self.entries.len();
        let mut created = vec![false; n];
        let mut alive = vec![true; n];
        let mut held: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let mut merges = Vec::new();
        let mut listed = Vec::with_capacity(self.releases.len());
        let mut events = self.events.iter().peekable();
        for (r, release) in self.releases.iter().enumerate() {
            while let Some(e) = events.next_if(|e| e.release() == r) {
                match *e {
                    Event::Create { entry, .. } => created[entry] = true,
                    Event::Add { entry, sentence, .. } | Event::ReAdd { entry, sentence, .. } => {
                        held[entry].insert(sentence);
                    }
                    Event::Remove { entry, sentence, .. } => {
                        held[entry].remove(&sentence);
                    }
                    Event::Merge { survivor, absorbed, .. } => {
                        let moved = std::mem::take(&mut held[absorbed]);
                        held[survivor].extend(moved);
                        alive[absorbed] = false;
                        merges.push((survivor, absorbed));
                    }
                }
            }
            listed.push(
                (0..n)
                    .filter(|&i| created[i] && alive[i] && self.entries[i].section == release.section)
                    .map(|i| (i, held[i].clone()))
                    .collect(),
            );
        }
        Replay { listed, merges }
    }

    /// Cluster key of every entry once all merges are known: the smallest
    /// accession of its merge group.
    fn cluster_keys(&self, merges: &[(usize, usize)]) -> Vec<String> {
        let n = self.entries.len();
        let mut group: Vec<usize> = (0..n).collect();
        fn root(group: &mut [usize], mut x: usize) -> usize {
            while group[x] != x {
                group[x] = group[group[x]];
                x = group[x];
            }
            x
        }
        for &(a, b) in merges {
            let (ra, rb) = (root(&mut group, a), root(&mut group, b));
            group[rb] = ra;
        }
        let mut smallest: BTreeMap<usize, &str> = BTreeMap::new();
        for i in 0..n {
            let r = root(&mut group, i);
            let acc = self.entries[i].accession.as_str();
            smallest
                .entry(r)
                .and_modify(|s| *s = (*s).min(acc))
                .or_insert(acc);
        }
        (0..n).map(|i| smallest[&root(&mut group, i)].to_owned()).collect()
    }

    pub fn release_counts(&self) -> Vec<ReleaseCounts> {
        self.replay()
            .listed
            .iter()
            .map(|entries| ReleaseCounts {
                entries: entries.len() as u64,
                annotated_entries: entries.iter().filter(|(_, s)| !s.is_empty()).count() as u64,
                sentences: entries.iter().map(|(_, s)| s.len() as u64).sum(),
            })
            .collect()
    }

    /// Cluster-level occurrences, deduplicated, with canonical sentence text.
    pub fn to_dump(&self) -> OccurrenceDump {
        let replay = self.replay();
        let keys = self.cluster_keys(&replay.merges);
        let mut rows = BTreeSet::new();
        for (r, entries) in replay.listed.iter().enumerate() {
            for (entry, sentences) in entries {
                for &s in sentences {
                    rows.insert((s, keys[*entry].clone(), r));
                }
            }
        }
        OccurrenceDump {
            releases: self
                .releases
                .iter()
                .map(|r| DumpRelease {
                    section: r.section,
                    label: r.label.clone(),
                    date: r.date,
                })
                .collect(),
            rows: rows
                .into_iter()
                .map(|(s, cluster, r)| DumpRow {
                    sentence: sentence_text(s).to_lowercase(),
                    cluster,
                    section: self.releases[r].section,
                    label: self.releases[r].label.clone(),
                })
                .collect(),
        }
    }

    pub fn expected_labels(&self) -> Labels {
        let replay = self.replay();
        let keys = self.cluster_keys(&replay.merges);
        let release_keys: Vec<String> = self.releases.iter().map(|r| release_key(r.section, &r.label)).collect();

        // position of each release within its own section
        let mut position = Vec::with_capacity(self.releases.len());
        let mut per_section: BTreeMap<SectionTag, Vec<usize>> = BTreeMap::new();
        for (r, release) in self.releases.iter().enumerate() {
            let list = per_section.entry(release.section).or_default();
            position.push(list.len());
            list.push(r);
        }

        // sentence -> cluster -> releases
        let mut presence: BTreeMap<usize, BTreeMap<&str, BTreeSet<usize>>> = BTreeMap::new();
        for (r, entries) in replay.listed.iter().enumerate() {
            for (entry, sentences) in entries {
                for &s in sentences {
                    presence
                        .entry(s)
                        .or_default()
                        .entry(keys[*entry].as_str())
                        .or_default()
                        .insert(r);
                }
            }
        }

        let mut labels = Labels::new();
        for (s, clusters) in presence {
            let first = clusters.values().filter_map(|rs| rs.first()).min().copied().unwrap();
            let last = clusters.values().filter_map(|rs| rs.last()).max().copied().unwrap();
            let mut out = SentenceLabels::default();

            if last > first {
                let origin: BTreeSet<&str> = clusters
                    .iter()
                    .filter(|(_, rs)| rs.contains(&first))
                    .map(|(c, _)| *c)
                    .collect();
                let mut holders: BTreeSet<&str> = BTreeSet::new();
                for list in per_section.values() {
                    let upto = list.partition_point(|&r| r <= last);
                    if upto == 0 {
                        continue;
                    }
                    let newest = list[upto - 1];
                    holders.extend(clusters.iter().filter(|(_, rs)| rs.contains(&newest)).map(|(c, _)| *c));
                }
                if origin.is_disjoint(&holders) {
                    out.missing_origin = Some((
                        origin.iter().map(|c| c.to_string()).collect(),
                        holders.iter().map(|c| c.to_string()).collect(),
                    ));
                }
            }

            for (cluster, rs) in &clusters {
                for (section, list) in &per_section {
                    let mine: Vec<usize> = rs.iter().copied().filter(|&r| self.releases[r].section == *section).collect();
                    for pair in mine.windows(2) {
                        if position[pair[1]] - position[pair[0]] > 1 {
                            out.reappearing.push((
                                cluster.to_string(),
                                release_keys[pair[0]].clone(),
                                release_keys[pair[1]].clone(),
                            ));
                        }
                    }
                    if let [only] = mine[..] {
                        if Some(&only) != list.last() {
                            out.transient.push((cluster.to_string(), release_keys[only].clone()));
                        }
                    }
                }
            }

            if self.releases[first].section == SectionTag::TrEMBL {
                let first_sp = clusters
                    .values()
                    .flat_map(|rs| rs.iter().copied())
                    .filter(|&r| self.releases[r].section == SectionTag::SwissProt)
                    .min();
                if let Some(sp) = first_sp {
                    out.trembl_origin = Some((release_keys[first].clone(), release_keys[sp].clone()));
                }
            }

            out.normalize();
            if !out.is_empty() {
                labels.insert(sentence_text(s).to_lowercase(), out);
            }
        }
        labels
    }

    pub fn with_expected_labels(&self) -> GroundTruthLedger {
        GroundTruthLedger {
            expected: Some(self.expected_labels()),
            ..self.clone()
        }
    }
}
