//! JSON shapes shared by the CLI output and the `/v1` API.

use std::collections::BTreeMap;

use annotrace_core::stats::SeriesPoint;
use annotrace_core::{ClusterId, Corpus, Ordinal, SentenceId, StoreError};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsPointView {
    pub ordinal: Ordinal,
    pub section: String,
    pub label: String,
    pub date: NaiveDate,
    pub entries_total: u64,
    pub entries_annotated: u64,
    pub entries_unannotated: u64,
    pub unannotated_fraction: Option<f64>,
    pub total_sentences: u64,
    pub unique_sentences: u64,
    pub unique_fraction: Option<f64>,
    pub singleton_sentences: u64,
    pub singleton_fraction: Option<f64>,
    pub avg_sentences_per_entry: Option<f64>,
    pub avg_entries_per_sentence: Option<f64>,
    /// Number of sentences found in exactly `k` entries, keyed by `k`.
    pub reuse_spectrum: BTreeMap<u64, u64>,
}

impl From<&SeriesPoint> for StatsPointView {
    fn from(p: &SeriesPoint) -> Self {
        let s = &p.stats;
        StatsPointView {
            ordinal: p.ordinal,
            section: p.release.section.to_string(),
            label: p.release.label.clone(),
            date: p.release.date,
            entries_total: s.entries_total,
            entries_annotated: s.entries_annotated,
            entries_unannotated: s.entries_unannotated,
            unannotated_fraction: s.unannotated_fraction(),
            total_sentences: s.total_sentences,
            unique_sentences: s.unique_sentences,
            unique_fraction: s.unique_fraction(),
            singleton_sentences: s.singleton_sentences,
            singleton_fraction: s.singleton_fraction(),
            avg_sentences_per_entry: s.avg_sentences_per_entry.value(),
            avg_entries_per_sentence: s.avg_entries_per_sentence.value(),
            reuse_spectrum: s.reuse_spectrum.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesView {
    pub section: String,
    pub points: Vec<StatsPointView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleaseRef {
    pub ordinal: Ordinal,
    pub section: String,
    pub label: String,
    pub date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterView {
    pub cluster_id: ClusterId,
    /// Column index, by first appearance.
    pub column: usize,
    pub accessions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointView {
    pub cluster_id: ClusterId,
    pub column: usize,
    pub ordinal: Ordinal,
    pub section: String,
    pub release_label: String,
    pub release_date: NaiveDate,
    /// Primary accession of the cluster's entry at this release.
    pub accession: String,
    pub url: String,
    pub mentions: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountView {
    pub ordinal: Ordinal,
    pub clusters: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RailsView {
    pub swissprot: Vec<ReleaseRef>,
    pub trembl: Vec<ReleaseRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineView {
    pub sentence_id: SentenceId,
    pub text: String,
    pub lifetime_clusters: usize,
    pub peak: Option<CountView>,
    pub clusters: Vec<ClusterView>,
    pub points: Vec<PointView>,
    pub counts: Vec<CountView>,
    pub rails: RailsView,
}

pub const DEFAULT_ENTRY_URL: &str = "https://www.uniprot.org/uniprotkb/{accession}/history";

fn release_ref(corpus: &Corpus, ordinal: Ordinal) -> ReleaseRef {
    let r = corpus.release(corpus.release_at(ordinal).expect("ordinal of a registered release"));
    ReleaseRef {
        ordinal,
        section: r.section.to_string(),
        label: r.label.clone(),
        date: r.date,
    }
}

/// Builds the timeline payload; `url_template` has `{accession}` substituted.
pub fn timeline_view(corpus: &Corpus, sentence: SentenceId, url_template: &str) -> Result<TimelineView, StoreError> {
    let timeline = corpus.timeline(sentence)?;
    let occurrences = corpus.occurrences(sentence)?;
    let columns: BTreeMap<ClusterId, usize> = timeline
        .tracks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.cluster, i))
        .collect();
    let clusters = timeline
        .tracks
        .iter()
        .enumerate()
        .map(|(column, t)| ClusterView {
            cluster_id: t.cluster,
            column,
            accessions: corpus.cluster_accessions(t.cluster).into_iter().map(str::to_owned).collect(),
        })
        .collect();
    let points = occurrences
        .iter()
        .map(|o| {
            let r = corpus.release(o.release);
            let accession = corpus
                .primary_accession_at(o.cluster, o.release)
                .or_else(|| corpus.cluster_accessions(o.cluster).first().copied())
                .unwrap_or_default()
                .to_owned();
            PointView {
                cluster_id: o.cluster,
                column: columns[&o.cluster],
                ordinal: o.ordinal,
                section: r.section.to_string(),
                release_label: r.label.clone(),
                release_date: r.date,
                url: url_template.replace("{accession}", &accession),
                accession,
                mentions: o.mentions,
            }
        })
        .collect();
    let rails = RailsView {
        swissprot: timeline.rails[0].iter().map(|&o| release_ref(corpus, o)).collect(),
        trembl: timeline.rails[1].iter().map(|&o| release_ref(corpus, o)).collect(),
    };
    Ok(TimelineView {
        sentence_id: sentence,
        text: timeline.text.clone(),
        lifetime_clusters: columns.len(),
        peak: timeline.peak().map(|(ordinal, clusters)| CountView { ordinal, clusters }),
        clusters,
        points,
        counts: timeline
            .counts
            .iter()
            .map(|&(ordinal, clusters)| CountView { ordinal, clusters })
            .collect(),
        rails,
    })
}
