//! Converts a populated store and its detector output into the shared label
//! form, so they can be checked against the ledger and the reference detector.

use std::collections::BTreeMap;

use annotrace_core::patterns::{scan_corpus, Evidence, PatternReport, ScanError, ScanFilter};
use annotrace_core::{ClusterId, Corpus, Ordinal, Section};

use crate::labels::{release_key, Labels, SectionTag};
use crate::oracle::{DumpRelease, DumpRow, OccurrenceDump};

fn tag(section: Section) -> SectionTag {
    match section {
        Section::SwissProt => SectionTag::SwissProt,
        Section::TrEMBL => SectionTag::TrEMBL,
    }
}

fn cluster_key(corpus: &Corpus, cluster: ClusterId) -> String {
    corpus
        .cluster_accessions(cluster)
        .into_iter()
        .min()
        .unwrap_or_default()
        .to_owned()
}

fn ordinal_key(corpus: &Corpus, ordinal: Ordinal) -> String {
    let release = corpus.release(corpus.release_at(ordinal).expect("ordinal in range"));
    release_key(tag(release.section), &release.label)
}

/// Every resolved occurrence of the store.
pub fn dump_corpus(corpus: &Corpus) -> OccurrenceDump {
    let releases = corpus
        .releases_chrono()
        .map(|(_, _, r)| DumpRelease {
            section: tag(r.section),
            label: r.label.clone(),
            date: r.date,
        })
        .collect();
    let mut keys: BTreeMap<ClusterId, String> = BTreeMap::new();
    let mut rows = Vec::new();
    for sid in corpus.sentence_ids() {
        let text = corpus.sentence_text(sid).unwrap_or_default();
        for o in corpus.occurrences(sid).expect("sentence id from the corpus") {
            let key = keys.entry(o.cluster).or_insert_with(|| cluster_key(corpus, o.cluster));
            let r = corpus.release(o.release);
            rows.push(DumpRow {
                sentence: text.to_owned(),
                cluster: key.clone(),
                section: tag(r.section),
                label: r.label.clone(),
            });
        }
    }
    OccurrenceDump { releases, rows }
}

/// Folds detector reports into labels.
pub fn reports_to_labels(corpus: &Corpus, reports: &[PatternReport]) -> Labels {
    let mut labels = Labels::new();
    let key = |c: &ClusterId| cluster_key(corpus, *c);
    for r in reports {
        let text = corpus.sentence_text(r.sentence_id).unwrap_or_default().to_owned();
        let l = labels.entry(text).or_default();
        match &r.evidence {
            Evidence::MissingOrigin { first_set, last_set } => {
                l.missing_origin = Some((first_set.iter().map(key).collect(), last_set.iter().map(key).collect()));
            }
            Evidence::Reappearing { gaps } => {
                l.reappearing.extend(
                    gaps.iter()
                        .map(|g| (key(&g.cluster), ordinal_key(corpus, g.gap_start), ordinal_key(corpus, g.gap_end))),
                );
            }
            Evidence::Transient { appearances } => {
                l.transient
                    .extend(appearances.iter().map(|a| (key(&a.cluster), ordinal_key(corpus, a.ordinal))));
            }
            Evidence::TremblOrigin {
                first_trembl,
                first_swissprot,
            } => {
                l.trembl_origin = Some((ordinal_key(corpus, *first_trembl), ordinal_key(corpus, *first_swissprot)));
            }
        }
    }
    for l in labels.values_mut() {
        l.normalize();
    }
    labels
}

/// Runs the production detectors over the whole store.
pub fn detector_labels(corpus: &Corpus) -> Result<Labels, ScanError> {
    let mut reports = Vec::new();
    scan_corpus(corpus, &ScanFilter::default(), |r| {
        reports.push(r.clone());
        Ok(())
    })?;
    Ok(reports_to_labels(corpus, &reports))
}
