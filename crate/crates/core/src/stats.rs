//! Per-release reuse statistics.
//!
//! * total: sentence occurrences in the release, each sentence counted once per entry
//! * unique: distinct sentences
//! * singleton: sentences found in exactly one entry
//! * reuse spectrum: multiplicity k -> number of sentences found in exactly k entries
//!
//! An entry is annotated when its cleaned comment text yielded at least one
//! sentence; entries holding only boilerplate count as unannotated.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::release::{Ordinal, Release, Section};
use crate::store::{Corpus, ReleaseId, StoreError};

/// A ratio kept exact; `value` is `None` when the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Ratio {
            numerator,
            denominator,
        }
    }

    pub fn value(&self) -> Option<f64> {
        (self.denominator != 0).then(|| self.numerator as f64 / self.denominator as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleaseStats {
    pub total_sentences: u64,
    pub unique_sentences: u64,
    pub singleton_sentences: u64,
    pub entries_total: u64,
    pub entries_annotated: u64,
    pub entries_unannotated: u64,
    /// total / annotated entries
    pub avg_sentences_per_entry: Ratio,
    /// total / unique
    pub avg_entries_per_sentence: Ratio,
    pub reuse_spectrum: BTreeMap<u64, u64>,
}

impl ReleaseStats {
    pub fn unique_fraction(&self) -> Option<f64> {
        Ratio::new(self.unique_sentences, self.total_sentences).value()
    }

    pub fn singleton_fraction(&self) -> Option<f64> {
        Ratio::new(self.singleton_sentences, self.total_sentences).value()
    }

    pub fn unannotated_fraction(&self) -> Option<f64> {
        Ratio::new(self.entries_unannotated, self.entries_total).value()
    }

    /// Checks the identities every computed release must satisfy; returns the
    /// first one violated.
    pub fn check_identities(&self) -> Result<(), &'static str> {
        if !(self.singleton_sentences <= self.unique_sentences
            && self.unique_sentences <= self.total_sentences)
        {
            return Err("singleton <= unique <= total");
        }
        let sum_k: u64 = self.reuse_spectrum.values().sum();
        let sum_kn: u64 = self.reuse_spectrum.iter().map(|(k, n)| k * n).sum();
        if sum_k != self.unique_sentences {
            return Err("sum of spectrum = unique");
        }
        if sum_kn != self.total_sentences {
            return Err("sum of k * spectrum[k] = total");
        }
        if self.reuse_spectrum.get(&1).copied().unwrap_or(0) != self.singleton_sentences {
            return Err("spectrum[1] = singleton");
        }
        if self.entries_annotated + self.entries_unannotated != self.entries_total {
            return Err("annotated + unannotated = entries");
        }
        if self.avg_sentences_per_entry != Ratio::new(self.total_sentences, self.entries_annotated)
        {
            return Err("avg sentences per entry = total / annotated");
        }
        if self.avg_entries_per_sentence != Ratio::new(self.total_sentences, self.unique_sentences) {
            return Err("avg entries per sentence = total / unique");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StatsOptions {
    /// Count a sentence written twice in one entry twice. Off by default:
    /// entry membership is the unit of reuse.
    pub count_repeats: bool,
}

/// Computes stats for every release, indexed by [`ReleaseId`].
///
/// Counts come from the entries as listed in each release, so two entries
/// that only merge in a later release still count as two here.
pub fn compute_all_stats(corpus: &Corpus, options: StatsOptions) -> Vec<ReleaseStats> {
    let mut per_sentence: HashMap<u32, u64> = HashMap::new();
    (0..corpus.release_count())
        .map(|rid| {
            per_sentence.clear();
            let rows = corpus.entries(ReleaseId(rid as u32));
            for row in rows {
                for &(sentence, mentions) in &row.sentences {
                    *per_sentence.entry(sentence).or_default() += if options.count_repeats { mentions as u64 } else { 1 };
                }
            }
            let mut spectrum: BTreeMap<u64, u64> = BTreeMap::new();
            for k in per_sentence.values() {
                *spectrum.entry(*k).or_default() += 1;
            }
            let total: u64 = per_sentence.values().sum();
            let unique = per_sentence.len() as u64;
            let entries_total = rows.len() as u64;
            let entries_annotated = rows.iter().filter(|r| r.is_annotated()).count() as u64;
            ReleaseStats {
                total_sentences: total,
                unique_sentences: unique,
                singleton_sentences: spectrum.get(&1).copied().unwrap_or(0),
                entries_total,
                entries_annotated,
                entries_unannotated: entries_total - entries_annotated,
                avg_sentences_per_entry: Ratio::new(total, entries_annotated),
                avg_entries_per_sentence: Ratio::new(total, unique),
                reuse_spectrum: spectrum,
            }
        })
        .collect()
}

pub fn compute_release_stats(
    corpus: &Corpus,
    release: ReleaseId,
    options: StatsOptions,
) -> Result<ReleaseStats, StoreError> {
    if release.0 as usize >= corpus.release_count() {
        return Err(StoreError::UnknownRelease(format!("#{}", release.0)));
    }
    Ok(compute_all_stats(corpus, options).swap_remove(release.0 as usize))
}

/// Spectrum of one release as `(k, sentences)` pairs sorted by k.
pub fn reuse_distribution(
    corpus: &Corpus,
    release: ReleaseId,
    options: StatsOptions,
) -> Result<Vec<(u64, u64)>, StoreError> {
    Ok(compute_release_stats(corpus, release, options)?
        .reuse_spectrum
        .into_iter()
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub ordinal: Ordinal,
    pub release: Release,
    pub stats: ReleaseStats,
}

/// One point per registered release of `section`, in date order.
pub fn stats_series(corpus: &Corpus, section: Section, options: StatsOptions) -> Vec<SeriesPoint> {
    let all = compute_all_stats(corpus, options);
    corpus
        .section_releases(section)
        .into_iter()
        .map(|(ordinal, rid)| SeriesPoint {
            ordinal,
            release: corpus.release(rid).clone(),
            stats: all[rid.0 as usize].clone(),
        })
        .collect()
}

/// Header of the tab-separated series format.
pub const SERIES_HEADER: &str = "section\tlabel\tdate\tentries\tannotated_entries\tunannotated_entries\tunannotated_fraction\ttotal_sentences\tunique_sentences\tunique_fraction\tsingleton_sentences\tsingleton_fraction\tavg_sentences_per_entry\tavg_entries_per_sentence";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Formats a series point as a row matching [`SERIES_HEADER`]; undefined
/// averages and fractions are left empty.
pub fn series_row(point: &SeriesPoint) -> String {
    let s = &point.stats;
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        point.release.section,
        point.release.label,
        point.release.date,
        s.entries_total,
        s.entries_annotated,
        s.entries_unannotated,
        opt(s.unannotated_fraction()),
        s.total_sentences,
        s.unique_sentences,
        opt(s.unique_fraction()),
        s.singleton_sentences,
        opt(s.singleton_fraction()),
        opt(s.avg_sentences_per_entry.value()),
        opt(s.avg_entries_per_sentence.value()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn corpus() -> (Corpus, Vec<ReleaseId>) {
        let mut c = Corpus::new();
        let d = |y| NaiveDate::from_ymd_opt(y, 1, 1).unwrap();
        let r1 = c.register_release(Release::new(Section::SwissProt, "1", d(2000))).unwrap();
        let r2 = c.register_release(Release::new(Section::SwissProt, "2", d(2001))).unwrap();
        let e = c.register_release(Release::new(Section::TrEMBL, "1", d(2002))).unwrap();
        // r1: A{a,b} B{a} C{} ; r2: A{a} B{a} D{a,c}
        let a = c.upsert_entry(r1, &["PAAAAA"]).unwrap();
        c.add_occurrence("a.", a, r1).unwrap();
        c.add_occurrence_mentions("b.", a, r1, 3).unwrap();
        let b = c.upsert_entry(r1, &["PBBBBB"]).unwrap();
        c.add_occurrence("a.", b, r1).unwrap();
        c.upsert_entry(r1, &["PCCCCC"]).unwrap();
        for acc in ["PAAAAA", "PBBBBB"] {
            let x = c.upsert_entry(r2, &[acc]).unwrap();
            c.add_occurrence("a.", x, r2).unwrap();
        }
        let d_ = c.upsert_entry(r2, &["PDDDDD"]).unwrap();
        c.add_occurrence("a.", d_, r2).unwrap();
        c.add_occurrence("c.", d_, r2).unwrap();
        (c, vec![r1, r2, e])
    }

    #[test]
    fn hand_checked_release() {
        let (c, r) = corpus();
        let s = compute_release_stats(&c, r[0], StatsOptions::default()).unwrap();
        assert_eq!(s.total_sentences, 3);
        assert_eq!(s.unique_sentences, 2);
        assert_eq!(s.singleton_sentences, 1);
        assert_eq!(s.entries_total, 3);
        assert_eq!(s.entries_annotated, 2);
        assert_eq!(s.entries_unannotated, 1);
        assert_eq!(s.avg_sentences_per_entry.value(), Some(1.5));
        assert_eq!(s.avg_entries_per_sentence.value(), Some(1.5));
        assert_eq!(s.reuse_spectrum, BTreeMap::from([(1, 1), (2, 1)]));
        s.check_identities().unwrap();

        let s2 = compute_release_stats(&c, r[1], StatsOptions::default()).unwrap();
        assert_eq!(reuse_distribution(&c, r[1], StatsOptions::default()).unwrap(), vec![(1, 1), (3, 1)]);
        assert_eq!(s2.total_sentences, 4);
    }

    #[test]
    fn counting_repeats_changes_totals_only_where_repeated() {
        let (c, r) = corpus();
        let s = compute_release_stats(&c, r[0], StatsOptions { count_repeats: true }).unwrap();
        assert_eq!(s.total_sentences, 5);
        assert_eq!(s.unique_sentences, 2);
        s.check_identities().unwrap();
    }

    #[test]
    fn empty_release_has_undefined_averages() {
        let (c, r) = corpus();
        let s = compute_release_stats(&c, r[2], StatsOptions::default()).unwrap();
        assert_eq!(s.total_sentences, 0);
        assert_eq!(s.entries_total, 0);
        assert_eq!(s.avg_sentences_per_entry.value(), None);
        assert_eq!(s.avg_entries_per_sentence.value(), None);
        assert_eq!(s.unique_fraction(), None);
        assert!(s.reuse_spectrum.is_empty());
        s.check_identities().unwrap();
        let row = series_row(&stats_series(&c, Section::TrEMBL, StatsOptions::default())[0]);
        assert_eq!(row, "TrEMBL\t1\t2002-01-01\t0\t0\t0\t\t0\t0\t\t0\t\t\t");
    }

    #[test]
    fn series_is_per_section_and_ordered() {
        let (c, _) = corpus();
        let sp = stats_series(&c, Section::SwissProt, StatsOptions::default());
        assert_eq!(sp.len(), 2);
        assert!(sp[0].ordinal < sp[1].ordinal);
        assert_eq!(stats_series(&c, Section::TrEMBL, StatsOptions::default()).len(), 1);
        assert!(matches!(
            compute_release_stats(&c, ReleaseId(9), StatsOptions::default()),
            Err(StoreError::UnknownRelease(_))
        ));
        assert_eq!(SERIES_HEADER.split('\t').count(), series_row(&sp[0]).split('\t').count());
    }

    #[test]
    fn later_merge_does_not_change_earlier_counts() {
        let mut c = Corpus::new();
        let d = |y| NaiveDate::from_ymd_opt(y, 1, 1).unwrap();
        let r1 = c.register_release(Release::new(Section::SwissProt, "1", d(2000))).unwrap();
        let r2 = c.register_release(Release::new(Section::SwissProt, "2", d(2001))).unwrap();
        for acc in ["P00001", "P00002"] {
            let e = c.upsert_entry(r1, &[acc]).unwrap();
            c.add_occurrence("shared.", e, r1).unwrap();
        }
        let merged = c.upsert_entry(r2, &["P00001", "P00002"]).unwrap();
        c.add_occurrence("shared.", merged, r2).unwrap();
        let all = compute_all_stats(&c, StatsOptions::default());
        assert_eq!((all[r1.0 as usize].entries_total, all[r1.0 as usize].total_sentences), (2, 2));
        assert_eq!(all[r1.0 as usize].singleton_sentences, 0);
        assert_eq!((all[r2.0 as usize].entries_total, all[r2.0 as usize].total_sentences), (1, 1));
    }
}
