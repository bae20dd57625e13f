//! Naive reference detector: materializes, per sentence, the full
//! cluster-by-release presence matrix and reads every pattern off it by
//! scanning rows and columns.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::labels::{release_key, Labels, SectionTag, SentenceLabels};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpRelease {
    pub section: SectionTag,
    pub label: String,
    pub date: NaiveDate,
}

/// One occurrence: canonical sentence text, cluster key, release.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpRow {
    pub sentence: String,
    pub cluster: String,
    pub section: SectionTag,
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccurrenceDump {
    pub releases: Vec<DumpRelease>,
    pub rows: Vec<DumpRow>,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleLimits {
    pub max_occurrences: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_occurrences: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("{occurrences} occurrences exceed the oracle cap of {cap}")]
    TooLarge { occurrences: usize, cap: usize },
    #[error("occurrence refers to unknown release {0}")]
    UnknownRelease(String),
}

pub fn brute_force_detect(dump: &OccurrenceDump, limits: OracleLimits) -> Result<Labels, OracleError> {
    if dump.rows.len() > limits.max_occurrences {
        return Err(OracleError::TooLarge {
            occurrences: dump.rows.len(),
            cap: limits.max_occurrences,
        });
    }
    let mut releases = dump.releases.clone();
    releases.sort_by(|a, b| (a.date, a.section, &a.label).cmp(&(b.date, b.section, &b.label)));
    let keys: Vec<String> = releases.iter().map(|r| release_key(r.section, &r.label)).collect();
    let column: BTreeMap<&str, usize> = keys.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
    let sections: Vec<SectionTag> = releases.iter().map(|r| r.section).collect();

    let mut by_sentence: BTreeMap<&str, Vec<(&str, usize)>> = BTreeMap::new();
    for row in &dump.rows {
        let key = release_key(row.section, &row.label);
        let col = *column.get(key.as_str()).ok_or(OracleError::UnknownRelease(key))?;
        by_sentence.entry(&row.sentence).or_default().push((&row.cluster, col));
    }

    let mut labels = Labels::new();
    for (sentence, cells) in by_sentence {
        let mut clusters: Vec<&str> = cells.iter().map(|(c, _)| *c).collect();
        clusters.sort_unstable();
        clusters.dedup();
        let mut matrix = vec![vec![false; releases.len()]; clusters.len()];
        for (c, col) in &cells {
            let row = clusters.binary_search(c).unwrap();
            matrix[row][*col] = true;
        }
        let l = scan(&matrix, &clusters, &sections, &keys);
        if !l.is_empty() {
            labels.insert(sentence.to_owned(), l);
        }
    }
    Ok(labels)
}

fn column_has(matrix: &[Vec<bool>], col: usize) -> bool {
    matrix.iter().any(|row| row[col])
}

fn scan(matrix: &[Vec<bool>], clusters: &[&str], sections: &[SectionTag], keys: &[String]) -> SentenceLabels {
    let n = sections.len();
    let first = (0..n).find(|&c| column_has(matrix, c)).unwrap();
    let last = (0..n).rev().find(|&c| column_has(matrix, c)).unwrap();
    let mut out = SentenceLabels::default();

    if last > first {
        let f: Vec<String> = (0..clusters.len())
            .filter(|&i| matrix[i][first])
            .map(|i| clusters[i].to_owned())
            .collect();
        let mut l: Vec<String> = Vec::new();
        for section in [SectionTag::SwissProt, SectionTag::TrEMBL] {
            // newest release of this section at or before `last`
            if let Some(col) = (0..=last).rev().find(|&c| sections[c] == section) {
                for i in 0..clusters.len() {
                    if matrix[i][col] && !l.iter().any(|x| x == clusters[i]) {
                        l.push(clusters[i].to_owned());
                    }
                }
            }
        }
        if !f.iter().any(|x| l.contains(x)) {
            out.missing_origin = Some((f, l));
        }
    }

    for section in [SectionTag::SwissProt, SectionTag::TrEMBL] {
        let cols: Vec<usize> = (0..n).filter(|&c| sections[c] == section).collect();
        let Some(&newest) = cols.last() else {
            continue;
        };
        for (i, row) in matrix.iter().enumerate() {
            let mut previous: Option<usize> = None;
            let mut absent_since_previous = false;
            let mut present_count = 0;
            for &c in &cols {
                if row[c] {
                    present_count += 1;
                    if let (Some(p), true) = (previous, absent_since_previous) {
                        out.reappearing.push((clusters[i].to_owned(), keys[p].clone(), keys[c].clone()));
                    }
                    previous = Some(c);
                    absent_since_previous = false;
                } else if previous.is_some() {
                    absent_since_previous = true;
                }
            }
            if present_count == 1 {
                let only = previous.unwrap();
                if only != newest {
                    out.transient.push((clusters[i].to_owned(), keys[only].clone()));
                }
            }
        }
    }

    if sections[first] == SectionTag::TrEMBL {
        if let Some(sp) = (first..n).find(|&c| sections[c] == SectionTag::SwissProt && column_has(matrix, c)) {
            out.trembl_origin = Some((keys[first].clone(), keys[sp].clone()));
        }
    }
    out.normalize();
    out
}
