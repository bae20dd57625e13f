//! Pattern labels in a form every implementation can produce: clusters are
//! named by their lexicographically smallest accession and releases by
//! `Section:label`, so results from different code paths compare directly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SectionTag {
    SwissProt,
    TrEMBL,
}

impl SectionTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SectionTag::SwissProt => "SwissProt",
            SectionTag::TrEMBL => "TrEMBL",
        }
    }
}

/// `Section:label`
pub fn release_key(section: SectionTag, label: &str) -> String {
    format!("{}:{label}", section.as_str())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceLabels {
    /// (first set, last set), each sorted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_origin: Option<(Vec<String>, Vec<String>)>,
    /// (cluster, last release before the gap, release where it is back), sorted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reappearing: Vec<(String, String, String)>,
    /// (cluster, the only release), sorted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transient: Vec<(String, String)>,
    /// (first TrEMBL release, first Swiss-Prot release).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trembl_origin: Option<(String, String)>,
}

impl SentenceLabels {
    pub fn is_empty(&self) -> bool {
        self.missing_origin.is_none()
            && self.reappearing.is_empty()
            && self.transient.is_empty()
            && self.trembl_origin.is_none()
    }

    pub fn normalize(&mut self) {
        if let Some((f, l)) = self.missing_origin.as_mut() {
            f.sort();
            l.sort();
        }
        self.reappearing.sort();
        self.transient.sort();
    }
}

/// Labels by canonical sentence text; sentences without any pattern are absent.
pub type Labels = BTreeMap<String, SentenceLabels>;

/// Number of labelled sentences per pattern, in the order missing origin,
/// reappearing, transient, TrEMBL origin.
pub fn label_counts(labels: &Labels) -> [u64; 4] {
    let mut counts = [0u64; 4];
    for l in labels.values() {
        counts[0] += l.missing_origin.is_some() as u64;
        counts[1] += !l.reappearing.is_empty() as u64;
        counts[2] += !l.transient.is_empty() as u64;
        counts[3] += l.trembl_origin.is_some() as u64;
    }
    counts
}
