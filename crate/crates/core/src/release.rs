//! Database releases and their global ordering.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// The two sections of the knowledgebase. Declaration order is the tie-break
/// order for releases published on the same date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Section {
    SwissProt,
    TrEMBL,
}

impl Section {
    pub const ALL: [Section; 2] = [Section::SwissProt, Section::TrEMBL];

    pub fn as_str(self) -> &'static str {
        match self {
            Section::SwissProt => "SwissProt",
            Section::TrEMBL => "TrEMBL",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown section {0:?} (expected SwissProt or TrEMBL)")]
pub struct UnknownSection(pub String);

impl FromStr for Section {
    type Err = UnknownSection;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_', '/'], "").as_str() {
            "swissprot" | "sp" => Ok(Section::SwissProt),
            "trembl" | "tr" => Ok(Section::TrEMBL),
            _ => Err(UnknownSection(s.to_string())),
        }
    }
}

/// One archived database version.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Release {
    pub section: Section,
    pub label: String,
    pub date: NaiveDate,
}

impl Release {
    pub fn new(section: Section, label: impl Into<String>, date: NaiveDate) -> Self {
        Release {
            section,
            label: label.into(),
            date,
        }
    }

    /// Total order used to assign global ordinals: date, then section
    /// (Swiss-Prot first), then label.
    pub fn chronological_cmp(&self, other: &Release) -> Ordering {
        self.date
            .cmp(&other.date)
            .then(self.section.cmp(&other.section))
            .then_with(|| self.label.cmp(&other.label))
    }
}

impl fmt::Display for Release {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ({})", self.section, self.label, self.date)
    }
}

/// 1-based position of a release in the global date-ordered sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ordinal(pub u32);

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}
