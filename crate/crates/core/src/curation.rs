//! Curator classification of flagged sentences.
//!
//! Four questions are asked in order:
//!
//! 1. Does the sentence occur in over 100 entry clusters? (answered from the store)
//! 2. Has it been propagated from an origin entry?
//! 3. Was the origin updated in a way relevant to the propagated copy?
//! 4. Does that update affect the accuracy of the copy?
//!
//! Questions 2-4 take yes, no or insufficient evidence. The first "no" ends
//! the walk as accurate; insufficient evidence anywhere ends it as possibly
//! erroneous.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::store::SentenceId;

/// Sentences found in more clusters than this are not examined by hand.
pub const TOO_MANY_THRESHOLD: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Yes,
    No,
    InsufficientEvidence,
}

impl Answer {
    pub const ALL: [Answer; 3] = [Answer::Yes, Answer::No, Answer::InsufficientEvidence];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Erroneous,
    Inconsistent,
    Accurate,
    TooManyResults,
    PossiblyErroneous,
}

impl Classification {
    pub const ALL: [Classification; 5] = [
        Classification::Erroneous,
        Classification::Inconsistent,
        Classification::Accurate,
        Classification::TooManyResults,
        Classification::PossiblyErroneous,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Question {
    OverThreshold,
    Propagated,
    UpdateRelevant,
    AffectsAccuracy,
}

/// Leaf for a full set of answers. Answers past the point where the walk
/// stops are ignored.
pub fn decide(over_threshold: bool, propagated: Answer, update_relevant: Answer, affects_accuracy: Answer) -> Classification {
    if over_threshold {
        return Classification::TooManyResults;
    }
    match propagated {
        Answer::No => return Classification::Accurate,
        Answer::InsufficientEvidence => return Classification::PossiblyErroneous,
        Answer::Yes => {}
    }
    match update_relevant {
        Answer::No => return Classification::Accurate,
        Answer::InsufficientEvidence => return Classification::PossiblyErroneous,
        Answer::Yes => {}
    }
    match affects_accuracy {
        Answer::Yes => Classification::Erroneous,
        Answer::No => Classification::Inconsistent,
        Answer::InsufficientEvidence => Classification::PossiblyErroneous,
    }
}

/// Answers to the protocol questions in order. Q1 is a plain yes/no.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecisionPath {
    pub q1: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q2: Option<Answer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q3: Option<Answer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q4: Option<Answer>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PathError {
    #[error("decision path stops before a classification is reached; {0:?} is unanswered")]
    Incomplete(Question),
    #[error("decision path answers {0:?} after the walk has already ended")]
    Overlong(Question),
}

impl DecisionPath {
    pub fn new(q1: bool, q2: Option<Answer>, q3: Option<Answer>, q4: Option<Answer>) -> Self {
        DecisionPath { q1: Some(q1), q2, q3, q4 }
    }

    /// Walks the tree. Every question on the walk must be answered and none
    /// after the leaf.
    pub fn evaluate(&self) -> Result<Classification, PathError> {
        let q1 = self.q1.ok_or(PathError::Incomplete(Question::OverThreshold))?;
        let rest = [
            (Question::Propagated, self.q2),
            (Question::UpdateRelevant, self.q3),
            (Question::AffectsAccuracy, self.q4),
        ];
        let stops_after = if q1 {
            0
        } else {
            let mut n = 0;
            loop {
                let (q, a) = rest[n];
                let a = a.ok_or(PathError::Incomplete(q))?;
                n += 1;
                if n == 3 || a != Answer::Yes {
                    break n;
                }
            }
        };
        if let Some((q, _)) = rest[stops_after..].iter().find(|(_, a)| a.is_some()) {
            return Err(PathError::Overlong(*q));
        }
        Ok(decide(
            q1,
            self.q2.unwrap_or(Answer::Yes),
            self.q3.unwrap_or(Answer::Yes),
            self.q4.unwrap_or(Answer::Yes),
        ))
    }
}

/// A stored classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub sentence_id: SentenceId,
    pub classification: Classification,
    pub decision_path: DecisionPath,
    pub analyst: String,
    pub timestamp: DateTime<Utc>,
    #[serde(default)]
    pub notes: String,
}

/// A classification as submitted, before the server fills in Q1 and time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationRequest {
    pub sentence_id: SentenceId,
    pub classification: Classification,
    pub decision_path: DecisionPath,
    pub analyst: String,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    /// The claimed classification disagrees with the walk of the path.
    #[error("decision path leads to {expected:?}, not {claimed:?}")]
    Mismatch {
        claimed: Classification,
        expected: Classification,
    },
    #[error("too many results requires over {TOO_MANY_THRESHOLD} clusters; this sentence has {clusters}")]
    BelowThreshold { clusters: usize },
    #[error(transparent)]
    Path(PathError),
    #[error("analyst must not be empty")]
    NoAnalyst,
}

/// Checks a request against the sentence's lifetime cluster count and turns
/// it into a record. Q1 is always answered from `clusters`: above the
/// threshold the record becomes too-many-results whatever was submitted.
pub fn validate(
    request: ClassificationRequest,
    clusters: usize,
    now: DateTime<Utc>,
) -> Result<ClassificationRecord, ValidationError> {
    if request.analyst.trim().is_empty() {
        return Err(ValidationError::NoAnalyst);
    }
    let over = clusters > TOO_MANY_THRESHOLD;
    if request.classification == Classification::TooManyResults && !over {
        return Err(ValidationError::BelowThreshold { clusters });
    }
    let (classification, decision_path) = if over {
        (Classification::TooManyResults, DecisionPath::new(true, None, None, None))
    } else {
        let path = DecisionPath {
            q1: Some(false),
            ..request.decision_path
        };
        let expected = path.evaluate().map_err(ValidationError::Path)?;
        if expected != request.classification {
            return Err(ValidationError::Mismatch {
                claimed: request.classification,
                expected,
            });
        }
        (expected, path)
    };
    Ok(ClassificationRecord {
        sentence_id: request.sentence_id,
        classification,
        decision_path,
        analyst: request.analyst,
        timestamp: now,
        notes: request.notes,
    })
}

/// Append-only JSON-lines log of classifications; earlier records of a
/// sentence are kept as its history.
#[derive(Debug)]
pub struct ClassificationLog {
    path: PathBuf,
    records: Vec<ClassificationRecord>,
    file: File,
}

impl ClassificationLog {
    pub fn open(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).read(true).open(path)?;
        let mut records = Vec::new();
        for (i, line) in BufReader::new(&file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(&line).map_err(|e| {
                io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), i + 1),
                )
            })?;
            records.push(record);
        }
        Ok(ClassificationLog {
            path: path.to_owned(),
            records,
            file,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: ClassificationRecord) -> io::Result<()> {
        let mut line = serde_json::to_vec(&record).map_err(io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        self.records.push(record);
        Ok(())
    }

    /// Records for one sentence, oldest first.
    pub fn history(&self, sentence: SentenceId) -> Vec<ClassificationRecord> {
        self.records
            .iter()
            .filter(|r| r.sentence_id == sentence)
            .cloned()
            .collect()
    }

    pub fn all(&self) -> &[ClassificationRecord] {
        &self.records
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Answer::*;

    fn request(path: DecisionPath, classification: Classification) -> ClassificationRequest {
        ClassificationRequest {
            sentence_id: SentenceId(1),
            classification,
            decision_path: path,
            analyst: "curator".into(),
            notes: String::new(),
        }
    }

    #[test]
    fn worked_example_is_erroneous() {
        let path = DecisionPath::new(false, Some(Yes), Some(Yes), Some(Yes));
        assert_eq!(path.evaluate(), Ok(Classification::Erroneous));
        assert_eq!(decide(false, Yes, Yes, Yes), Classification::Erroneous);
    }

    #[test]
    fn insufficient_evidence_is_possibly_erroneous() {
        let path = DecisionPath::new(false, Some(InsufficientEvidence), None, None);
        assert_eq!(path.evaluate(), Ok(Classification::PossiblyErroneous));
    }

    #[test]
    fn path_shape_errors() {
        assert_eq!(
            DecisionPath::new(false, Some(Yes), None, None).evaluate(),
            Err(PathError::Incomplete(Question::UpdateRelevant))
        );
        assert_eq!(
            DecisionPath::new(false, Some(No), Some(Yes), None).evaluate(),
            Err(PathError::Overlong(Question::UpdateRelevant))
        );
        assert_eq!(
            DecisionPath::new(true, Some(Yes), None, None).evaluate(),
            Err(PathError::Overlong(Question::Propagated))
        );
        assert_eq!(
            DecisionPath::default().evaluate(),
            Err(PathError::Incomplete(Question::OverThreshold))
        );
    }

    #[test]
    fn server_answers_the_threshold_question() {
        let now = Utc::now();
        let path = DecisionPath::new(false, Some(Yes), Some(Yes), Some(Yes));
        let forced = validate(request(path.clone(), Classification::Erroneous), 150, now).unwrap();
        assert_eq!(forced.classification, Classification::TooManyResults);
        assert_eq!(forced.decision_path, DecisionPath::new(true, None, None, None));

        assert_eq!(
            validate(request(path.clone(), Classification::TooManyResults), 100, now),
            Err(ValidationError::BelowThreshold { clusters: 100 })
        );
        // a client claiming q1 = yes is overridden by the store
        let claimed = DecisionPath { q1: Some(true), ..path.clone() };
        let ok = validate(request(claimed, Classification::Erroneous), 3, now).unwrap();
        assert_eq!(ok.decision_path.q1, Some(false));
        assert!(matches!(
            validate(request(path, Classification::Accurate), 3, now),
            Err(ValidationError::Mismatch { .. })
        ));
    }

    #[test]
    fn log_round_trips_and_keeps_history() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("classifications.jsonl");
        let now = Utc::now();
        let a = validate(
            request(DecisionPath::new(false, Some(No), None, None), Classification::Accurate),
            2,
            now,
        )
        .unwrap();
        let b = validate(
            request(DecisionPath::new(false, Some(Yes), Some(Yes), Some(No)), Classification::Inconsistent),
            2,
            now,
        )
        .unwrap();
        {
            let mut log = ClassificationLog::open(&path).unwrap();
            log.append(a.clone()).unwrap();
            log.append(b.clone()).unwrap();
        }
        let log = ClassificationLog::open(&path).unwrap();
        assert_eq!(log.history(SentenceId(1)), vec![a, b]);
        assert!(log.history(SentenceId(2)).is_empty());
    }
}
