//! Rule-based sentence segmentation and canonical sentence normalization.
//!
//! A sentence ends at a full stop followed by whitespace and an upper-case
//! letter or a digit, or at the end of a topic block (a line break in the
//! cleaned comment text), unless the stop closes an abbreviation from the
//! [`Lexicon`]. Decimal points never qualify because no whitespace follows
//! them. Unterminated trailing text is a sentence of its own.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

const BUILTIN_LEXICON: &str = include_str!("../data/abbreviations.txt");

/// Abbreviations whose trailing full stop does not end a sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    entries: Vec<String>,
    version: Option<String>,
}

impl Lexicon {
    /// Parses the lexicon file format: one abbreviation per line, `#` comments.
    /// A `# lexicon-version: N` comment sets the version tag.
    pub fn parse(source: &str) -> Self {
        let mut entries = Vec::new();
        let mut version = None;
        for line in source.lines() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("lexicon-version:") {
                    version = Some(v.trim().to_owned());
                }
                continue;
            }
            if !line.is_empty() {
                entries.push(line.to_ascii_lowercase());
            }
        }
        // Longest first so "subsp." wins over "sp." in reports; matching itself
        // is order independent.
        entries.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        entries.dedup();
        Lexicon { entries, version }
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        Ok(Self::parse(&fs::read_to_string(path)?))
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_LEXICON)
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn version(&self) -> Option<&str> {
        self.version.as_deref()
    }

    /// Does `prefix` (text up to and including a full stop) end with an
    /// abbreviation standing as a word of its own?
    pub fn ends_with_abbreviation(&self, prefix: &str) -> bool {
        self.entries.iter().any(|abbr| {
            let Some(start) = prefix.len().checked_sub(abbr.len()) else {
                return false;
            };
            if !prefix.is_char_boundary(start) || !prefix[start..].eq_ignore_ascii_case(abbr) {
                return false;
            }
            match prefix[..start].chars().next_back() {
                None => true,
                Some(c) => c.is_whitespace() || matches!(c, '(' | '[' | '"' | '\''),
            }
        })
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::builtin()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Segmenter {
    lexicon: Lexicon,
}

impl Segmenter {
    pub fn new(lexicon: Lexicon) -> Self {
        Segmenter { lexicon }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    /// Splits cleaned comment text into raw sentences, in order.
    pub fn segment<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let mut out = Vec::new();
        for block in text.split('\n') {
            self.segment_block(block, &mut out);
        }
        out
    }

    fn segment_block<'a>(&self, block: &'a str, out: &mut Vec<&'a str>) {
        let mut start = 0;
        for (i, c) in block.char_indices() {
            if c != '.' {
                continue;
            }
            let end = i + 1;
            let rest = &block[end..];
            let after_space = rest.trim_start();
            if after_space.len() == rest.len() {
                // no whitespace after the stop (decimal, "UGA.x", or end of block)
                continue;
            }
            let Some(next) = after_space.chars().next() else {
                continue;
            };
            if !(next.is_uppercase() || next.is_ascii_digit()) {
                continue;
            }
            if self.lexicon.ends_with_abbreviation(&block[start..end]) {
                continue;
            }
            push_trimmed(&block[start..end], out);
            start = end;
        }
        push_trimmed(&block[start..], out);
    }
}

fn push_trimmed<'a>(s: &'a str, out: &mut Vec<&'a str>) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s);
    }
}

/// Splits with the built-in lexicon.
pub fn segment(text: &str) -> Vec<&str> {
    thread_local! {
        static DEFAULT: Segmenter = Segmenter::default();
    }
    DEFAULT.with(|seg| seg.segment(text).into_iter().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NormalizeError {
    #[error("sentence is empty or whitespace only")]
    Blank,
}

/// Lower-cases, collapses whitespace runs to single spaces and trims.
/// Punctuation is kept verbatim.
pub fn normalize(raw: &str) -> Result<String, NormalizeError> {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    if out.is_empty() {
        Err(NormalizeError::Blank)
    } else {
        Ok(out)
    }
}

/// True iff `text` is already in canonical form.
pub fn is_canonical(text: &str) -> bool {
    matches!(normalize(text), Ok(n) if n == text)
}

/// A normalized sentence with its interned id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanonicalSentence {
    pub id: u32,
    pub text: String,
}

/// Canonical sentences of one entry's comment text in first-seen order, each
/// with the number of times it was mentioned in the text.
pub fn entry_sentences(segmenter: &Segmenter, comment_text: &str) -> Vec<(String, u32)> {
    let mut out: Vec<(String, u32)> = Vec::new();
    for raw in segmenter.segment(comment_text) {
        let Ok(canonical) = normalize(raw) else {
            continue;
        };
        match out.iter_mut().find(|(text, _)| *text == canonical) {
            Some((_, mentions)) => *mentions += 1,
            None => out.push((canonical, 1)),
        }
    }
    out
}
