//! Random multi-release corpora with a record of every planted event.
//!
//! Releases of the two sections interleave on a half-yearly calendar. At each
//! release, entries of that section may lose sentences, get earlier losses
//! back, copy a sentence from another entry or gain a brand-new one, and two
//! entries may merge (a TrEMBL entry may be absorbed by a Swiss-Prot one).
//! A merged entry keeps the sentences of both sides.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use chrono::{Months, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::labels::SectionTag;
use crate::ledger::{Event, GroundTruthLedger, LedgerEntry, LedgerRelease};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub seed: u64,
    pub swissprot_releases: usize,
    pub trembl_releases: usize,
    pub entry_count: usize,
    /// Upper bound on distinct sentence texts.
    pub sentence_pool_size: usize,
    /// Per entry and release: chance of gaining a never-seen sentence.
    pub new_sentence_rate: f64,
    /// Per entry and release: chance of copying a sentence from another entry.
    pub copy_rate: f64,
    /// Per sentence held: chance of losing it at a release.
    pub removal_rate: f64,
    /// Per sentence lost earlier: chance of getting it back at a release.
    pub readd_rate: f64,
    /// Per release: chance that two entries merge.
    pub merge_rate: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            seed: 42,
            swissprot_releases: 8,
            trembl_releases: 6,
            entry_count: 60,
            sentence_pool_size: 5000,
            new_sentence_rate: 0.35,
            copy_rate: 0.25,
            removal_rate: 0.1,
            readd_rate: 0.3,
            merge_rate: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamError {
    #[error("{name} = {value} is not a probability")]
    NotProbability { name: &'static str, value: f64 },
    #[error("entry_count {0} does not fit five-digit accessions")]
    TooManyEntries(usize),
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, value) in [
            ("new_sentence_rate", self.new_sentence_rate),
            ("copy_rate", self.copy_rate),
            ("removal_rate", self.removal_rate),
            ("readd_rate", self.readd_rate),
            ("merge_rate", self.merge_rate),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ParamError::NotProbability { name, value });
            }
        }
        if self.entry_count > 100_000 {
            return Err(ParamError::TooManyEntries(self.entry_count));
        }
        Ok(())
    }
}

const WORDS: [&str; 64] = [
    "binds", "zinc", "calcium", "kinase", "activity", "requires", "magnesium", "inhibited", "by",
    "phosphorylation", "membrane", "nuclear", "protein", "domain", "repeat", "family", "subunit",
    "complex", "catalyzes", "transfer", "of", "group", "from", "donor", "acceptor", "site",
    "active", "cleaves", "peptide", "bond", "expressed", "in", "liver", "kidney", "brain",
    "muscle", "during", "development", "stress", "response", "induced", "heat", "shock",
    "oxidative", "damage", "repair", "replication", "transcription", "factor", "regulates",
    "expression", "target", "genes", "interacts", "with", "receptor", "ligand", "signal",
    "pathway", "component", "belongs", "to", "the", "cytoplasm",
];

/// The `index`-th synthetic sentence; distinct indices give distinct texts.
pub fn sentence_text(index: usize) -> String {
    let mut words = Vec::with_capacity(6);
    let mut n = index;
    for _ in 0..5 {
        words.push(WORDS[n % WORDS.len()]);
        n /= WORDS.len();
    }
    // indices beyond 64^5 get a numeric tail
    let mut text = String::new();
    for (i, w) in words.iter().enumerate() {
        if i == 0 {
            let mut chars = w.chars();
            let first = chars.next().unwrap().to_ascii_uppercase();
            text.push(first);
            text.push_str(chars.as_str());
        } else {
            text.push(' ');
            text.push_str(w);
        }
    }
    if n > 0 {
        write!(text, " {n}").unwrap();
    }
    text.push('.');
    text
}

#[derive(Debug, Clone)]
struct EntryState {
    section: SectionTag,
    accessions: Vec<String>,
    created: bool,
    alive: bool,
    current: Vec<usize>,
    lost: BTreeSet<usize>,
}

/// One generated release file in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedRelease {
    pub section: SectionTag,
    pub label: String,
    pub date: NaiveDate,
    pub text: String,
}

impl GeneratedRelease {
    pub fn file_name(&self) -> String {
        match self.section {
            SectionTag::SwissProt => format!("sprot{}.dat", self.label),
            SectionTag::TrEMBL => format!("trembl{}.dat", self.label),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub releases: Vec<GeneratedRelease>,
    pub ledger: GroundTruthLedger,
}

impl SyntheticCorpus {
    /// Writes the release files, `manifest.tsv` and, if asked, `ledger.json`.
    pub fn write_to(&self, dir: &Path, with_ledger: bool) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut manifest = String::from("section\tlabel\tdate\tpath\n");
        for r in &self.releases {
            fs::write(dir.join(r.file_name()), &r.text)?;
            writeln!(manifest, "{}\t{}\t{}\t{}", r.section.as_str(), r.label, r.date, r.file_name()).unwrap();
        }
        fs::write(dir.join("manifest.tsv"), manifest)?;
        if with_ledger {
            let json = serde_json::to_vec_pretty(&self.ledger.with_expected_labels()).map_err(io::Error::other)?;
            fs::write(dir.join("ledger.json"), json)?;
        }
        Ok(())
    }
}

fn schedule(params: &GeneratorParams) -> Vec<LedgerRelease> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
    let mut out = Vec::new();
    for i in 0..params.swissprot_releases {
        out.push(LedgerRelease {
            section: SectionTag::SwissProt,
            label: (i + 1).to_string(),
            date: start + Months::new(6 * i as u32),
        });
    }
    for i in 0..params.trembl_releases {
        out.push(LedgerRelease {
            section: SectionTag::TrEMBL,
            label: (i + 1).to_string(),
            date: start + Months::new(6 * i as u32 + 3),
        });
    }
    out.sort_by_key(|r| (r.date, r.section));
    out
}

const TOPICS: [&str; 4] = ["FUNCTION", "SUBUNIT", "TISSUE SPECIFICITY", "SIMILARITY"];

fn push_wrapped(out: &mut String, first_prefix: &str, text: &str) {
    let mut line = String::from(first_prefix);
    let mut has_words = false;
    for word in text.split(' ') {
        if has_words && line.len() + 1 + word.len() > 75 {
            out.push_str(&line);
            out.push('\n');
            line = String::from("CC       ");
            has_words = false;
        }
        if has_words {
            line.push(' ');
        }
        line.push_str(word);
        has_words = true;
    }
    out.push_str(&line);
    out.push('\n');
}

fn render_entry(out: &mut String, number: usize, accessions: &[String], sentences: &[usize]) {
    writeln!(out, "ID   SYN{number:05}_SYNTH   STANDARD;      PRT;   120 AA.").unwrap();
    writeln!(out, "AC   {};", accessions.join("; ")).unwrap();
    out.push_str("DE   Synthetic protein.\n");
    for (t, chunk) in sentences.chunks(3).enumerate() {
        let body: Vec<String> = chunk.iter().map(|&s| sentence_text(s)).collect();
        let heading = format!("CC   -!- {}: ", TOPICS[t % TOPICS.len()]);
        push_wrapped(out, &heading, &body.join(" "));
    }
    if !sentences.is_empty() {
        out.push_str("CC   -----------------------------------------------------------------------\n");
        out.push_str("CC   Synthetic data, distributed without restriction.\n");
        out.push_str("CC   -----------------------------------------------------------------------\n");
    }
    out.push_str("SQ   SEQUENCE   120 AA;  13000 MW;  0000000000000000 CRC64;\n");
    out.push_str("     MKTAYIAKQR QISFVKSHFS RQLEERLGLI EVQAPILSRV GDGTQDNLSG\n");
    out.push_str("//\n");
}

pub fn generate(params: &GeneratorParams) -> Result<SyntheticCorpus, ParamError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let releases = schedule(params);

    let mut entries: Vec<EntryState> = (0..params.entry_count)
        .map(|i| {
            let section = if i % 3 == 2 { SectionTag::TrEMBL } else { SectionTag::SwissProt };
            let prefix = if section == SectionTag::TrEMBL { 'Q' } else { 'P' };
            EntryState {
                section,
                accessions: vec![format!("{prefix}{i:05}")],
                created: false,
                alive: true,
                current: Vec::new(),
                lost: BTreeSet::new(),
            }
        })
        .collect();
    let ledger_entries: Vec<LedgerEntry> = entries
        .iter()
        .map(|e| LedgerEntry {
            accession: e.accessions[0].clone(),
            section: e.section,
        })
        .collect();
    // most entries exist from their section's first release, the rest are born later
    let births: Vec<usize> = entries
        .iter()
        .map(|e| {
            let n = match e.section {
                SectionTag::SwissProt => params.swissprot_releases,
                SectionTag::TrEMBL => params.trembl_releases,
            };
            if n > 1 && rng.random_bool(0.3) {
                rng.random_range(1..n)
            } else {
                0
            }
        })
        .collect();

    let mut events = Vec::new();
    let mut next_fresh = 0usize;
    let mut seen_in_section = [0usize; 2];
    let mut generated = Vec::with_capacity(releases.len());

    for (r, release) in releases.iter().enumerate() {
        let section = release.section;
        let section_step = seen_in_section[section as usize];
        seen_in_section[section as usize] += 1;

        for (i, e) in entries.iter_mut().enumerate() {
            if e.section == section && !e.created && births[i] <= section_step {
                e.created = true;
                events.push(Event::Create { release: r, entry: i });
            }
        }

        if rng.random_bool(params.merge_rate) {
            let survivors: Vec<usize> = (0..entries.len())
                .filter(|&i| entries[i].alive && entries[i].created && entries[i].section == section)
                .collect();
            let absorbable: Vec<usize> = (0..entries.len())
                .filter(|&i| {
                    let e = &entries[i];
                    e.alive && e.created && (e.section == section || section == SectionTag::SwissProt)
                })
                .collect();
            if !survivors.is_empty() && absorbable.len() >= 2 {
                let survivor = survivors[rng.random_range(0..survivors.len())];
                let mut absorbed = absorbable[rng.random_range(0..absorbable.len())];
                if absorbed == survivor {
                    absorbed = absorbable[(absorbable.iter().position(|&x| x == survivor).unwrap() + 1) % absorbable.len()];
                }
                let gone = std::mem::replace(
                    &mut entries[absorbed],
                    EntryState {
                        section: SectionTag::SwissProt,
                        accessions: Vec::new(),
                        created: true,
                        alive: false,
                        current: Vec::new(),
                        lost: BTreeSet::new(),
                    },
                );
                entries[absorbed].section = gone.section;
                let s = &mut entries[survivor];
                for x in gone.current {
                    if !s.current.contains(&x) {
                        s.current.push(x);
                    }
                }
                s.lost.extend(gone.lost);
                let current = s.current.clone();
                s.lost.retain(|x| !current.contains(x));
                s.accessions.extend(gone.accessions);
                events.push(Event::Merge { release: r, survivor, absorbed });
            }
        }

        let donors: Vec<usize> = (0..entries.len())
            .filter(|&i| entries[i].alive && entries[i].created && !entries[i].current.is_empty())
            .collect();
        for i in 0..entries.len() {
            if !(entries[i].alive && entries[i].created && entries[i].section == section) {
                continue;
            }
            let mut removed_now = Vec::new();
            let held = entries[i].current.clone();
            for s in held {
                if rng.random_bool(params.removal_rate) {
                    entries[i].current.retain(|&x| x != s);
                    removed_now.push(s);
                    events.push(Event::Remove { release: r, entry: i, sentence: s });
                }
            }
            let lost: Vec<usize> = entries[i].lost.iter().copied().collect();
            for s in lost {
                if rng.random_bool(params.readd_rate) {
                    entries[i].lost.remove(&s);
                    entries[i].current.push(s);
                    events.push(Event::ReAdd { release: r, entry: i, sentence: s });
                }
            }
            entries[i].lost.extend(removed_now);
            if !donors.is_empty() && rng.random_bool(params.copy_rate) {
                let donor = donors[rng.random_range(0..donors.len())];
                let candidates: Vec<usize> = entries[donor]
                    .current
                    .iter()
                    .copied()
                    .filter(|s| !entries[i].current.contains(s))
                    .collect();
                if donor != i && !candidates.is_empty() {
                    let s = candidates[rng.random_range(0..candidates.len())];
                    entries[i].lost.remove(&s);
                    entries[i].current.push(s);
                    events.push(Event::Add {
                        release: r,
                        entry: i,
                        sentence: s,
                        source: Some(donor),
                    });
                }
            }
            if next_fresh < params.sentence_pool_size && rng.random_bool(params.new_sentence_rate) {
                let s = next_fresh;
                next_fresh += 1;
                entries[i].current.push(s);
                events.push(Event::Add {
                    release: r,
                    entry: i,
                    sentence: s,
                    source: None,
                });
            }
        }

        let mut text = String::new();
        let mut number = 0;
        for e in &entries {
            if e.alive && e.created && e.section == section {
                render_entry(&mut text, number, &e.accessions, &e.current);
                number += 1;
            }
        }
        generated.push(GeneratedRelease {
            section,
            label: release.label.clone(),
            date: release.date,
            text,
        });
    }

    Ok(SyntheticCorpus {
        releases: generated,
        ledger: GroundTruthLedger {
            params: params.clone(),
            releases,
            entries: ledger_entries,
            events,
            expected: None,
        },
    })
}
