//! The work behind each subcommand, separated from argument parsing so it
//! can be driven from tests.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use annotrace_core::ingest::{ingest, read_manifest, IngestOptions, ReleaseReport};
use annotrace_core::patterns::{scan_corpus, PatternSummary, ScanFilter};
use annotrace_core::segment::{Lexicon, Segmenter};
use annotrace_core::stats::{stats_series, series_row, StatsOptions, SERIES_HEADER};
use annotrace_core::store::{export_bundle, import_bundle, LockMode, StoreLock};
use annotrace_core::{Corpus, Section, StoreFile};
use anyhow::{bail, Context, Result};

use crate::views::{SeriesView, StatsPointView};

pub const PATTERNS_FILE: &str = "patterns.jsonl";
pub const SUMMARY_FILE: &str = "pattern_summary.tsv";

pub fn segmenter(lexicon: Option<&Path>) -> Result<Segmenter> {
    Ok(match lexicon {
        Some(path) => {
            Segmenter::new(Lexicon::load(path).with_context(|| format!("reading lexicon {}", path.display()))?)
        }
        None => Segmenter::default(),
    })
}

/// Loads a store for reading, holding a shared lock for as long as the
/// returned guard lives.
pub fn open_read(store: &Path) -> Result<(StoreLock, Corpus)> {
    if !store.exists() {
        bail!("store {} does not exist", store.display());
    }
    let lock = StoreLock::acquire(store, LockMode::Shared)?;
    let corpus = StoreFile::load(store).with_context(|| format!("loading store {}", store.display()))?;
    Ok((lock, corpus))
}

pub const INGEST_HEADER: &str =
    "section\tlabel\tdate\tstatus\tentries\tannotated_entries\tsentences\tnew_sentences\tbanners_removed\tproblems";

pub fn write_ingest_report<W: Write>(reports: &[ReleaseReport], mut out: W) -> io::Result<()> {
    writeln!(out, "{INGEST_HEADER}")?;
    for r in reports {
        let removed = r.diagnostics.iter().filter(|d| d.is_removal()).count();
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.section,
            r.label,
            r.date,
            if r.skipped { "skipped" } else { "ingested" },
            r.entries,
            r.annotated_entries,
            r.sentences,
            r.new_sentences,
            removed,
            r.diagnostics.len() - removed
        )?;
    }
    Ok(())
}

/// Ingests every release listed in `manifest` that the store does not hold yet.
pub fn run_ingest(store: &Path, manifest: &Path, segmenter: &Segmenter, options: IngestOptions) -> Result<Vec<ReleaseReport>> {
    let rows = read_manifest(manifest)?;
    let _lock = StoreLock::acquire(store, LockMode::Exclusive)?;
    let (mut file, mut corpus) = StoreFile::open(store)?;
    Ok(ingest(Some(&mut file), &mut corpus, &rows, segmenter, options)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Tsv,
    Json,
}

pub fn write_stats<W: Write>(corpus: &Corpus, sections: &[Section], options: StatsOptions, format: Format, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    match format {
        Format::Tsv => {
            writeln!(out, "{SERIES_HEADER}")?;
            for &section in sections {
                for point in stats_series(corpus, section, options) {
                    writeln!(out, "{}", series_row(&point))?;
                }
            }
        }
        Format::Json => {
            let series: Vec<SeriesView> = sections
                .iter()
                .map(|&section| SeriesView {
                    section: section.to_string(),
                    points: stats_series(corpus, section, options).iter().map(StatsPointView::from).collect(),
                })
                .collect();
            serde_json::to_writer_pretty(&mut out, &serde_json::json!({ "series": series }))?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// One data file per plotted quantity, both sections in each.
pub fn write_plot_data(corpus: &Corpus, options: StatsOptions, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let series: Vec<_> = Section::ALL.iter().map(|&s| stats_series(corpus, s, options)).collect();
    let prefix = |p: &annotrace_core::stats::SeriesPoint| format!("{}\t{}\t{}", p.release.section, p.release.label, p.release.date);

    let mut counts = BufWriter::new(File::create(dir.join("sentence_counts.tsv"))?);
    writeln!(counts, "section\tlabel\tdate\ttotal_sentences\tunique_sentences\tsingleton_sentences")?;
    let mut per_entry = BufWriter::new(File::create(dir.join("sentences_per_entry.tsv"))?);
    writeln!(per_entry, "section\tlabel\tdate\tavg_sentences_per_entry\tavg_entries_per_sentence")?;
    let mut unannotated = BufWriter::new(File::create(dir.join("unannotated_entries.tsv"))?);
    writeln!(unannotated, "section\tlabel\tdate\tentries\tunannotated_entries\tunannotated_fraction")?;
    let mut fractions = BufWriter::new(File::create(dir.join("unique_fraction.tsv"))?);
    writeln!(fractions, "section\tlabel\tdate\tunique_fraction\tsingleton_fraction")?;
    let mut spectrum = BufWriter::new(File::create(dir.join("reuse_distribution.tsv"))?);
    writeln!(spectrum, "section\tlabel\tentries_per_sentence\tsentences")?;

    for points in &series {
        for p in points {
            let s = &p.stats;
            writeln!(counts, "{}\t{}\t{}\t{}", prefix(p), s.total_sentences, s.unique_sentences, s.singleton_sentences)?;
            writeln!(
                per_entry,
                "{}\t{}\t{}",
                prefix(p),
                cell(s.avg_sentences_per_entry.value()),
                cell(s.avg_entries_per_sentence.value())
            )?;
            writeln!(
                unannotated,
                "{}\t{}\t{}\t{}",
                prefix(p),
                s.entries_total,
                s.entries_unannotated,
                cell(s.unannotated_fraction())
            )?;
            writeln!(fractions, "{}\t{}\t{}", prefix(p), cell(s.unique_fraction()), cell(s.singleton_fraction()))?;
        }
        // the distribution is drawn for the newest release of each section
        if let Some(p) = points.last() {
            for (k, n) in &p.stats.reuse_spectrum {
                writeln!(spectrum, "{}\t{}\t{k}\t{n}", p.release.section, p.release.label)?;
            }
        }
    }
    for mut w in [counts, per_entry, unannotated, fractions, spectrum] {
        w.flush()?;
    }
    Ok(())
}

/// Writes `patterns.jsonl` and `pattern_summary.tsv` into `dir`.
pub fn run_detect(corpus: &Corpus, filter: &ScanFilter, dir: &Path) -> Result<PatternSummary> {
    fs::create_dir_all(dir)?;
    let mut reports = BufWriter::new(File::create(dir.join(PATTERNS_FILE))?);
    let summary = scan_corpus(corpus, filter, |r| {
        serde_json::to_writer(&mut reports, r)?;
        reports.write_all(b"\n")
    })?;
    reports.flush()?;
    summary.write_tsv(BufWriter::new(File::create(dir.join(SUMMARY_FILE))?))?;
    Ok(summary)
}

pub fn run_export(store: &Path, dir: &Path) -> Result<()> {
    let (_lock, corpus) = open_read(store)?;
    export_bundle(&corpus, dir).with_context(|| format!("writing bundle to {}", dir.display()))?;
    Ok(())
}

/// Rebuilds a store from an exported bundle. The store must be new or empty.
pub fn run_import(store: &Path, dir: &Path) -> Result<()> {
    let _lock = StoreLock::acquire(store, LockMode::Exclusive)?;
    let (mut file, mut corpus) = StoreFile::open(store)?;
    import_bundle(dir, &mut corpus)?;
    file.commit(&mut corpus)?;
    Ok(())
}
