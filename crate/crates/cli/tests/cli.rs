use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use annotrace_synth::{generate, label_counts, GeneratorParams};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn run(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_annotrace"))
        .arg("--store")
        .arg(store)
        .args(args)
        .output()
        .unwrap()
}

fn ok(store: &Path, args: &[&str]) -> String {
    let out = run(store, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ingest_reports_counts_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s.store");
    let manifest = fixtures().join("cyanide/manifest.tsv");
    let first = ok(&store, &["ingest", path(&manifest)]);
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("TrEMBL\t1\t1996-11-01\tingested\t2\t2\t3\t2\t0"), "{}", lines[1]);
    let again = ok(&store, &["ingest", path(&manifest)]);
    assert!(again.lines().skip(1).all(|l| l.contains("\tskipped\t")), "{again}");
    let size = fs::metadata(&store).unwrap().len();
    ok(&store, &["ingest", path(&manifest)]);
    assert_eq!(fs::metadata(&store).unwrap().len(), size);
}

#[test]
fn empty_manifest_and_empty_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s.store");
    let manifest = dir.path().join("m.tsv");
    fs::write(&manifest, "section\tlabel\tdate\tpath\n").unwrap();
    let report = ok(&store, &["ingest", path(&manifest)]);
    assert_eq!(report.lines().count(), 1);
    let stats = ok(&store, &["stats"]);
    assert_eq!(stats, format!("{}\n", annotrace_core::stats::SERIES_HEADER));
    let json = ok(&store, &["stats", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["series"][0]["points"], serde_json::json!([]));
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("missing.store");
    for args in [&["stats"][..], &["detect"], &["export", "--out", "x"]] {
        let out = run(&store, args);
        assert!(!out.status.success(), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
    }
    assert!(!run(&store, &["ingest", "/nonexistent/manifest.tsv"]).status.success());

    let store = dir.path().join("s.store");
    ok(&store, &["ingest", path(&fixtures().join("cyanide/manifest.tsv"))]);
    let out = run(&store, &["detect", "--out", path(dir.path()), "--latest-release", "nope"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));

    // an older Swiss-Prot release after a newer one is a date regression
    let regress = dir.path().join("regress.tsv");
    fs::write(
        &regress,
        format!("SwissProt\t34\t1996-01-01\t{}\n", path(&fixtures().join("cyanide/sprot35.dat"))),
    )
    .unwrap();
    assert!(!run(&store, &["ingest", path(&regress)]).status.success());
}

#[test]
fn stats_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s.store");
    ok(&store, &["ingest", path(&fixtures().join("cyanide/manifest.tsv"))]);
    let plots = dir.path().join("plots");
    let tsv = ok(&store, &["stats", "--section", "trembl", "--plot-dir", path(&plots)]);
    assert_eq!(tsv.lines().count(), 3);
    for file in [
        "sentence_counts.tsv",
        "sentences_per_entry.tsv",
        "unannotated_entries.tsv",
        "unique_fraction.tsv",
        "reuse_distribution.tsv",
    ] {
        let text = fs::read_to_string(plots.join(file)).unwrap();
        assert!(text.lines().count() >= 2, "{file}");
    }
}

#[test]
fn synthetic_detect_summary_equals_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("synth");
    ok(&dir.path().join("unused"), &["synth", "--out", path(&data), "--seed", "42"]);
    assert!(data.join("ledger.json").exists());
    let store = dir.path().join("s.store");
    let report = ok(&store, &["ingest", path(&data.join("manifest.tsv"))]);

    let synth = generate(&GeneratorParams::default()).unwrap();
    let counts = synth.ledger.release_counts();
    for (line, expected) in report.lines().skip(1).zip(&counts) {
        let f: Vec<&str> = line.split('\t').collect();
        assert_eq!(f[4].parse::<u64>().unwrap(), expected.entries, "{line}");
        assert_eq!(f[5].parse::<u64>().unwrap(), expected.annotated_entries);
        assert_eq!(f[6].parse::<u64>().unwrap(), expected.sentences);
    }

    let out = dir.path().join("detect");
    ok(&store, &["detect", "--out", path(&out)]);
    let summary = fs::read_to_string(out.join("pattern_summary.tsv")).unwrap();
    let all: Vec<u64> = summary
        .lines()
        .skip(1)
        .take(4)
        .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(all, label_counts(&synth.ledger.expected_labels()).to_vec());
    let reports = fs::read_to_string(out.join("patterns.jsonl")).unwrap();
    assert_eq!(reports.lines().count() as u64, all.iter().sum::<u64>());
}

#[test]
fn export_import_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("a.store");
    ok(&store, &["ingest", path(&fixtures().join("selenocysteine/manifest.tsv"))]);
    let first = dir.path().join("first");
    ok(&store, &["export", "--out", path(&first)]);
    let copy = dir.path().join("b.store");
    ok(&copy, &["import", path(&first)]);
    let second = dir.path().join("second");
    ok(&copy, &["export", "--out", path(&second)]);
    for file in ["releases.tsv", "accessions.tsv", "sentences.tsv", "entries.tsv", "occurrences.tsv"] {
        assert_eq!(fs::read(first.join(file)).unwrap(), fs::read(second.join(file)).unwrap(), "{file}");
    }
    // importing into a non-empty store is refused
    assert!(!run(&copy, &["import", path(&first)]).status.success());
}
