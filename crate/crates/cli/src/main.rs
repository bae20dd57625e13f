use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use annotrace::api::{router, ApiConfig, AppState};
use annotrace::commands::{self, Format};
use annotrace::views::DEFAULT_ENTRY_URL;
use annotrace_core::curation::ClassificationLog;
use annotrace_core::ingest::IngestOptions;
use annotrace_core::patterns::ScanFilter;
use annotrace_core::stats::StatsOptions;
use annotrace_core::Section;
use annotrace_synth::{generate, GeneratorParams};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "annotrace", version, about = "Sentence provenance across flat-file database releases")]
struct Cli {
    /// Store file.
    #[arg(long, global = true, default_value = "annotrace.store")]
    store: PathBuf,
    /// Abbreviation lexicon for sentence segmentation (built-in list if omitted).
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest the releases listed in a manifest (section, label, date, path).
    Ingest {
        manifest: PathBuf,
        /// Release files parsed concurrently.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Per-release reuse statistics.
    Stats {
        /// Only this section (both if omitted).
        #[arg(long)]
        section: Option<Section>,
        #[arg(long, value_enum, default_value = "tsv")]
        format: Format,
        /// Count a sentence repeated within one entry once per mention.
        #[arg(long)]
        count_repeats: bool,
        /// Output file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write one data file per plotted quantity into this directory.
        #[arg(long)]
        plot_dir: Option<PathBuf>,
    },
    /// Detect propagation patterns; writes patterns.jsonl and pattern_summary.tsv.
    Detect {
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        latest: Latest,
    },
    /// Write the store as a tab-separated bundle.
    Export {
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild an empty store from an exported bundle.
    Import { bundle: PathBuf },
    /// Serve the /v1 JSON API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Classification log (defaults to <store>.classifications.jsonl).
        #[arg(long)]
        classifications: Option<PathBuf>,
        /// Entry link template; `{accession}` is replaced.
        #[arg(long, default_value = DEFAULT_ENTRY_URL)]
        entry_url: String,
        #[command(flatten)]
        latest: Latest,
    },
    /// Generate a synthetic corpus with its ground-truth ledger.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: SynthArgs,
        /// Skip ledger.json (useful for very large corpora).
        #[arg(long)]
        no_ledger: bool,
    },
}

#[derive(Args)]
struct Latest {
    /// Treat the release(s) with this label as the newest.
    #[arg(long = "latest-release")]
    label: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    swissprot_releases: usize,
    #[arg(long, default_value_t = 6)]
    trembl_releases: usize,
    #[arg(long, default_value_t = 60)]
    entries: usize,
    #[arg(long, default_value_t = 5000)]
    sentence_pool: usize,
    #[arg(long)]
    new_sentence_rate: Option<f64>,
    #[arg(long)]
    copy_rate: Option<f64>,
    #[arg(long)]
    removal_rate: Option<f64>,
    #[arg(long)]
    readd_rate: Option<f64>,
    #[arg(long)]
    merge_rate: Option<f64>,
}

impl SynthArgs {
    fn params(&self) -> GeneratorParams {
        let d = GeneratorParams::default();
        GeneratorParams {
            seed: self.seed,
            swissprot_releases: self.swissprot_releases,
            trembl_releases: self.trembl_releases,
            entry_count: self.entries,
            sentence_pool_size: self.sentence_pool,
            new_sentence_rate: self.new_sentence_rate.unwrap_or(d.new_sentence_rate),
            copy_rate: self.copy_rate.unwrap_or(d.copy_rate),
            removal_rate: self.removal_rate.unwrap_or(d.removal_rate),
            readd_rate: self.readd_rate.unwrap_or(d.readd_rate),
            merge_rate: self.merge_rate.unwrap_or(d.merge_rate),
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { manifest, workers } => {
            let seg = commands::segmenter(cli.lexicon.as_deref())?;
            let mut options = IngestOptions::default();
            if let Some(w) = workers {
                options.workers = w.max(1);
            }
            let reports = commands::run_ingest(&cli.store, &manifest, &seg, options)?;
            commands::write_ingest_report(&reports, io::stdout().lock())?;
            for r in &reports {
                for d in r.diagnostics.iter().filter(|d| !d.is_removal()) {
                    eprintln!("{}:{}:{}: {}", r.section, d.release_label, d.line_no, d.reason);
                }
            }
        }
        Command::Stats {
            section,
            format,
            count_repeats,
            out,
            plot_dir,
        } => {
            let (_lock, corpus) = commands::open_read(&cli.store)?;
            let sections: Vec<Section> = section.map(|s| vec![s]).unwrap_or_else(|| Section::ALL.to_vec());
            let options = StatsOptions { count_repeats };
            match &out {
                Some(path) => {
                    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
                    commands::write_stats(&corpus, &sections, options, format, file)?;
                }
                None => commands::write_stats(&corpus, &sections, options, format, io::stdout().lock())?,
            }
            if let Some(dir) = plot_dir {
                commands::write_plot_data(&corpus, options, &dir)?;
            }
        }
        Command::Detect { out, latest } => {
            let (_lock, corpus) = commands::open_read(&cli.store)?;
            let filter = ScanFilter {
                latest_label: latest.label,
            };
            let summary = commands::run_detect(&corpus, &filter, &out)?;
            summary.write_tsv(io::stdout().lock())?;
        }
        Command::Export { out } => commands::run_export(&cli.store, &out)?,
        Command::Import { bundle } => commands::run_import(&cli.store, &bundle)?,
        Command::Serve {
            bind,
            classifications,
            entry_url,
            latest,
        } => {
            let (lock, corpus) = commands::open_read(&cli.store)?;
            let log_path = classifications.unwrap_or_else(|| {
                let mut p = cli.store.clone().into_os_string();
                p.push(".classifications.jsonl");
                PathBuf::from(p)
            });
            let log = ClassificationLog::open(&log_path).with_context(|| format!("opening {}", log_path.display()))?;
            let config = ApiConfig {
                entry_url,
                latest_label: latest.label,
            };
            let state = Arc::new(AppState::new(corpus, log, config)?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(bind).await?;
                eprintln!("serving on http://{}", listener.local_addr()?);
                axum::serve(listener, router(state))
                    .with_graceful_shutdown(async {
                        tokio::signal::ctrl_c().await.ok();
                    })
                    .await
            })?;
            drop(lock);
        }
        Command::Synth { out, params, no_ledger } => {
            let corpus = generate(&params.params())?;
            corpus.write_to(&out, !no_ledger)?;
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "wrote {} releases to {}", corpus.releases.len(), out.display())?;
        }
    }
    Ok(())
}
