use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use dla_core::LayoutLabel;
use dla_corpus::{
    curate, edit_label, gazette_registry, retrain, revert_label, stats_from_layout, validate_document, verify, Corpus, LabelEdit,
};
use dla_eval::{generate_corpus, load_truth, run_protocol, score_document, ExtractionScore, ProtocolParams};

use dla_cli::acceptance;
use dla_cli::synthetic::{profile_for, template, TEMPLATE_NAMES};
use dla_cli::workflow::{ingest_into, supervise};

#[derive(Parser)]
#[command(name = "dla", version, about = "Layout annotation of native PDF gazettes")]
struct Cli {
    /// Corpus root directory.
    #[arg(long, global = true, env = "DLA_ROOT", default_value = "corpus")]
    root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes source profiles: the gazette registry, or profiles for synthetic templates.
    Init {
        /// Source ids named after synthetic templates, e.g. `single`, `hard`.
        #[arg(long = "synthetic")]
        synthetic: Vec<String>,
    },
    /// Generates synthetic PDFs with ground truth.
    Generate {
        #[arg(long, required = true)]
        template: Vec<String>,
        #[arg(long, default_value_t = 20)]
        docs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extracts PDF files or directories of PDFs into the corpus.
    Ingest {
        #[arg(long)]
        source: String,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Downloads URLs politely and ingests them.
    Fetch {
        #[arg(long)]
        source: String,
        urls: Vec<String>,
    },
    /// Per-source counts computed from the layout records.
    Stats {
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Checks the corpus for integrity problems; exits non-zero on any.
    Verify,
    /// Writes SVG overlays of a document's pages.
    Overlay { doc: String },
    /// Changes a text block's label.
    Label {
        doc: String,
        block: String,
        #[arg(long, conflicts_with = "set")]
        cycle: bool,
        #[arg(long)]
        set: Option<String>,
    },
    /// Restores a block's label as of a journal entry.
    Revert { doc: String, block: String, seq: u64 },
    /// Marks documents validated and runs a curation step.
    Validate {
        #[arg(required = true)]
        docs: Vec<String>,
    },
    /// Retrains a source's model now.
    Train { source: String },
    /// Runs the repeated train/test protocol on a source's validated documents.
    Eval {
        #[arg(long)]
        source: String,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scores stored extraction against generated ground truth.
    Score {
        #[arg(long)]
        truth: PathBuf,
    },
    /// Applies generated ground truth as supervisor corrections.
    Supervise {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 10)]
        batch: usize,
    },
    /// Serves the curation API.
    Serve {
        #[arg(long, env = "DLA_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Static files of the review UI.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
    /// Runs the end-to-end acceptance checks.
    Acceptance {
        #[arg(long, default_value = "acceptance-work")]
        work: PathBuf,
        #[arg(long, default_value_t = 60)]
        docs: usize,
        #[arg(long, default_value_t = 20)]
        seed: u64,
    },
}

fn open(root: &Path) -> anyhow::Result<Corpus> {
    Corpus::open(root).with_context(|| format!("opening corpus at {}", root.display()))
}

fn parse_label(s: &str) -> anyhow::Result<LayoutLabel> {
    if let Ok(code) = s.parse::<i64>() {
        return Ok(LayoutLabel::from_code(code)?);
    }
    s.parse::<LayoutLabel>().map_err(|e| anyhow::anyhow!("{e}"))
}

fn print_json<T: serde::Serialize>(v: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Init { synthetic } => {
            let corpus = open(&cli.root)?;
            if synthetic.is_empty() {
                for p in gazette_registry() {
                    corpus.save_profile(&p)?;
                }
                println!("wrote 24 gazette profiles");
            } else {
                for id in &synthetic {
                    let t = template(id).with_context(|| format!("unknown template {id}; expected one of {TEMPLATE_NAMES:?}"))?;
                    corpus.save_profile(&profile_for(id, &t))?;
                }
                println!("wrote {} synthetic profiles", synthetic.len());
            }
        }
        Command::Generate { template: names, docs, seed, out } => {
            let mut sources = Vec::new();
            for n in &names {
                sources.push((n.clone(), template(n).with_context(|| format!("unknown template {n}; expected one of {TEMPLATE_NAMES:?}"))?));
            }
            let g = generate_corpus(&sources, docs, seed, &out)?;
            println!("generated {} documents under {}", g.len(), out.display());
        }
        Command::Ingest { source, inputs } => {
            let corpus = open(&cli.root)?;
            let s = ingest_into(&corpus, &source, &inputs)?;
            print_json(&s)?;
            if !s.failed.is_empty() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Fetch { source, urls } => fetch(&cli.root, &source, urls)?,
        Command::Stats { source, json } => {
            let corpus = open(&cli.root)?;
            let t = stats_from_layout(&corpus, source.as_deref())?;
            if json {
                print_json(&t)?;
            } else {
                print!("{}", t.render());
            }
        }
        Command::Verify => {
            let r = verify(&open(&cli.root)?)?;
            for p in &r.problems {
                println!("{p}");
            }
            println!("{} documents, {} blocks, {} problems", r.documents, r.blocks, r.problems.len());
            if !r.ok() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Overlay { doc } => {
            for p in dla_corpus::overlay::write_overlays(&open(&cli.root)?, &doc)? {
                println!("{}", p.display());
            }
        }
        Command::Label { doc, block, cycle, set } => {
            let edit = match (cycle, set) {
                (true, _) => LabelEdit::Cycle,
                (false, Some(s)) => LabelEdit::Set(parse_label(&s)?),
                (false, None) => bail!("pass --cycle or --set LABEL"),
            };
            print_json(&edit_label(&open(&cli.root)?, &doc, &block, edit)?)?;
        }
        Command::Revert { doc, block, seq } => print_json(&revert_label(&open(&cli.root)?, &doc, &block, seq)?)?,
        Command::Validate { docs } => {
            let corpus = open(&cli.root)?;
            let mut by_source: std::collections::BTreeMap<String, Vec<String>> = Default::default();
            for d in &docs {
                let m = corpus.manifest(d)?;
                if validate_document(&corpus, d)? {
                    by_source.entry(m.source_id).or_default().push(d.clone());
                }
            }
            for (source, ids) in by_source {
                print_json(&curate(&corpus, &source, &ids)?)?;
            }
        }
        Command::Train { source } => print_json(&retrain(&open(&cli.root)?, &source)?)?,
        Command::Eval { source, repeats, seed, out } => {
            let corpus = open(&cli.root)?;
            let params = ProtocolParams { repeats, seed, ..Default::default() };
            let report = run_protocol(&corpus, &source, &params)?;
            print!("{}", report.render());
            let json = report.to_json();
            std::fs::write(corpus.path(&format!("sources/{source}/{}", dla_server::EVAL_FILE)), &json)?;
            if let Some(out) = out {
                std::fs::write(&out, &json).with_context(|| format!("writing {}", out.display()))?;
            }
        }
        Command::Score { truth } => {
            let corpus = open(&cli.root)?;
            let mut total = ExtractionScore::default();
            for t in load_truth(&truth)? {
                if !corpus.has_document(&t.doc_id) {
                    continue;
                }
                let records = corpus.layout(&t.doc_id)?;
                total.merge(&score_document(&t, &records, |rel| std::fs::read_to_string(corpus.path(rel)).ok()));
            }
            println!(
                "documents {} pages {} recall {:.4} precision {:.4} tables {}/{} exact cells {:.4} labels {:.4}",
                total.documents,
                total.pages,
                total.recall(),
                total.precision(),
                total.tables_shape_exact,
                total.tables_matched,
                total.cell_accuracy(),
                total.label_accuracy()
            );
        }
        Command::Supervise { truth, batch } => {
            let corpus = open(&cli.root)?;
            let truths = load_truth(&truth)?;
            let mut sources: Vec<&str> = truths.iter().map(|t| t.source_id.as_str()).collect();
            sources.sort();
            sources.dedup();
            for s in sources {
                let docs: Vec<_> = truths.iter().filter(|t| t.source_id == s && corpus.has_document(&t.doc_id)).collect();
                let r = supervise(&corpus, s, &docs, batch)?;
                let last = r.curation.last().map(|c| format!("{:?}, model v{}", c.state.mode, c.state.model_version)).unwrap_or_default();
                println!("{s}: {} documents, {} labels corrected, {} unmatched; {last}", r.documents, r.corrected, r.unmatched);
            }
        }
        Command::Serve { port, host, ui } => {
            let corpus = open(&cli.root)?;
            let rt = tokio::runtime::Runtime::new()?;
            let addr = std::net::SocketAddr::new(host, port);
            log::info!("listening on http://{addr}");
            rt.block_on(dla_server::serve(corpus, addr, ui))?;
        }
        Command::Acceptance { work, docs, seed } => {
            let cfg = acceptance::Config { docs_per_source: docs, seed, ..acceptance::Config::new(work) };
            let results = acceptance::run(&cfg, |o| println!("{}", o.line()));
            let passed = results.iter().filter(|o| o.passed).count();
            println!("{passed}/{} criteria passed", results.len());
            std::fs::write(cfg.work.join("acceptance.json"), serde_json::to_string_pretty(&results)?)?;
            if passed != results.len() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[cfg(feature = "http")]
fn fetch(root: &Path, source: &str, urls: Vec<String>) -> anyhow::Result<()> {
    use dla_corpus::fetch::{fetch_and_ingest, Fetcher, HttpTransport};
    let corpus = open(root)?;
    let profile = corpus.profile(source)?;
    if !profile.fetch.enabled {
        bail!("fetching is disabled in the profile of source {source}");
    }
    let transport = HttpTransport::new(concat!("dla/", env!("CARGO_PKG_VERSION")))?;
    let mut fetcher = Fetcher::new(transport, profile.fetch.clone());
    print_json(&fetch_and_ingest(&corpus, source, &urls, &mut fetcher)?)
}

#[cfg(not(feature = "http"))]
fn fetch(_: &Path, _: &str, _: Vec<String>) -> anyhow::Result<()> {
    bail!("this build has no HTTP support; rebuild with `--features http`")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
