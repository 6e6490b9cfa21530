//! Multi-step operations shared by the subcommands and the acceptance run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use dla_core::{BlockKind, LayoutLabel};
use dla_corpus::{curate, ingest_paths, CurationReport, Corpus, IngestOutcome, StatsRow, StatsTable};
use dla_eval::{review_document, TruthDoc};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub ingested: usize,
    pub duplicates: usize,
    pub filtered: usize,
    pub failed: Vec<String>,
}

/// PDF files directly under `dir`, or `dir` itself when it is a file.
pub fn pdf_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    if dir.is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pdf")))
        .collect();
    out.sort();
    Ok(out)
}

pub fn ingest_into(corpus: &Corpus, source_id: &str, inputs: &[PathBuf]) -> anyhow::Result<IngestSummary> {
    let mut paths = Vec::new();
    for p in inputs {
        paths.extend(pdf_files(p)?);
    }
    let mut s = IngestSummary::default();
    for (path, r) in ingest_paths(corpus, source_id, &paths)? {
        match r {
            Ok(IngestOutcome::Ingested(_)) => s.ingested += 1,
            Ok(IngestOutcome::Duplicate(_)) => s.duplicates += 1,
            Ok(IngestOutcome::Filtered(_)) => s.filtered += 1,
            Err(e) => s.failed.push(format!("{}: {e}", path.display())),
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SuperviseSummary {
    pub documents: usize,
    pub corrected: usize,
    pub unmatched: usize,
    pub curation: Vec<CurationReport>,
}

/// Reviews and validates `truths` (all of one source) in batches of
/// `batch` documents, running a curation step after each batch.
pub fn supervise(corpus: &Corpus, source_id: &str, truths: &[&TruthDoc], batch: usize) -> anyhow::Result<SuperviseSummary> {
    let mut s = SuperviseSummary::default();
    for chunk in truths.chunks(batch.max(1)) {
        let mut ids = Vec::new();
        for t in chunk {
            let r = review_document(corpus, t)?;
            s.documents += 1;
            s.corrected += r.corrected;
            s.unmatched += r.unmatched;
            ids.push(t.doc_id.clone());
        }
        s.curation.push(curate(corpus, source_id, &ids)?);
    }
    Ok(s)
}

/// The statistics table the ground truth implies.
pub fn generator_stats(truths: &[TruthDoc]) -> StatsTable {
    let mut rows: BTreeMap<String, StatsRow> = BTreeMap::new();
    for t in truths {
        let row = rows.entry(t.source_id.clone()).or_insert_with(|| StatsRow { source: t.source_id.clone(), ..Default::default() });
        row.docs += 1;
        row.pages += t.pages.len();
        for (_, b) in t.blocks() {
            match (b.kind, b.label) {
                (BlockKind::Image, _) => row.images += 1,
                (BlockKind::Table, _) => row.tables += 1,
                (BlockKind::Link, _) => row.links += 1,
                (BlockKind::Text, l) => {
                    row.tokens += b.tokens();
                    match l {
                        LayoutLabel::Identifier => row.identifier += 1,
                        LayoutLabel::Title => row.title += 1,
                        LayoutLabel::Summary => row.summary += 1,
                        _ => row.body += 1,
                    }
                }
            }
        }
    }
    StatsTable::from_rows(rows)
}
