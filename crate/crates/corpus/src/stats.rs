//! Per-source corpus statistics and the integrity check behind `dla verify`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dla_core::BlockKind;

use crate::error::Result;
use crate::journal::{replay, replay_mismatches};
use crate::manifest::{BlockCounts, DocumentManifest};
use crate::record::LayoutRecord;
use crate::store::Corpus;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRow {
    pub source: String,
    pub docs: usize,
    pub pages: usize,
    pub tokens: usize,
    pub images: usize,
    pub tables: usize,
    pub links: usize,
    pub identifier: usize,
    pub title: usize,
    pub summary: usize,
    pub body: usize,
}

impl StatsRow {
    fn add_counts(&mut self, c: &BlockCounts) {
        self.images += c.images;
        self.tables += c.tables;
        self.links += c.links;
        self.identifier += c.identifier;
        self.title += c.title;
        self.summary += c.summary;
        self.body += c.body;
    }

    fn add(&mut self, o: &StatsRow) {
        self.docs += o.docs;
        self.pages += o.pages;
        self.tokens += o.tokens;
        self.images += o.images;
        self.tables += o.tables;
        self.links += o.links;
        self.identifier += o.identifier;
        self.title += o.title;
        self.summary += o.summary;
        self.body += o.body;
    }

    fn cells(&self) -> [String; 11] {
        [
            self.source.clone(),
            self.docs.to_string(),
            self.pages.to_string(),
            self.tokens.to_string(),
            self.images.to_string(),
            self.tables.to_string(),
            self.links.to_string(),
            self.identifier.to_string(),
            self.title.to_string(),
            self.summary.to_string(),
            self.body.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsTable {
    pub rows: Vec<StatsRow>,
    pub total: StatsRow,
}

impl StatsTable {
    pub fn from_rows(rows: BTreeMap<String, StatsRow>) -> Self {
        let mut total = StatsRow { source: "Total".into(), ..Default::default() };
        for r in rows.values() {
            total.add(r);
        }
        Self { rows: rows.into_values().collect(), total }
    }

    pub fn render(&self) -> String {
        const HEAD: [&str; 11] = ["Source", "#Doc", "#Pages", "#Tokens", "#Images", "#Tables", "#Links", "#ID", "#Title", "#Summary", "#Body"];
        let body: Vec<[String; 11]> = self.rows.iter().chain(std::iter::once(&self.total)).map(StatsRow::cells).collect();
        let mut widths = HEAD.map(str::len);
        for row in &body {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String]| {
            for (i, (c, w)) in cells.iter().zip(widths).enumerate() {
                if i == 0 {
                    let _ = write!(out, "{c:<w$}");
                } else {
                    let _ = write!(out, "  {c:>w$}");
                }
            }
            out.push('\n');
        };
        line(&mut out, &HEAD.map(String::from));
        for row in &body {
            line(&mut out, row);
        }
        out
    }
}

/// Statistics recomputed from the layout records themselves.
pub fn stats_from_layout(corpus: &Corpus, source_id: Option<&str>) -> Result<StatsTable> {
    let mut rows: BTreeMap<String, StatsRow> = BTreeMap::new();
    for m in corpus.manifests(source_id)? {
        let records = corpus.layout(&m.doc_id)?;
        let row = rows.entry(m.source_id.clone()).or_insert_with(|| StatsRow { source: m.source_id.clone(), ..Default::default() });
        row.docs += 1;
        row.pages += m.page_count;
        row.tokens += records.iter().map(LayoutRecord::tokens).sum::<usize>();
        row.add_counts(&BlockCounts::of(&records));
    }
    Ok(StatsTable::from_rows(rows))
}

/// Statistics summed from the manifests.
pub fn stats_from_manifests(manifests: &[DocumentManifest]) -> StatsTable {
    let mut rows: BTreeMap<String, StatsRow> = BTreeMap::new();
    for m in manifests {
        let row = rows.entry(m.source_id.clone()).or_insert_with(|| StatsRow { source: m.source_id.clone(), ..Default::default() });
        row.docs += 1;
        row.pages += m.page_count;
        row.tokens += m.token_count;
        row.add_counts(&m.counts);
    }
    StatsTable::from_rows(rows)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub documents: usize,
    pub blocks: usize,
    pub problems: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Cross-checks manifests, layout records, stored files and the journal.
pub fn verify(corpus: &Corpus) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let manifests = corpus.manifests(None)?;
    let sources = corpus.source_ids()?;
    for s in &sources {
        if let Err(e) = corpus.profile(s) {
            report.problems.push(e.to_string());
        }
    }
    let mut all = Vec::new();
    for m in &manifests {
        report.documents += 1;
        let p = |msg: String| format!("{}: {msg}", m.doc_id);
        if !sources.contains(&m.source_id) {
            report.problems.push(p(format!("source {} has no profile", m.source_id)));
        }
        match corpus.pdf_path(&m.doc_id).and_then(|path| std::fs::read(&path).map_err(|e| crate::CorpusError::Io { path, source: e })) {
            Ok(bytes) if format!("{:x}", Sha256::digest(&bytes)) != m.sha256 => report.problems.push(p("stored PDF does not match its hash".into())),
            Ok(_) => {}
            Err(e) => report.problems.push(p(e.to_string())),
        }
        let records = match corpus.layout(&m.doc_id) {
            Ok(r) => r,
            Err(e) => {
                report.problems.push(e.to_string());
                continue;
            }
        };
        report.blocks += records.len();
        report.problems.extend(m.mismatches(&records).into_iter().map(p));
        let mut ids = std::collections::HashSet::new();
        for r in &records {
            if !ids.insert(&r.block_id) {
                report.problems.push(p(format!("duplicate block id {}", r.block_id)));
            }
            if r.source_id != m.source_id {
                report.problems.push(p(format!("block {} names source {}", r.block_id, r.source_id)));
            }
            if r.kind == BlockKind::Table {
                let rel = r.f12.as_deref().unwrap_or_default();
                if !is_relative_inside(rel) || !corpus.path(rel).is_file() {
                    report.problems.push(p(format!("table {} has no CSV at {rel}", r.block_id)));
                }
            }
        }
        all.extend(records);
    }
    let journal = corpus.journal_entries()?;
    report.problems.extend(replay_mismatches(&replay(&journal, None), &all));
    // unreadable layouts were reported above
    if let Ok(from_layout) = stats_from_layout(corpus, None) {
        if from_layout != stats_from_manifests(&manifests) {
            report.problems.push("statistics from layout records differ from manifest totals".into());
        }
    }
    Ok(report)
}

fn is_relative_inside(rel: &str) -> bool {
    let p = Path::new(rel);
    !rel.is_empty() && p.is_relative() && p.components().all(|c| matches!(c, std::path::Component::Normal(_)))
}
