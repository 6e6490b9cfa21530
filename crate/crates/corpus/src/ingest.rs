//! Turning PDF files into stored layout.
//!
//! Extraction is pure and runs in parallel; committing a document (dedup,
//! date filter, font registration, labeling, writes) runs one document at a
//! time so per-source font codes stay deterministic.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dla_core::{compute_features, FontDictionary, ForestModel, HeuristicRuleSet, LabelOrigin, LabelingMode, PageGeometry};
use dla_pdf::{cells_to_csv, content_id, layout_page, parse_document_with};

use crate::error::{CorpusError, IoContext, Result};
use crate::journal::{JournalAction, LabelChange};
use crate::manifest::{DateSource, DocumentManifest, ValidationStatus};
use crate::profile::SourceProfile;
use crate::record::LayoutRecord;
use crate::store::{write_atomic, Corpus};

pub const FILTERED_FILE: &str = "filtered.jsonl";
pub const FILTER_REASON: &str = "filtered_pre2014";

/// Documents published before this day are not ingested.
pub fn cutoff_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2014, 1, 1).expect("valid date")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredRecord {
    pub doc_id: String,
    pub source_id: String,
    pub origin: String,
    pub publication_date: NaiveDate,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IngestOutcome {
    Ingested(Box<DocumentManifest>),
    Duplicate(String),
    Filtered(FilteredRecord),
}

#[derive(Debug, Clone)]
pub struct ExtractedDocument {
    pub doc_id: String,
    pub sha256: String,
    pub source_id: String,
    pub title: Option<String>,
    pub metadata_date: Option<NaiveDate>,
    pub pages: Vec<PageGeometry>,
    /// Text blocks still carry the provisional Body label.
    pub records: Vec<LayoutRecord>,
    /// Relative CSV path and contents of every table.
    pub tables: Vec<(String, String)>,
    pub suppressed: usize,
    pub warnings: Vec<String>,
}

pub fn extract(bytes: &[u8], profile: &SourceProfile) -> Result<ExtractedDocument> {
    let source_id = &profile.source_id;
    let doc_id = content_id(bytes);
    let parsed = parse_document_with(bytes, source_id, &profile.extraction.parse_options()).map_err(|e| CorpusError::Pdf(doc_id.clone(), e))?;
    let merge = profile.extraction.merge_params();
    let tparams = profile.extraction.table_params();
    let mut warnings = parsed.warnings();
    let mut records = Vec::new();
    let mut tables = Vec::new();
    let mut suppressed = 0;
    for page in &parsed.pages {
        let layout = layout_page(&parsed, page, &merge, &tparams);
        suppressed += layout.suppressed;
        for (k, t) in layout.tables.iter().enumerate() {
            tables.push((dla_pdf::table_csv_path(&doc_id, page.geometry.page_index, k), cells_to_csv(t)));
        }
        for b in &layout.blocks {
            match compute_features(b, &layout.geometry) {
                Ok(fv) => records.push(LayoutRecord::from_features(&doc_id, source_id, &b.block_id, &fv)),
                Err(e) => warnings.push(format!("page {}: skipped block: {e}", page.geometry.page_index)),
            }
        }
    }
    Ok(ExtractedDocument {
        sha256: format!("{:x}", Sha256::digest(bytes)),
        doc_id,
        source_id: source_id.clone(),
        title: parsed.title.clone(),
        metadata_date: parsed.publication_date,
        pages: parsed.geometries(),
        records,
        tables,
        suppressed,
        warnings,
    })
}

/// Finds a `YYYYMMDD`, `YYYY-MM-DD` or `YYYY_MM_DD` date in a file name.
pub fn date_from_name(name: &str) -> Option<NaiveDate> {
    let b = name.as_bytes();
    let digits = |s: &[u8]| -> Option<u32> { std::str::from_utf8(s).ok()?.parse().ok() };
    for i in 0..b.len() {
        if i > 0 && b[i - 1].is_ascii_digit() {
            continue;
        }
        let attempts: [(usize, [usize; 3]); 2] = [(8, [0, 4, 6]), (10, [0, 5, 8])];
        for (len, offs) in attempts {
            let Some(w) = b.get(i..i + len) else { continue };
            if b.get(i + len).is_some_and(u8::is_ascii_digit) {
                continue;
            }
            if len == 10 && !(matches!(w[4], b'-' | b'_') && w[7] == w[4]) {
                continue;
            }
            let y = digits(&w[offs[0]..offs[0] + 4]);
            let m = digits(&w[offs[1]..offs[1] + 2]);
            let d = digits(&w[offs[2]..offs[2] + 2]);
            if let (Some(y), Some(m), Some(d)) = (y, m, d) {
                if (1900..2100).contains(&y) {
                    if let Some(date) = NaiveDate::from_ymd_opt(y as i32, m, d) {
                        return Some(date);
                    }
                }
            }
        }
    }
    None
}

/// Labels text records with the rules or the current model.
pub enum Labeler {
    Rules(HeuristicRuleSet),
    Forest { model: ForestModel, version: u32, fonts: FontDictionary },
}

impl Labeler {
    /// The labeler a source currently uses for new documents.
    pub fn for_source(corpus: &Corpus, source_id: &str) -> Result<Self> {
        let state = corpus.state(source_id)?;
        if state.mode == LabelingMode::Model {
            if let Some(model) = corpus.model(source_id)? {
                return Ok(Self::Forest { model, version: state.model_version, fonts: corpus.fonts(source_id)? });
            }
            log::warn!("source {source_id} is in model mode but has no model file; using rules");
        }
        Ok(Self::Rules(corpus.rules(source_id)?))
    }

    /// Relabels every text record except those a human has set. Returns how
    /// many records were labeled.
    pub fn apply(&self, records: &mut [LayoutRecord], pages: &[PageGeometry]) -> Result<usize> {
        let mut n = 0;
        for r in records.iter_mut().filter(|r| r.is_text() && r.label_origin != LabelOrigin::Human) {
            let fv = r.feature_vector();
            match self {
                Self::Rules(rules) => {
                    r.label = rules.label(&fv);
                    r.label_origin = LabelOrigin::Heuristic;
                    r.model_version = 0;
                    r.confidence = None;
                }
                Self::Forest { model, version, fonts } => {
                    let g = pages.get(r.page).ok_or_else(|| CorpusError::Integrity {
                        path: PathBuf::from(format!("layout/{}.jsonl", r.doc_id)),
                        line: 0,
                        message: format!("block {} refers to missing page {}", r.block_id, r.page),
                    })?;
                    let x = dla_core::normalize_for_classifier(&fv, g, fonts)?;
                    let (label, conf) = dla_core::predict(model, &x)?;
                    r.label = label;
                    r.label_origin = LabelOrigin::Model;
                    r.model_version = *version;
                    r.confidence = Some(conf);
                }
            }
            n += 1;
        }
        Ok(n)
    }
}

/// Stores an extracted document. `origin` is the path or URL it came from.
pub fn commit(corpus: &Corpus, mut doc: ExtractedDocument, bytes: &[u8], origin: &str) -> Result<IngestOutcome> {
    if corpus.has_document(&doc.doc_id) {
        return Ok(IngestOutcome::Duplicate(doc.doc_id));
    }
    let name = Path::new(origin).file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let (date, date_source) = match (doc.metadata_date, date_from_name(&name)) {
        (Some(d), _) => (Some(d), DateSource::Metadata),
        (None, Some(d)) => (Some(d), DateSource::FileName),
        (None, None) => (None, DateSource::Missing),
    };
    if let Some(d) = date.filter(|d| *d < cutoff_date()) {
        let rec = FilteredRecord {
            doc_id: doc.doc_id.clone(),
            source_id: doc.source_id.clone(),
            origin: origin.to_string(),
            publication_date: d,
            reason: FILTER_REASON.into(),
        };
        let seen: Vec<FilteredRecord> = corpus.read_jsonl(FILTERED_FILE)?;
        if !seen.iter().any(|s| s.doc_id == rec.doc_id) {
            corpus.append_jsonl(FILTERED_FILE, &rec)?;
        }
        return Ok(IngestOutcome::Filtered(rec));
    }
    if date.is_none() {
        doc.warnings.push("no publication date in metadata or file name".into());
    }

    let source_id = doc.source_id.clone();
    let mut fonts = corpus.fonts(&source_id)?;
    let before = fonts.len();
    for r in doc.records.iter().filter(|r| r.is_text()) {
        fonts.register(r.f16.as_deref().unwrap_or_default());
    }
    if fonts.len() != before || !corpus.path(&format!("sources/{source_id}/fonts.tsv")).exists() {
        corpus.save_fonts(&source_id, &fonts)?;
    }
    Labeler::for_source(corpus, &source_id)?.apply(&mut doc.records, &doc.pages)?;

    let pdf = corpus.pdf_path(&doc.doc_id)?;
    write_atomic(&pdf, bytes)?;
    for (rel, csv) in &doc.tables {
        write_atomic(&corpus.path(rel), csv.as_bytes())?;
    }
    corpus.save_layout(&doc.doc_id, &doc.records)?;
    corpus.journal(&doc.doc_id, JournalAction::Ingest, None, doc.records.iter().map(LabelChange::of).collect())?;
    let mut m = DocumentManifest {
        doc_id: doc.doc_id.clone(),
        source_id,
        origin: origin.to_string(),
        sha256: doc.sha256,
        title: doc.title,
        publication_date: date,
        date_source,
        page_count: doc.pages.len(),
        pages: doc.pages,
        token_count: 0,
        counts: Default::default(),
        suppressed: doc.suppressed,
        status: ValidationStatus::Unvalidated,
        provenance: Default::default(),
        model_version: 0,
        warnings: doc.warnings,
    };
    m.refresh(&doc.records);
    corpus.save_manifest(&m)?;
    Ok(IngestOutcome::Ingested(Box::new(m)))
}

pub fn ingest_bytes(corpus: &Corpus, source_id: &str, bytes: &[u8], origin: &str) -> Result<IngestOutcome> {
    let profile = corpus.profile(source_id)?;
    let doc = extract(bytes, &profile)?;
    commit(corpus, doc, bytes, origin)
}

/// Ingests files in parallel; results come back in input order.
pub fn ingest_paths(corpus: &Corpus, source_id: &str, paths: &[PathBuf]) -> Result<Vec<(PathBuf, Result<IngestOutcome>)>> {
    let profile = corpus.profile(source_id)?;
    let extracted: Vec<Result<(Vec<u8>, ExtractedDocument)>> = paths
        .par_iter()
        .map(|p| {
            let bytes = std::fs::read(p).at(p)?;
            let doc = extract(&bytes, &profile)?;
            Ok((bytes, doc))
        })
        .collect();
    Ok(paths
        .iter()
        .zip(extracted)
        .map(|(p, r)| {
            let outcome = r.and_then(|(bytes, doc)| commit(corpus, doc, &bytes, &p.to_string_lossy()));
            if let Err(e) = &outcome {
                log::warn!("{}: {e}", p.display());
            }
            (p.clone(), outcome)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dates_in_file_names() {
        assert_eq!(date_from_name("BOE-A-20190304-12.pdf"), NaiveDate::from_ymd_opt(2019, 3, 4));
        assert_eq!(date_from_name("bocm_2013-12-31.pdf"), NaiveDate::from_ymd_opt(2013, 12, 31));
        assert_eq!(date_from_name("x_2020_02_30.pdf"), None);
        assert_eq!(date_from_name("id-123456789.pdf"), None);
        assert_eq!(date_from_name("2020-01_05.pdf"), None);
    }
}
