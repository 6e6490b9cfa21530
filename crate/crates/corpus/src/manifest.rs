use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use dla_core::{BlockKind, LabelOrigin, LayoutLabel, PageGeometry};

use crate::record::LayoutRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationStatus {
    #[default]
    Unvalidated,
    InReview,
    Validated,
}

impl std::str::FromStr for ValidationStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "unvalidated" => Ok(Self::Unvalidated),
            "in_review" => Ok(Self::InReview),
            "validated" => Ok(Self::Validated),
            _ => Err(format!("unknown status {s:?}")),
        }
    }
}

/// Where the publication date came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DateSource {
    Metadata,
    FileName,
    /// Kept in the corpus but flagged.
    Missing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BlockCounts {
    pub images: usize,
    pub tables: usize,
    pub links: usize,
    pub text: usize,
    pub identifier: usize,
    pub title: usize,
    pub summary: usize,
    pub body: usize,
}

impl BlockCounts {
    pub fn of(records: &[LayoutRecord]) -> Self {
        let mut c = Self::default();
        for r in records {
            match r.kind {
                BlockKind::Image => c.images += 1,
                BlockKind::Table => c.tables += 1,
                BlockKind::Link => c.links += 1,
                BlockKind::Text => c.text += 1,
            }
            match r.label {
                LayoutLabel::Identifier => c.identifier += 1,
                LayoutLabel::Title => c.title += 1,
                LayoutLabel::Summary => c.summary += 1,
                LayoutLabel::Body => c.body += 1,
                _ => {}
            }
        }
        c
    }
}

/// How many blocks each kind of labeler is responsible for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub heuristic: usize,
    pub model: usize,
    pub human: usize,
}

impl Provenance {
    pub fn of(records: &[LayoutRecord]) -> Self {
        let mut p = Self::default();
        for r in records {
            match r.label_origin {
                LabelOrigin::Heuristic => p.heuristic += 1,
                LabelOrigin::Model => p.model += 1,
                LabelOrigin::Human => p.human += 1,
            }
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentManifest {
    pub doc_id: String,
    pub source_id: String,
    /// File path or URL the document was ingested from.
    pub origin: String,
    pub sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub publication_date: Option<NaiveDate>,
    pub date_source: DateSource,
    pub page_count: usize,
    pub pages: Vec<PageGeometry>,
    pub token_count: usize,
    pub counts: BlockCounts,
    /// Text blocks dropped for overlapping a table.
    pub suppressed: usize,
    pub status: ValidationStatus,
    pub provenance: Provenance,
    /// Newest model version that labeled any block; 0 if none.
    pub model_version: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DocumentManifest {
    /// Recomputes every count derived from the layout records.
    pub fn refresh(&mut self, records: &[LayoutRecord]) {
        self.token_count = records.iter().map(LayoutRecord::tokens).sum();
        self.counts = BlockCounts::of(records);
        self.provenance = Provenance::of(records);
        self.model_version = records.iter().map(|r| r.model_version).max().unwrap_or(0);
    }

    /// Differences between the stored counts and those implied by `records`.
    pub fn mismatches(&self, records: &[LayoutRecord]) -> Vec<String> {
        let mut fresh = self.clone();
        fresh.refresh(records);
        let mut out = Vec::new();
        if fresh.token_count != self.token_count {
            out.push(format!("token_count {} != {}", self.token_count, fresh.token_count));
        }
        if fresh.counts != self.counts {
            out.push(format!("block counts {:?} != {:?}", self.counts, fresh.counts));
        }
        if fresh.provenance != self.provenance {
            out.push(format!("provenance {:?} != {:?}", self.provenance, fresh.provenance));
        }
        if fresh.model_version != self.model_version {
            out.push(format!("model_version {} != {}", self.model_version, fresh.model_version));
        }
        if self.pages.len() != self.page_count {
            out.push(format!("page_count {} but {} page geometries", self.page_count, self.pages.len()));
        }
        if let Some(r) = records.iter().find(|r| r.page >= self.page_count) {
            out.push(format!("block {} on page {} of a {}-page document", r.block_id, r.page, self.page_count));
        }
        out
    }
}
