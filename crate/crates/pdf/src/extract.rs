use chrono::NaiveDate;
use dla_core::{BlockKind, BoundingBox, LayoutBlock, PageGeometry, Rotation, TextSpan};
use sha2::{Digest, Sha256};

use crate::content::{interpret, page_content_bytes, PageContent, PageFrame, TextRun};
use crate::document::{Document, PageNode};
use crate::error::{PdfError, Result};
use crate::lines::{build_lines, cmp_reading, merge_lines_with_rules, reconstruct_spaceless_text, MergeParams};
use crate::object::{decode_text_string, Object};
use crate::tables::{detect_tables, normalize_rotated_table, suppress_overlapping_text, Segment, TableGrid, TableParams};

/// Hex characters of the content hash kept as a document id.
pub const DOC_ID_LEN: usize = 16;

/// Content-addressed document id: leading hex digits of the SHA-256 of the file.
pub fn content_id(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect::<String>()[..DOC_ID_LEN].to_string()
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Rebuild line text from word-level runs (producers that draw each word
    /// separately and never emit spaces).
    pub spaceless_words: bool,
    pub line_quantum: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ParsedPage {
    pub geometry: PageGeometry,
    pub runs: Vec<TextRun>,
    pub spans: Vec<TextSpan>,
    pub segments: Vec<Segment>,
    pub images: Vec<LayoutBlock>,
    pub links: Vec<LayoutBlock>,
    /// Set when the page's content could not be interpreted.
    pub warning: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ParsedDocument {
    pub doc_id: String,
    pub source_id: String,
    pub pages: Vec<ParsedPage>,
    pub publication_date: Option<NaiveDate>,
    pub title: Option<String>,
}

impl ParsedDocument {
    pub fn geometries(&self) -> Vec<PageGeometry> {
        self.pages.iter().map(|p| p.geometry).collect()
    }

    pub fn warnings(&self) -> Vec<String> {
        self.pages.iter().filter_map(|p| p.warning.clone()).collect()
    }
}

/// Parses a `D:YYYYMMDD...` PDF date.
pub fn parse_pdf_date(s: &str) -> Option<NaiveDate> {
    let digits: String = s.trim().trim_start_matches("D:").chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.len() < 4 {
        return None;
    }
    let year: i32 = digits[..4].parse().ok()?;
    let month: u32 = digits.get(4..6).and_then(|m| m.parse().ok()).unwrap_or(1);
    let day: u32 = digits.get(6..8).and_then(|d| d.parse().ok()).unwrap_or(1);
    NaiveDate::from_ymd_opt(year, month, day)
}

pub fn parse_document(bytes: &[u8], source_id: &str) -> Result<ParsedDocument> {
    parse_document_with(bytes, source_id, &ParseOptions::default())
}

pub fn parse_document_with(bytes: &[u8], source_id: &str, opts: &ParseOptions) -> Result<ParsedDocument> {
    let doc = Document::load(bytes)?;
    let nodes = doc.pages()?;
    let quantum = opts.line_quantum.unwrap_or(MergeParams::default().line_quantum);
    let mut pages = Vec::with_capacity(nodes.len());
    for (index, node) in nodes.iter().enumerate() {
        pages.push(parse_page(&doc, node, index, quantum, opts)?);
    }
    let info = doc.info();
    let info_str = |key: &str| info.and_then(|i| doc.resolve_key(i, key)).and_then(Object::as_bytes).map(decode_text_string);
    Ok(ParsedDocument {
        doc_id: content_id(bytes),
        source_id: source_id.to_string(),
        pages,
        publication_date: info_str("CreationDate").and_then(|d| parse_pdf_date(&d)),
        title: info_str("Title"),
    })
}

fn parse_page(doc: &Document, node: &PageNode, index: usize, quantum: f64, opts: &ParseOptions) -> Result<ParsedPage> {
    let view = match node.crop_box {
        Some(c) => [c[0].max(node.media_box[0]), c[1].max(node.media_box[1]), c[2].min(node.media_box[2]), c[3].min(node.media_box[3])],
        None => node.media_box,
    };
    let rotation = Rotation::from_degrees(node.rotate).unwrap_or(Rotation::Deg0);
    let geometry = PageGeometry::new(index, view[2] - view[0], view[3] - view[1])
        .map_err(|e| PdfError::Structure(format!("page {index}: {e}")))?
        .with_rotation(rotation);
    let frame = PageFrame::from_box(view);
    let (content, warning) = match page_content_bytes(doc, &node.dict).and_then(|c| interpret(doc, &c, &node.resources, frame)) {
        Ok(c) => (c, None),
        Err(e) => {
            log::warn!("page {index}: content skipped: {e}");
            (PageContent::default(), Some(format!("page {index}: content skipped: {e}")))
        }
    };
    let mut spans = build_lines(&content.runs, &content.segments, quantum);
    if opts.spaceless_words {
        spans = reconstruct_spaceless_text(&spans);
    }
    let images = content
        .images
        .iter()
        .enumerate()
        .map(|(k, b)| fixed_block(BlockKind::Image, index, k, *b, None, &geometry))
        .collect();
    let links = link_annotations(doc, node, frame)
        .into_iter()
        .enumerate()
        .map(|(k, (b, uri))| fixed_block(BlockKind::Link, index, k, b, Some(uri), &geometry))
        .collect();
    Ok(ParsedPage { geometry, runs: content.runs, spans, segments: content.segments, images, links, warning })
}

fn fixed_block(kind: BlockKind, page: usize, k: usize, bbox: BoundingBox, payload: Option<String>, g: &PageGeometry) -> LayoutBlock {
    let mut b = LayoutBlock::fixed(kind, format!("p{page}-{}{k}", kind.tag()), page, bbox, payload);
    b.clipped = bbox.exceeds(g.width, g.height);
    b
}

fn link_annotations(doc: &Document, node: &PageNode, frame: PageFrame) -> Vec<(BoundingBox, String)> {
    let Some(annots) = doc.resolve_key(&node.dict, "Annots").and_then(Object::as_array) else { return Vec::new() };
    let mut out = Vec::new();
    for a in annots {
        let Some(d) = doc.resolve(a).as_dict() else { continue };
        if doc.resolve_key(d, "Subtype").and_then(Object::as_name) != Some("Link") {
            continue;
        }
        let Some(action) = doc.dict_at(d, "A") else { continue };
        if doc.resolve_key(action, "S").and_then(Object::as_name) != Some("URI") {
            continue;
        }
        let Some(uri) = doc.resolve_key(action, "URI").and_then(Object::as_bytes) else { continue };
        let Some(r) = doc.rect(d, "Rect") else { continue };
        let pts = [frame.to_page((r[0], r[1])), frame.to_page((r[2], r[3]))];
        if let Some(b) = BoundingBox::hull_of_points(pts).filter(|b| b.area() > 0.0) {
            out.push((b, decode_text_string(uri)));
        }
    }
    out
}

/// Every block of one page plus the detected tables.
#[derive(Debug, Clone)]
pub struct PageLayout {
    pub geometry: PageGeometry,
    pub blocks: Vec<LayoutBlock>,
    pub tables: Vec<TableGrid>,
    /// Text blocks removed for overlapping a table.
    pub suppressed: usize,
}

/// Path, relative to the corpus root, of a table's CSV export.
pub fn table_csv_path(doc_id: &str, page: usize, k: usize) -> String {
    format!("tables/{doc_id}/p{page}_t{k}.csv")
}

/// Detects tables, merges text blocks and suppresses table-covered text.
///
/// Table blocks carry the relative CSV path as payload; writing the CSV is
/// left to the caller. Blocks are returned in reading order.
pub fn layout_page(doc: &ParsedDocument, page: &ParsedPage, merge: &MergeParams, table: &TableParams) -> PageLayout {
    let g = page.geometry;
    let tables: Vec<TableGrid> =
        detect_tables(&page.segments, &page.spans, &g, table).iter().map(|t| normalize_rotated_table(t, &g)).collect();
    let text = merge_lines_with_rules(&page.spans, &g, merge, &page.segments);
    let table_boxes: Vec<BoundingBox> = tables.iter().map(|t| t.bbox).collect();
    let (mut blocks, suppressed) = suppress_overlapping_text(text, &table_boxes);
    for (k, t) in tables.iter().enumerate() {
        let payload = table_csv_path(&doc.doc_id, g.page_index, k);
        blocks.push(fixed_block(BlockKind::Table, g.page_index, k, t.bbox, Some(payload), &g));
    }
    blocks.extend(page.images.iter().cloned());
    blocks.extend(page.links.iter().cloned());
    blocks.sort_by(|a, b| cmp_reading(&a.bbox, &b.bbox, merge.line_quantum));
    PageLayout { geometry: g, blocks, tables, suppressed }
}
