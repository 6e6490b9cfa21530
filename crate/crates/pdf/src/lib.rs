//! Native PDF extraction: objects, content streams, lines, blocks and ruled tables.
//!
//! [`parse_document`] turns file bytes into per-page spans, rules, image and
//! link blocks; [`layout_page`] then detects tables, merges lines into text
//! blocks and removes text covered by tables. [`writer`] produces the
//! synthetic PDFs used for testing.

pub mod content;
pub mod document;
pub mod error;
pub mod extract;
pub mod filters;
pub mod fonts;
mod lexer;
pub mod lines;
pub mod metrics;
pub mod object;
pub mod tables;
pub mod writer;

pub use content::TextRun;
pub use document::Document;
pub use error::PdfError;
pub use extract::{
    content_id, layout_page, parse_document, parse_document_with, parse_pdf_date, table_csv_path, PageLayout, ParseOptions,
    ParsedDocument, ParsedPage,
};
pub use lines::{build_lines, merge_lines_into_blocks, merge_lines_with_rules, reading_key, reconstruct_spaceless_text, MergeParams};
pub use tables::{
    cells_to_csv, detect_tables, export_cells, normalize_rotated_table, suppress_overlapping_text, Segment, TableError, TableGrid,
    TableParams, SUPPRESSION_THRESHOLD,
};
pub use writer::{Canvas, FontId, PdfBuilder};
