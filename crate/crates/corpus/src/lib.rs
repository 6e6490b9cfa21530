//! The annotated corpus on disk.
//!
//! A [`Corpus`] is a directory of source profiles, original PDFs, per-block
//! layout records, table CSVs, overlays and per-document manifests. This
//! crate ingests documents into it, applies supervisor edits through an
//! append-only journal, runs the curation loop against it and checks its
//! integrity.

pub mod curation;
pub mod error;
pub mod fetch;
pub mod ingest;
pub mod journal;
pub mod manifest;
pub mod overlay;
pub mod profile;
pub mod record;
pub mod stats;
pub mod store;

pub use curation::{check_threshold, curate, curate_model, edit_label, relabel_pending, retrain, revert_label, validate_document, CurationReport, LabelEdit};
pub use error::{CorpusError, Result};
pub use ingest::{extract, ingest_bytes, ingest_paths, IngestOutcome, Labeler};
pub use journal::{replay, JournalAction, JournalEntry};
pub use manifest::{BlockCounts, DocumentManifest, ValidationStatus};
pub use profile::{gazette_registry, SourceProfile};
pub use record::{LayoutRecord, PAYLOAD_LIMIT};
pub use stats::{stats_from_layout, stats_from_manifests, verify, StatsRow, StatsTable, VerifyReport};
pub use store::Corpus;
