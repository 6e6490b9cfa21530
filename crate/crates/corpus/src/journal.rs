//! Append-only log of every label assignment.
//!
//! Replaying the journal from an empty map reproduces the current label and
//! origin of every block, which is what [`verify`](crate::verify) checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use dla_core::{LabelOrigin, LayoutLabel};

use crate::error::Result;
use crate::record::LayoutRecord;
use crate::store::Corpus;

pub const JOURNAL_FILE: &str = "journal.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JournalAction {
    Ingest,
    Cycle,
    SetLabel,
    Revert,
    ModelRelabel,
    Validate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelChange {
    pub block_id: String,
    #[serde(rename = "L")]
    pub label: LayoutLabel,
    pub origin: LabelOrigin,
    pub model_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl LabelChange {
    pub fn of(r: &LayoutRecord) -> Self {
        Self { block_id: r.block_id.clone(), label: r.label, origin: r.label_origin, model_version: r.model_version, confidence: r.confidence }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: u64,
    pub at: String,
    pub doc_id: String,
    pub action: JournalAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous: Option<LayoutLabel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub changes: Vec<LabelChange>,
}

pub type LabelState = BTreeMap<(String, String), LabelChange>;

impl Corpus {
    pub fn journal(&self, doc_id: &str, action: JournalAction, previous: Option<LayoutLabel>, changes: Vec<LabelChange>) -> Result<JournalEntry> {
        let entry = JournalEntry {
            seq: self.next_journal_seq()?,
            at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            doc_id: doc_id.to_string(),
            action,
            previous,
            changes,
        };
        self.append_jsonl(JOURNAL_FILE, &entry)?;
        Ok(entry)
    }

    pub fn journal_entries(&self) -> Result<Vec<JournalEntry>> {
        self.read_jsonl(JOURNAL_FILE)
    }
}

/// Folds entries with `seq <= upto` (all when `None`) into per-block labels.
pub fn replay(entries: &[JournalEntry], upto: Option<u64>) -> LabelState {
    let mut state = LabelState::new();
    for e in entries.iter().filter(|e| upto.map_or(true, |u| e.seq <= u)) {
        for c in &e.changes {
            state.insert((e.doc_id.clone(), c.block_id.clone()), c.clone());
        }
    }
    state
}

/// Blocks whose stored label or origin differs from the replayed journal.
pub fn replay_mismatches(state: &LabelState, records: &[LayoutRecord]) -> Vec<String> {
    records
        .iter()
        .filter_map(|r| match state.get(&(r.doc_id.clone(), r.block_id.clone())) {
            None => Some(format!("{}/{}: not in journal", r.doc_id, r.block_id)),
            Some(c) if c.label != r.label || c.origin != r.label_origin || c.model_version != r.model_version => Some(format!(
                "{}/{}: journal says {} ({}), layout says {} ({})",
                r.doc_id, r.block_id, c.label, c.origin, r.label, r.label_origin
            )),
            Some(_) => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn change(block: &str, label: LayoutLabel, origin: LabelOrigin) -> LabelChange {
        LabelChange { block_id: block.into(), label, origin, model_version: 0, confidence: None }
    }

    #[test]
    fn replay_respects_order_and_cutoff() {
        let dir = tempfile::tempdir().unwrap();
        let c = Corpus::open(dir.path()).unwrap();
        c.journal("d", JournalAction::Ingest, None, vec![change("a", LayoutLabel::Body, LabelOrigin::Heuristic)]).unwrap();
        c.journal("d", JournalAction::Cycle, Some(LayoutLabel::Body), vec![change("a", LayoutLabel::Identifier, LabelOrigin::Human)]).unwrap();
        let entries = c.journal_entries().unwrap();
        assert_eq!(entries.iter().map(|e| e.seq).collect::<Vec<_>>(), vec![0, 1]);
        let key = ("d".to_string(), "a".to_string());
        assert_eq!(replay(&entries, None)[&key].label, LayoutLabel::Identifier);
        assert_eq!(replay(&entries, Some(0))[&key].label, LayoutLabel::Body);

        // a fresh handle continues the sequence
        let c2 = Corpus::open(dir.path()).unwrap();
        assert_eq!(c2.journal("d", JournalAction::Validate, None, vec![]).unwrap().seq, 2);
    }
}
