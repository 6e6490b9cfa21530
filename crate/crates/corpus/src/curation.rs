//! Supervisor edits and the store-backed curation loop.

use serde::Serialize;

use dla_core::labeler::curation::{TrainingSet, ValidatedDoc, VALIDATION_PAGE_THRESHOLD};
use dla_core::{curation_step, CurationError, CurationState, LabelOrigin, LayoutLabel};

use crate::error::{CorpusError, Result};
use crate::ingest::Labeler;
use crate::journal::{replay, JournalAction, LabelChange};
use crate::manifest::ValidationStatus;
use crate::record::LayoutRecord;
use crate::store::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelEdit {
    /// Identifier → Title → Summary → Body → Identifier.
    Cycle,
    Set(LayoutLabel),
}

/// Changes one text block's label; the block's kind and box never change.
pub fn edit_label(corpus: &Corpus, doc_id: &str, block_id: &str, edit: LabelEdit) -> Result<LayoutRecord> {
    let mut m = corpus.manifest(doc_id)?;
    let mut records = corpus.layout(doc_id)?;
    let r = records
        .iter_mut()
        .find(|r| r.block_id == block_id)
        .ok_or_else(|| CorpusError::UnknownBlock { doc_id: doc_id.into(), block_id: block_id.into() })?;
    if !r.is_text() {
        return Err(CorpusError::NotText { block_id: block_id.into() });
    }
    let (next, action) = match edit {
        LabelEdit::Cycle => (r.label.cycle_next(), JournalAction::Cycle),
        LabelEdit::Set(l) if l.is_text() => (l, JournalAction::SetLabel),
        LabelEdit::Set(l) => return Err(CorpusError::NotTextLabel(l)),
    };
    let previous = r.label;
    r.label = next;
    r.label_origin = LabelOrigin::Human;
    r.model_version = 0;
    r.confidence = None;
    let updated = r.clone();
    corpus.journal(doc_id, action, Some(previous), vec![LabelChange::of(&updated)])?;
    corpus.save_layout(doc_id, &records)?;
    if m.status == ValidationStatus::Unvalidated {
        m.status = ValidationStatus::InReview;
    }
    m.refresh(&records);
    corpus.save_manifest(&m)?;
    Ok(updated)
}

/// Restores a block to the label it had right after journal entry `seq`.
pub fn revert_label(corpus: &Corpus, doc_id: &str, block_id: &str, seq: u64) -> Result<LayoutRecord> {
    let entries = corpus.journal_entries()?;
    let state = replay(&entries, Some(seq));
    let target = state
        .get(&(doc_id.to_string(), block_id.to_string()))
        .cloned()
        .ok_or_else(|| CorpusError::UnknownBlock { doc_id: doc_id.into(), block_id: block_id.into() })?;
    let mut m = corpus.manifest(doc_id)?;
    let mut records = corpus.layout(doc_id)?;
    let r = records
        .iter_mut()
        .find(|r| r.block_id == block_id)
        .ok_or_else(|| CorpusError::UnknownBlock { doc_id: doc_id.into(), block_id: block_id.into() })?;
    let previous = r.label;
    r.label = target.label;
    r.label_origin = target.origin;
    r.model_version = target.model_version;
    r.confidence = target.confidence;
    let updated = r.clone();
    corpus.journal(doc_id, JournalAction::Revert, Some(previous), vec![LabelChange::of(&updated)])?;
    corpus.save_layout(doc_id, &records)?;
    m.refresh(&records);
    corpus.save_manifest(&m)?;
    Ok(updated)
}

/// Marks a document validated. Returns `false` if it already was.
pub fn validate_document(corpus: &Corpus, doc_id: &str) -> Result<bool> {
    let mut m = corpus.manifest(doc_id)?;
    if m.status == ValidationStatus::Validated {
        return Ok(false);
    }
    m.status = ValidationStatus::Validated;
    corpus.journal(doc_id, JournalAction::Validate, None, Vec::new())?;
    corpus.save_manifest(&m)?;
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurationReport {
    pub state: CurationState,
    pub trained: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training_error: Option<String>,
    /// Pending documents whose machine labels were refreshed.
    pub relabeled_docs: usize,
}

/// Every validated text block of a source as classifier input.
pub fn training_set(corpus: &Corpus, state: &CurationState) -> Result<TrainingSet> {
    let fonts = corpus.fonts(&state.source_id)?;
    let mut set = TrainingSet::default();
    for doc_id in &state.validated_docs {
        let m = corpus.manifest(doc_id)?;
        for r in corpus.layout(doc_id)?.iter().filter(|r| r.is_text()) {
            let g = m.pages.get(r.page).ok_or_else(|| CorpusError::UnknownBlock { doc_id: doc_id.clone(), block_id: r.block_id.clone() })?;
            set.x.push(dla_core::normalize_for_classifier(&r.feature_vector(), g, &fonts)?.to_vec());
            set.y.push(r.label);
        }
        set.docs.push(doc_id.clone());
    }
    Ok(set)
}

/// Adds `newly_validated` to the source's validated set and, once the page
/// threshold is met, retrains, swaps the model in and relabels every
/// document still awaiting validation.
pub fn curate(corpus: &Corpus, source_id: &str, newly_validated: &[String]) -> Result<CurationReport> {
    let mut report = curate_model(corpus, source_id, newly_validated)?;
    if report.trained {
        report.relabeled_docs = relabel_pending(corpus, source_id)?;
    }
    Ok(report)
}

/// The training half of [`curate`]: updates the state and installs a new
/// model, but leaves pending documents untouched.
pub fn curate_model(corpus: &Corpus, source_id: &str, newly_validated: &[String]) -> Result<CurationReport> {
    let profile = corpus.profile(source_id)?;
    let state = corpus.state(source_id)?;
    let mut batch = Vec::new();
    for doc_id in newly_validated {
        let m = corpus.manifest(doc_id)?;
        if m.source_id != source_id || m.status != ValidationStatus::Validated {
            continue;
        }
        batch.push(ValidatedDoc { doc_id: doc_id.clone(), pages: m.page_count });
    }
    let outcome = curation_step(&state, &batch, &profile.labeling.forest_params(), |s| {
        training_set(corpus, s).map_err(|e| CurationError::Data(e.to_string()))
    });
    let trained = outcome.model.is_some();
    if let Some(model) = &outcome.model {
        corpus.install_model(source_id, outcome.state.model_version, model)?;
    }
    corpus.save_state(&outcome.state)?;
    Ok(CurationReport { state: outcome.state, trained, training_error: outcome.training_error, relabeled_docs: 0 })
}

/// Retrains on the current validated set; refuses below the page threshold.
pub fn retrain(corpus: &Corpus, source_id: &str) -> Result<CurationReport> {
    check_threshold(corpus, source_id)?;
    curate(corpus, source_id, &[])
}

/// Fails with [`CorpusError::BelowThreshold`] unless the source may train.
pub fn check_threshold(corpus: &Corpus, source_id: &str) -> Result<CurationState> {
    let state = corpus.state(source_id)?;
    corpus.profile(source_id)?;
    if !state.threshold_met() {
        return Err(CorpusError::BelowThreshold {
            source_id: source_id.into(),
            pages: state.validated_pages,
            needed: VALIDATION_PAGE_THRESHOLD,
        });
    }
    Ok(state)
}

/// Relabels the machine-labeled blocks of every non-validated document.
pub fn relabel_pending(corpus: &Corpus, source_id: &str) -> Result<usize> {
    let labeler = Labeler::for_source(corpus, source_id)?;
    let mut n = 0;
    for mut m in corpus.manifests(Some(source_id))? {
        if m.status == ValidationStatus::Validated {
            continue;
        }
        let mut records = corpus.layout(&m.doc_id)?;
        let before = records.clone();
        labeler.apply(&mut records, &m.pages)?;
        let changes: Vec<LabelChange> =
            records.iter().zip(&before).filter(|(a, b)| a != b).map(|(a, _)| LabelChange::of(a)).collect();
        if !changes.is_empty() {
            corpus.journal(&m.doc_id, JournalAction::ModelRelabel, None, changes)?;
        }
        corpus.save_layout(&m.doc_id, &records)?;
        m.refresh(&records);
        corpus.save_manifest(&m)?;
        n += 1;
    }
    Ok(n)
}
