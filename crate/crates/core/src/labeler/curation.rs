//! The per-source curation loop.
//!
//! A source starts in heuristic mode. Each batch of supervisor-validated
//! documents grows the validated set; once it covers
//! [`VALIDATION_PAGE_THRESHOLD`] pages, a forest is (re)trained on every
//! validated block and the source switches to model mode. A failed retrain
//! keeps the previous model and mode.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::forest::{train_forest, ForestError, ForestModel, ForestParams};
use crate::layout::LayoutLabel;

/// Minimum validated pages before a source gets a trained model.
pub const VALIDATION_PAGE_THRESHOLD: usize = 50;

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("training data unavailable: {0}")]
    Data(String),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelingMode {
    #[default]
    Heuristic,
    Model,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CurationState {
    pub source_id: String,
    pub validated_docs: BTreeSet<String>,
    pub validated_pages: usize,
    /// 0 until the first model is trained.
    pub model_version: u32,
    pub mode: LabelingMode,
}

impl CurationState {
    pub fn new(source_id: impl Into<String>) -> Self {
        Self { source_id: source_id.into(), ..Self::default() }
    }

    pub fn threshold_met(&self) -> bool {
        self.validated_pages >= VALIDATION_PAGE_THRESHOLD
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedDoc {
    pub doc_id: String,
    pub pages: usize,
}

/// Labeled classifier inputs gathered from every validated document.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<LayoutLabel>,
    pub docs: Vec<String>,
}

#[derive(Debug)]
pub struct CurationOutcome {
    pub state: CurationState,
    /// Newly trained model; `None` when below threshold or training failed.
    pub model: Option<ForestModel>,
    /// Why retraining failed, when it did.
    pub training_error: Option<String>,
}

/// Advances the loop by one batch of validations.
///
/// Documents already in the validated set are ignored, so repeating a
/// validation never double-counts pages. `training_data` is called with the
/// updated state only when the threshold is met.
pub fn curation_step<F>(
    state: &CurationState,
    newly_validated: &[ValidatedDoc],
    params: &ForestParams,
    training_data: F,
) -> CurationOutcome
where
    F: FnOnce(&CurationState) -> Result<TrainingSet, CurationError>,
{
    let mut next = state.clone();
    for doc in newly_validated {
        if next.validated_docs.insert(doc.doc_id.clone()) {
            next.validated_pages += doc.pages;
        }
    }
    if !next.threshold_met() {
        return CurationOutcome { state: next, model: None, training_error: None };
    }
    let trained = training_data(&next).and_then(|set| {
        let model = train_forest(&set.x, &set.y, params)?;
        Ok(model.with_provenance(&next.source_id, set.docs))
    });
    match trained {
        Ok(model) => {
            next.model_version += 1;
            next.mode = LabelingMode::Model;
            CurationOutcome { state: next, model: Some(model), training_error: None }
        }
        Err(e) => {
            log::warn!("retraining source {} failed, keeping model v{}: {e}", next.source_id, next.model_version);
            CurationOutcome { state: next, model: None, training_error: Some(e.to_string()) }
        }
    }
}
