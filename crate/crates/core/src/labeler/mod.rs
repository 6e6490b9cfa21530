//! Text-block labeling: heuristic bootstrap, decision forest and the
//! validate/retrain curation loop.

pub mod curation;
pub mod forest;
pub mod rules;

pub use curation::{
    curation_step, CurationError, CurationOutcome, CurationState, LabelingMode, TrainingSet, ValidatedDoc,
    VALIDATION_PAGE_THRESHOLD,
};
pub use forest::{predict, train_forest, ForestError, ForestMeta, ForestModel, ForestParams};
pub use rules::{apply_heuristics, HeuristicRuleSet, RuleError, STARTER_RULES};
