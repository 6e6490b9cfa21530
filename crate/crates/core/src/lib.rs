//! Core types for semi-automatic document layout annotation.
//!
//! This crate holds the pieces shared by the whole pipeline:
//!
//! * [`geometry`]: axis-aligned boxes in top-left-origin page space.
//! * [`layout`]: block kinds, layout labels, spans and blocks.
//! * [`text`]: text cleanup and tokenization.
//! * [`features`]: the per-block descriptor and its classifier encoding.
//! * [`labeler`]: heuristic rules, the decision forest and the curation loop.

pub mod features;
pub mod geometry;
pub mod labeler;
pub mod layout;
pub mod text;

pub use features::{
    compute_features, normalize_for_classifier, FeatureError, FeatureVector, FontDictionary,
    TextFeatures, FEATURE_VERSION, N_FEATURES,
};
pub use geometry::{BoundingBox, GeometryError, PageGeometry, PageMargins, Rotation};
pub use labeler::{
    apply_heuristics, curation_step, predict, train_forest, CurationError, CurationOutcome,
    CurationState, ForestError, ForestModel, ForestParams, HeuristicRuleSet, LabelingMode,
    RuleError,
};
pub use layout::{BlockKind, LabelOrigin, LayoutBlock, LayoutError, LayoutLabel, TextSpan};
pub use text::{preprocess_text, tokens};
