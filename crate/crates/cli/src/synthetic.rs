//! Source profiles for the synthetic templates.

use dla_corpus::SourceProfile;
use dla_eval::SynthTemplate;

/// The three templates of the extraction benchmark, under their source ids.
pub fn extraction_sources() -> Vec<(String, SynthTemplate)> {
    vec![
        ("single".into(), SynthTemplate::single_column()),
        ("two-column".into(), SynthTemplate::two_column()),
        ("word-level".into(), SynthTemplate::word_level()),
    ]
}

pub fn template(name: &str) -> Option<SynthTemplate> {
    match name {
        "single" => Some(SynthTemplate::single_column()),
        "two-column" => Some(SynthTemplate::two_column()),
        "word-level" => Some(SynthTemplate::word_level()),
        "hard" => Some(SynthTemplate::hard()),
        _ => None,
    }
}

pub const TEMPLATE_NAMES: [&str; 4] = ["single", "two-column", "word-level", "hard"];

/// A profile whose extraction settings suit `t`.
pub fn profile_for(source_id: &str, t: &SynthTemplate) -> SourceProfile {
    let mut p = SourceProfile::new(source_id, format!("Synthetic {} gazette", t.name));
    p.languages = vec!["es".into()];
    p.extraction.spaceless_words = t.word_level;
    p.extraction.columns = t.columns;
    p
}
