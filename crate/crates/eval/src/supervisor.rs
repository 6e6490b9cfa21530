//! A simulated supervisor that corrects labels from the ground truth and
//! validates documents, standing in for a person using the review UI.

use std::collections::BTreeMap;

use serde::Serialize;

use dla_corpus::{edit_label, validate_document, Corpus, LabelEdit, LayoutRecord, Result};

use crate::score::match_blocks;
use crate::synth::{TruthBlock, TruthDoc};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Review {
    pub text_blocks: usize,
    /// Blocks whose label the supervisor changed.
    pub corrected: usize,
    /// Text blocks with no ground-truth counterpart; left as they are.
    pub unmatched: usize,
    pub newly_validated: bool,
}

/// Sets every matched text block to its true label, then validates.
pub fn review_document(corpus: &Corpus, truth: &TruthDoc) -> Result<Review> {
    let records = corpus.layout(&truth.doc_id)?;
    let mut review = Review::default();
    for (p, page) in truth.pages.iter().enumerate() {
        let t: Vec<&TruthBlock> = page.blocks.iter().collect();
        let e: Vec<&LayoutRecord> = records.iter().filter(|r| r.page == p).collect();
        let pairs: BTreeMap<usize, usize> = match_blocks(&t, &e).into_iter().map(|(i, j)| (j, i)).collect();
        for (j, r) in e.iter().enumerate().filter(|(_, r)| r.is_text()) {
            review.text_blocks += 1;
            match pairs.get(&j) {
                Some(&i) if t[i].label != r.label => {
                    edit_label(corpus, &truth.doc_id, &r.block_id, LabelEdit::Set(t[i].label))?;
                    review.corrected += 1;
                }
                Some(_) => {}
                None => review.unmatched += 1,
            }
        }
    }
    review.newly_validated = validate_document(corpus, &truth.doc_id)?;
    Ok(review)
}
