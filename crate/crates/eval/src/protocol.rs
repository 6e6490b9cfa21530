//! Label accuracy under repeated random document-level splits.
//!
//! Each repeat shuffles the validated documents, trains a forest on the first
//! 80% and scores every text block of the remaining 20%. Per-class accuracy
//! is the share of blocks of that true class predicted correctly. Results are
//! percentages, averaged over repeats with their population standard
//! deviation. A class missing from a repeat's test documents is left out of
//! that repeat's average, so each figure reports how many repeats it covers.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use dla_core::labeler::forest::tree_seed;
use dla_core::{normalize_for_classifier, predict, train_forest, ForestParams, LayoutLabel};
use dla_corpus::{Corpus, CorpusError, ValidationStatus};

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("need at least {needed} validated documents, found {found}")]
    TooFewDocuments { found: usize, needed: usize },
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    TrainFraction(f64),
    #[error("repeats must be at least 1")]
    NoRepeats,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("repeat {repeat}: {message}")]
    Training { repeat: usize, message: String },
}

pub const MIN_DOCUMENTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub repeats: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub forest: ForestParams,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self { repeats: 10, train_fraction: 0.8, seed: 0, forest: ForestParams::default() }
    }
}

/// Text blocks of one validated document as classifier input.
#[derive(Debug, Clone)]
pub struct DocSamples {
    pub doc_id: String,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<LayoutLabel>,
    /// What the rule set says for each block.
    pub rules: Vec<LayoutLabel>,
}

/// Every validated document of `source_id`, in doc-id order.
pub fn load_samples(corpus: &Corpus, source_id: &str) -> Result<Vec<DocSamples>, ProtocolError> {
    let fonts = corpus.fonts(source_id)?;
    let rules = corpus.rules(source_id)?;
    let mut out = Vec::new();
    for m in corpus.manifests(Some(source_id))?.into_iter().filter(|m| m.status == ValidationStatus::Validated) {
        let mut d = DocSamples { doc_id: m.doc_id.clone(), x: Vec::new(), y: Vec::new(), rules: Vec::new() };
        for r in corpus.layout(&m.doc_id)?.iter().filter(|r| r.is_text()) {
            let fv = r.feature_vector();
            let g = m.pages.get(r.page).ok_or_else(|| CorpusError::UnknownBlock { doc_id: m.doc_id.clone(), block_id: r.block_id.clone() })?;
            d.x.push(normalize_for_classifier(&fv, g, &fonts).map_err(CorpusError::from)?.to_vec());
            d.y.push(r.label);
            d.rules.push(rules.label(&fv));
        }
        out.push(d);
    }
    Ok(out)
}

/// Correct predictions and support for the four text classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub correct: [usize; 4],
    pub support: [usize; 4],
}

impl ClassCounts {
    pub fn record(&mut self, truth: LayoutLabel, predicted: LayoutLabel) {
        if let Some(i) = truth.text_index() {
            self.support[i] += 1;
            if truth == predicted {
                self.correct[i] += 1;
            }
        }
    }

    pub fn overall(&self) -> Option<f64> {
        let n: usize = self.support.iter().sum();
        (n > 0).then(|| 100.0 * self.correct.iter().sum::<usize>() as f64 / n as f64)
    }

    pub fn class(&self, i: usize) -> Option<f64> {
        (self.support[i] > 0).then(|| 100.0 * self.correct[i] as f64 / self.support[i] as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatLog {
    pub repeat: usize,
    pub seed: u64,
    pub train_docs: Vec<String>,
    pub test_docs: Vec<String>,
    pub forest: ClassCounts,
    pub rules: ClassCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation over the repeats included.
    pub std: f64,
    /// Repeats in which the class occurred in the test documents.
    pub repeats: usize,
    /// Test blocks of the class over all repeats.
    pub support: usize,
}

impl Summary {
    pub fn of(values: &[f64], support: usize) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt(), repeats: values.len(), support })
    }
}

pub const ROWS: [&str; 5] = ["Overall", "ID", "Title", "Summary", "Body"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub source_id: String,
    pub documents: usize,
    pub params: ProtocolParams,
    /// Forest accuracy in [`ROWS`] order; `None` when a class never occurs.
    pub forest: Vec<Option<Summary>>,
    /// The rule set on the same test documents.
    pub rules: Vec<Option<Summary>>,
    pub logs: Vec<RepeatLog>,
}

fn summarize(logs: &[RepeatLog], pick: impl Fn(&RepeatLog) -> &ClassCounts) -> Vec<Option<Summary>> {
    let mut out = Vec::new();
    let overall: Vec<f64> = logs.iter().filter_map(|l| pick(l).overall()).collect();
    out.push(Summary::of(&overall, logs.iter().map(|l| pick(l).support.iter().sum::<usize>()).sum()));
    for i in 0..4 {
        let v: Vec<f64> = logs.iter().filter_map(|l| pick(l).class(i)).collect();
        out.push(Summary::of(&v, logs.iter().map(|l| pick(l).support[i]).sum()));
    }
    out
}

impl EvalReport {
    pub fn from_logs(source_id: &str, documents: usize, params: ProtocolParams, logs: Vec<RepeatLog>) -> Self {
        Self { source_id: source_id.into(), documents, forest: summarize(&logs, |l| &l.forest), rules: summarize(&logs, |l| &l.rules), params, logs }
    }

    /// True when no repeat shares a document between train and test.
    pub fn splits_disjoint(&self) -> bool {
        self.logs.iter().all(|l| {
            let train: BTreeSet<&String> = l.train_docs.iter().collect();
            l.test_docs.iter().all(|d| !train.contains(d))
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "source {}: {} documents, {} repeats, {:.0}/{:.0} document split",
            self.source_id,
            self.documents,
            self.params.repeats,
            100.0 * self.params.train_fraction,
            100.0 * (1.0 - self.params.train_fraction)
        );
        let _ = writeln!(out, "{:<8}  {:>15}  {:>15}  {:>8}  {:>7}", "Class", "Forest (%)", "Rules (%)", "Support", "Repeats");
        let cell = |s: &Option<Summary>| s.as_ref().map_or("n/a".to_string(), |s| format!("{:.2} ± {:.2}", s.mean, s.std));
        for (i, name) in ROWS.iter().enumerate() {
            let (f, r) = (&self.forest[i], &self.rules[i]);
            let support = f.as_ref().map_or(0, |s| s.support);
            let repeats = f.as_ref().map_or(0, |s| s.repeats);
            let _ = writeln!(out, "{name:<8}  {:>15}  {:>15}  {support:>8}  {repeats:>7}", cell(f), cell(r));
        }
        out
    }
}

/// Splits `n` sorted items for one repeat: returns (train, test) indices.
pub fn split(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let test = idx.split_off(n_train);
    (idx, test)
}

/// Runs the protocol over prepared samples.
pub fn run_on_samples(source_id: &str, docs: &[DocSamples], params: &ProtocolParams) -> Result<EvalReport, ProtocolError> {
    if params.repeats == 0 {
        return Err(ProtocolError::NoRepeats);
    }
    if !(params.train_fraction > 0.0 && params.train_fraction < 1.0) {
        return Err(ProtocolError::TrainFraction(params.train_fraction));
    }
    if docs.len() < MIN_DOCUMENTS {
        return Err(ProtocolError::TooFewDocuments { found: docs.len(), needed: MIN_DOCUMENTS });
    }
    let mut sorted: Vec<&DocSamples> = docs.iter().collect();
    sorted.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let logs = (0..params.repeats)
        .into_par_iter()
        .map(|r| {
            let seed = tree_seed(params.seed, r as u64);
            let (train, test) = split(sorted.len(), params.train_fraction, seed);
            let (mut x, mut y) = (Vec::new(), Vec::new());
            for &i in &train {
                x.extend(sorted[i].x.iter().cloned());
                y.extend(sorted[i].y.iter().copied());
            }
            let err = |message: String| ProtocolError::Training { repeat: r, message };
            let model = train_forest(&x, &y, &params.forest.clone().with_seed(seed)).map_err(|e| err(e.to_string()))?;
            let (mut forest, mut rules) = (ClassCounts::default(), ClassCounts::default());
            for &i in &test {
                let d = sorted[i];
                for (k, v) in d.x.iter().enumerate() {
                    let (label, _) = predict(&model, v).map_err(|e| err(e.to_string()))?;
                    forest.record(d.y[k], label);
                    rules.record(d.y[k], d.rules[k]);
                }
            }
            let ids = |v: &[usize]| {
                let mut ids: Vec<String> = v.iter().map(|&i| sorted[i].doc_id.clone()).collect();
                ids.sort();
                ids
            };
            Ok(RepeatLog { repeat: r, seed, train_docs: ids(&train), test_docs: ids(&test), forest, rules })
        })
        .collect::<Result<Vec<_>, ProtocolError>>()?;
    Ok(EvalReport::from_logs(source_id, docs.len(), params.clone(), logs))
}

/// Runs the protocol on the validated documents of one source.
pub fn run_protocol(corpus: &Corpus, source_id: &str, params: &ProtocolParams) -> Result<EvalReport, ProtocolError> {
    let docs = load_samples(corpus, source_id)?;
    run_on_samples(source_id, &docs, params)
}
