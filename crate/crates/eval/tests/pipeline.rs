use std::collections::BTreeSet;

use dla_core::{ForestParams, LayoutLabel};
use dla_corpus::{ingest_paths, stats_from_layout, verify, Corpus, IngestOutcome, SourceProfile};
use dla_eval::protocol::{load_samples, ClassCounts, DocSamples};
use dla_eval::*;

fn small(t: SynthTemplate) -> SynthTemplate {
    SynthTemplate { pages: (2, 4), ..t }
}

fn build(t: SynthTemplate, docs: usize, seed: u64) -> (tempfile::TempDir, Corpus, Vec<TruthDoc>) {
    let dir = tempfile::tempdir().unwrap();
    let generated = generate_corpus(&[("7".to_string(), t.clone())], docs, seed, &dir.path().join("gen")).unwrap();
    let corpus = Corpus::open(dir.path().join("corpus")).unwrap();
    let mut p = SourceProfile::new("7", "synthetic");
    p.extraction.spaceless_words = t.word_level;
    p.extraction.columns = t.columns;
    p.labeling.n_trees = 15;
    corpus.save_profile(&p).unwrap();
    let paths: Vec<_> = generated.iter().map(|g| g.path.clone()).collect();
    for (path, r) in ingest_paths(&corpus, "7", &paths).unwrap() {
        assert!(matches!(r, Ok(IngestOutcome::Ingested(_))), "{path:?}");
    }
    (dir, corpus, generated.into_iter().map(|g| g.truth).collect())
}

#[test]
fn ingested_synthetic_documents_score_perfectly() {
    let (_d, corpus, truth) = build(small(SynthTemplate::word_level()), 6, 1);
    let mut total = ExtractionScore::default();
    for t in &truth {
        let recs = corpus.layout(&t.doc_id).unwrap();
        total.merge(&score_document(t, &recs, |rel| std::fs::read_to_string(corpus.path(rel)).ok()));
    }
    assert_eq!((total.recall(), total.precision(), total.cell_accuracy()), (1.0, 1.0, 1.0), "{:?}", total.misses);
    assert_eq!(total.tables_shape_exact, total.tables_matched);
}

#[test]
fn reviewed_corpus_matches_generator_counts() {
    let (_d, corpus, truth) = build(small(SynthTemplate::two_column()), 6, 2);
    for t in &truth {
        let r = review_document(&corpus, t).unwrap();
        assert!(r.newly_validated);
        assert_eq!(r.unmatched, 0);
    }
    let stats = stats_from_layout(&corpus, None).unwrap().total;
    let count = |l: LayoutLabel| truth.iter().flat_map(|t| t.blocks()).filter(|(_, b)| b.label == l).count();
    assert_eq!(stats.identifier, count(LayoutLabel::Identifier));
    assert_eq!(stats.title, count(LayoutLabel::Title));
    assert_eq!(stats.summary, count(LayoutLabel::Summary));
    assert_eq!(stats.body, count(LayoutLabel::Body));
    assert_eq!(stats.tables, count(LayoutLabel::Table));
    assert_eq!(stats.images, count(LayoutLabel::Image));
    assert_eq!(stats.links, count(LayoutLabel::Link));
    assert_eq!(stats.pages, truth.iter().map(|t| t.pages.len()).sum::<usize>());
    let tokens: usize = truth.iter().flat_map(|t| t.blocks()).filter(|(_, b)| b.kind == dla_core::BlockKind::Text).map(|(_, b)| b.tokens()).sum();
    assert_eq!(stats.tokens, tokens);
    assert!(verify(&corpus).unwrap().ok());
}

#[test]
fn protocol_on_a_reviewed_corpus() {
    let (_d, corpus, truth) = build(small(SynthTemplate::hard()), 10, 3);
    for t in &truth {
        review_document(&corpus, t).unwrap();
    }
    let params = ProtocolParams { repeats: 4, seed: 9, forest: ForestParams { n_trees: 15, ..Default::default() }, ..Default::default() };
    let report = run_protocol(&corpus, "7", &params).unwrap();
    assert!(report.splits_disjoint());
    assert_eq!(report.logs.len(), 4);
    for l in &report.logs {
        assert_eq!((l.train_docs.len(), l.test_docs.len()), (8, 2));
        let all: BTreeSet<&String> = l.train_docs.iter().chain(&l.test_docs).collect();
        assert_eq!(all.len(), 10);
    }
    // mean and population std recomputed from the per-repeat counts
    let per: Vec<f64> = report
        .logs
        .iter()
        .map(|l| 100.0 * l.forest.correct.iter().sum::<usize>() as f64 / l.forest.support.iter().sum::<usize>() as f64)
        .collect();
    let mean = per.iter().sum::<f64>() / per.len() as f64;
    let std = (per.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / per.len() as f64).sqrt();
    let overall = report.forest[0].as_ref().unwrap();
    assert!((overall.mean - mean).abs() < 1e-9 && (overall.std - std).abs() < 1e-9);
    assert_eq!(report.to_json(), run_protocol(&corpus, "7", &params).unwrap().to_json());
    assert!(report.render().contains("Overall"));
}

#[test]
fn constant_labels_give_a_constant_predictor() {
    let docs: Vec<DocSamples> = (0..6)
        .map(|d| DocSamples {
            doc_id: format!("d{d}"),
            x: (0..20).map(|i| vec![i as f64, d as f64]).collect(),
            y: vec![LayoutLabel::Body; 20],
            rules: vec![LayoutLabel::Title; 20],
        })
        .collect();
    let params = ProtocolParams { repeats: 3, forest: ForestParams { n_trees: 5, ..Default::default() }, ..Default::default() };
    let r = run_on_samples("s", &docs, &params).unwrap();
    assert_eq!(r.forest[0].as_ref().unwrap().mean, 100.0);
    assert_eq!(r.forest[4].as_ref().unwrap().mean, 100.0);
    assert!(r.forest[1].is_none() && r.forest[2].is_none() && r.forest[3].is_none());
    assert_eq!(r.rules[0].as_ref().unwrap().mean, 0.0);
    assert!(matches!(run_on_samples("s", &docs[..4], &params), Err(ProtocolError::TooFewDocuments { found: 4, .. })));
    let _ = ClassCounts::default();
}

#[test]
fn load_samples_skips_unvalidated() {
    let (_d, corpus, truth) = build(small(SynthTemplate::single_column()), 3, 4);
    review_document(&corpus, &truth[0]).unwrap();
    let s = load_samples(&corpus, "7").unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].doc_id, truth[0].doc_id);
}
