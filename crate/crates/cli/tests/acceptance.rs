use std::process::Command;

use dla_cli::acceptance::{self, extraction_corpus, extraction_truth, Config};
use dla_cli::workflow::generator_stats;
use dla_corpus::StatsTable;

fn dla(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dla")).args(args).env("RUST_LOG", "warn").output().expect("dla runs")
}

#[test]
fn every_criterion_passes_and_the_cli_agrees() {
    let work = tempfile::tempdir().unwrap();
    let cfg = Config::new(work.path());
    let results = acceptance::run(&cfg, |o| println!("{}", o.line()));
    assert_eq!(results.iter().map(|o| o.id).collect::<Vec<_>>(), (1..=7).collect::<Vec<u8>>());
    let failed: Vec<String> = results.iter().filter(|o| !o.passed).map(|o| o.line()).collect();
    assert!(failed.is_empty(), "{failed:#?}");

    let root = extraction_corpus(work.path());
    let root = root.to_str().unwrap();
    let out = dla(&["--root", root, "stats", "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let printed: StatsTable = serde_json::from_slice(&out.stdout).unwrap();
    let truths = dla_eval::load_truth(&extraction_truth(work.path())).unwrap();
    assert_eq!(printed, generator_stats(&truths));

    let out = dla(&["--root", root, "verify"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains(" 0 problems"));
}

#[test]
fn small_pipeline_through_the_binary() {
    let work = tempfile::tempdir().unwrap();
    let gen = work.path().join("gen");
    let root = work.path().join("corpus");
    let (gen_s, root_s) = (gen.to_str().unwrap(), root.to_str().unwrap());

    assert!(dla(&["generate", "--template", "single", "--docs", "4", "--seed", "3", "--out", gen_s]).status.success());
    assert!(dla(&["--root", root_s, "init", "--synthetic", "single"]).status.success());
    let out = dla(&["--root", root_s, "ingest", "--source", "single", &format!("{gen_s}/pdf/single")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"ingested\": 4"));

    let out = dla(&["--root", root_s, "score", "--truth", gen_s]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("recall 1.0000 precision 1.0000"), "{}", String::from_utf8_lossy(&out.stdout));

    let corpus = dla_corpus::Corpus::open(&root).unwrap();
    let doc = corpus.manifests(None).unwrap().remove(0);
    let block = corpus.layout(&doc.doc_id).unwrap().into_iter().find(|r| r.is_text()).unwrap();
    let out = dla(&["--root", root_s, "label", &doc.doc_id, &block.block_id, "--set", "Title"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec: dla_corpus::LayoutRecord = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rec.label, dla_core::LayoutLabel::Title);
    // unknown block
    let out = dla(&["--root", root_s, "label", &doc.doc_id, "p0-nope", "--cycle"]);
    assert!(!out.status.success());

    assert!(dla(&["--root", root_s, "supervise", "--truth", gen_s]).status.success());
    let out = dla(&["--root", root_s, "train", "single"]);
    // 4 short documents stay under the training threshold
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("50"));
    assert!(dla(&["--root", root_s, "verify"]).status.success());
    assert!(!dla(&["--root", root_s, "fetch", "--source", "single", "http://127.0.0.1:9/x.pdf"]).status.success());
}
