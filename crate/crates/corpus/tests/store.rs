use std::fs;

use dla_core::{BlockKind, BoundingBox, LabelOrigin, LabelingMode, LayoutLabel};
use dla_corpus::journal::replay_mismatches;
use dla_corpus::overlay::write_overlays;
use dla_corpus::{
    curate, edit_label, ingest_bytes, replay, retrain, revert_label, stats_from_layout, stats_from_manifests, validate_document, verify,
    Corpus, CorpusError, IngestOutcome, LabelEdit, SourceProfile, ValidationStatus, PAYLOAD_LIMIT,
};
use dla_pdf::{Canvas, PdfBuilder};

fn gazette(seed: usize, date: Option<&str>, pages: usize) -> Vec<u8> {
    let mut pdf = PdfBuilder::new();
    if let Some(d) = date {
        pdf = pdf.creation_date(d);
    }
    let reg = pdf.font("Times-Roman");
    let bold = pdf.font("Times-Bold");
    let ital = pdf.font("Times-Italic");
    for p in 0..pages {
        let mut c = Canvas::new(595.0, 842.0);
        c.text(reg, 8.0, 50.0, 40.0, &format!("BOE núm. {seed} lunes {p}"));
        c.text(bold, 11.0, 50.0, 100.0, &format!("REAL DECRETO {seed}/{p}"));
        c.text(ital, 9.0, 50.0, 140.0, "Resumen de la disposición");
        c.text(reg, 10.0, 50.0, 180.0, "Artículo primero. Texto del cuerpo.");
        c.text(reg, 10.0, 50.0, 192.0, "Continúa el cuerpo del artículo.");
        if p == 0 {
            c.image(&BoundingBox::new(400.0, 30.0, 540.0, 80.0).unwrap());
            c.link(BoundingBox::new(50.0, 800.0, 200.0, 810.0).unwrap(), "https://www.boe.es");
            for r in 0..=2 {
                c.line(100.0, 300.0 + 20.0 * r as f64, 400.0, 300.0 + 20.0 * r as f64, 0.5);
            }
            for k in 0..=2 {
                c.line(100.0 + 150.0 * k as f64, 300.0, 100.0 + 150.0 * k as f64, 340.0, 0.5);
            }
            c.text(reg, 8.0, 105.0, 314.0, "a, \"b\"");
            c.text(reg, 8.0, 255.0, 334.0, "d");
        }
        pdf.add_page(c);
    }
    pdf.finish()
}

fn corpus() -> (tempfile::TempDir, Corpus) {
    let dir = tempfile::tempdir().unwrap();
    let c = Corpus::open(dir.path()).unwrap();
    c.save_profile(&SourceProfile::new("1", "Boletín Oficial del Estado")).unwrap();
    (dir, c)
}

fn ingested(c: &Corpus, bytes: &[u8], origin: &str) -> String {
    match ingest_bytes(c, "1", bytes, origin).unwrap() {
        IngestOutcome::Ingested(m) => m.doc_id,
        other => panic!("{other:?}"),
    }
}

#[test]
fn ingestion_writes_every_artifact() {
    let (_d, c) = corpus();
    let id = ingested(&c, &gazette(1, Some("20200101"), 2), "boe-1.pdf");
    let m = c.manifest(&id).unwrap();
    assert_eq!(m.page_count, 2);
    assert_eq!((m.counts.images, m.counts.tables, m.counts.links), (1, 1, 1));
    assert_eq!(m.counts.text, 8);
    assert_eq!(m.suppressed, 2);
    assert_eq!((m.counts.identifier, m.counts.title, m.counts.summary, m.counts.body), (2, 2, 2, 2));
    assert_eq!(m.provenance.heuristic, 11);
    assert!(c.pdf_path(&id).unwrap().is_file());
    let csv = fs::read_to_string(c.path(&format!("tables/{id}/p0_t0.csv"))).unwrap();
    assert_eq!(csv, "\"a, \"\"b\"\"\",\n,d\n");
    let svgs = write_overlays(&c, &id).unwrap();
    assert_eq!(svgs.len(), 2);
    assert!(fs::read_to_string(&svgs[0]).unwrap().contains("stroke=\"pink\""));
    assert!(c.path("sources/1/fonts.tsv").is_file());
    let report = verify(&c).unwrap();
    assert!(report.ok(), "{:?}", report.problems);
    assert_eq!(stats_from_layout(&c, None).unwrap(), stats_from_manifests(&c.manifests(None).unwrap()));
}

#[test]
fn dedup_date_filter_and_missing_dates() {
    let (_d, c) = corpus();
    let bytes = gazette(2, Some("20150607"), 1);
    let id = ingested(&c, &bytes, "a.pdf");
    assert_eq!(ingest_bytes(&c, "1", &bytes, "copy.pdf").unwrap(), IngestOutcome::Duplicate(id));

    let old = gazette(3, Some("20131231"), 1);
    for _ in 0..2 {
        assert!(matches!(ingest_bytes(&c, "1", &old, "old.pdf").unwrap(), IngestOutcome::Filtered(_)));
    }
    let filtered: Vec<serde_json::Value> = c.read_jsonl("filtered.jsonl").unwrap();
    assert_eq!(filtered.len(), 1);
    assert_eq!(filtered[0]["reason"], "filtered_pre2014");

    let by_name = gazette(4, None, 1);
    assert!(matches!(ingest_bytes(&c, "1", &by_name, "dl/BOE-2012-05-01.pdf").unwrap(), IngestOutcome::Filtered(_)));
    let undated = ingested(&c, &gazette(5, None, 1), "x.pdf");
    let m = c.manifest(&undated).unwrap();
    assert_eq!(m.publication_date, None);
    assert!(!m.warnings.is_empty());
    assert_eq!(c.manifests(None).unwrap().len(), 2);
}

#[test]
fn long_payloads_round_trip_through_the_sidecar() {
    let (_d, c) = corpus();
    let id = ingested(&c, &gazette(6, Some("20200101"), 1), "a.pdf");
    let mut records = c.layout(&id).unwrap();
    let long = "palabra ".repeat(400).trim_end().to_string();
    assert!(long.chars().count() > PAYLOAD_LIMIT);
    let t = records.iter_mut().find(|r| r.is_text()).unwrap();
    t.f12 = Some(long.clone());
    c.save_layout(&id, &records).unwrap();
    let raw = fs::read_to_string(c.path(&format!("layout/{id}.jsonl"))).unwrap();
    assert!(raw.contains("\"f12_truncated\":true"));
    assert!(c.path(&format!("layout/{id}.payloads.jsonl")).is_file());
    assert_eq!(c.layout(&id).unwrap(), records);
}

#[test]
fn corrupt_records_are_reported_with_line_numbers() {
    let (_d, c) = corpus();
    let id = ingested(&c, &gazette(7, Some("20200101"), 1), "a.pdf");
    let path = c.path(&format!("layout/{id}.jsonl"));
    let raw = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = raw.lines().map(String::from).collect();
    let k = lines.iter().position(|l| l.contains("\"B\":0")).unwrap();
    lines[k] = lines[k].replace("\"L\":0", "\"L\":4");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    match c.layout(&id) {
        Err(CorpusError::Integrity { line, .. }) => assert_eq!(line, k + 1),
        other => panic!("{other:?}"),
    }
    assert!(!verify(&c).unwrap().ok());
}

#[test]
fn supervisor_edits_are_journaled_and_revertible() {
    let (_d, c) = corpus();
    let id = ingested(&c, &gazette(8, Some("20200101"), 1), "a.pdf");
    let before = c.layout(&id).unwrap();
    let text = before.iter().find(|r| r.label == LayoutLabel::Body).unwrap().clone();
    let image = before.iter().find(|r| r.kind == BlockKind::Image).unwrap().clone();

    let r = edit_label(&c, &id, &text.block_id, LabelEdit::Cycle).unwrap();
    assert_eq!(r.label, LayoutLabel::Identifier);
    assert_eq!(r.label_origin, LabelOrigin::Human);
    assert_eq!((r.kind, r.bbox), (text.kind, text.bbox));
    let seq_after_cycle = c.journal_entries().unwrap().last().unwrap().seq;
    edit_label(&c, &id, &text.block_id, LabelEdit::Set(LayoutLabel::Summary)).unwrap();
    assert!(matches!(edit_label(&c, &id, &image.block_id, LabelEdit::Cycle), Err(CorpusError::NotText { .. })));
    assert!(matches!(edit_label(&c, &id, &text.block_id, LabelEdit::Set(LayoutLabel::Table)), Err(CorpusError::NotTextLabel(_))));
    assert_eq!(c.manifest(&id).unwrap().status, ValidationStatus::InReview);

    let now = c.layout(&id).unwrap();
    assert!(replay_mismatches(&replay(&c.journal_entries().unwrap(), None), &now).is_empty());

    let back = revert_label(&c, &id, &text.block_id, seq_after_cycle).unwrap();
    assert_eq!(back.label, LayoutLabel::Identifier);
    let first = revert_label(&c, &id, &text.block_id, 0).unwrap();
    assert_eq!((first.label, first.label_origin), (text.label, text.label_origin));
    assert!(verify(&c).unwrap().ok());
}

#[test]
fn model_mode_starts_exactly_at_fifty_pages() {
    let (_d, c) = corpus();
    let mut p = SourceProfile::new("1", "BOE");
    p.labeling.n_trees = 10;
    c.save_profile(&p).unwrap();
    let ids: Vec<String> = (0..12).map(|i| ingested(&c, &gazette(100 + i, Some("20200101"), 5), &format!("d{i}.pdf"))).collect();
    assert!(matches!(retrain(&c, "1"), Err(CorpusError::BelowThreshold { pages: 0, needed: 50, .. })));
    for (i, id) in ids.iter().take(10).enumerate() {
        assert!(validate_document(&c, id).unwrap());
        assert!(!validate_document(&c, id).unwrap());
        let report = curate(&c, "1", std::slice::from_ref(id)).unwrap();
        let pages = 5 * (i + 1);
        assert_eq!(report.state.validated_pages, pages);
        assert_eq!(report.state.mode == LabelingMode::Model, pages >= 50, "at {pages} pages");
        assert_eq!(report.trained, pages >= 50);
    }
    assert_eq!(c.state("1").unwrap().model_version, 1);
    assert!(c.path("sources/1/models/v1.json").is_file());
    for id in &ids[10..] {
        let m = c.manifest(id).unwrap();
        assert_eq!(m.model_version, 1);
        assert_eq!(m.provenance.model, m.counts.text);
        let recs = c.layout(id).unwrap();
        assert!(recs.iter().filter(|r| r.is_text()).all(|r| r.label_origin == LabelOrigin::Model && r.confidence.is_some()));
    }
    let again = retrain(&c, "1").unwrap();
    assert_eq!(again.state.model_version, 2);

    let fresh = ingested(&c, &gazette(999, Some("20210101"), 1), "new.pdf");
    assert_eq!(c.manifest(&fresh).unwrap().model_version, 2);
    assert!(verify(&c).unwrap().ok(), "{:?}", verify(&c).unwrap().problems);
}
