use dla_core::{BlockKind, BoundingBox, LabelOrigin, LayoutLabel};
use dla_corpus::{Corpus, LayoutRecord};
use proptest::prelude::*;

fn arb_record() -> impl Strategy<Value = LayoutRecord> {
    (
        0usize..4,
        0usize..4,
        (0.0..500.0f64, 0.0..800.0f64, 0.1..90.0f64, 0.1..40.0f64),
        "[a-zñé ]{1,40}",
        0usize..3000,
        (0.0..=1.0f64, 0.0..=1.0f64, 4.0..20.0f64, 0.0..=1.0f64, 1usize..500),
        0usize..3,
        prop::option::of(0.0..=1.0f64),
    )
        .prop_map(|(kind, label, (x, y, w, h), text, extra, (b, i, size, caps, ntok), origin, conf)| {
            let kind = [BlockKind::Image, BlockKind::Table, BlockKind::Link, BlockKind::Text][kind];
            let label = kind.fixed_label().unwrap_or(LayoutLabel::TEXT[label]);
            let bbox = BoundingBox::new(x, y, x + w, y + h).unwrap();
            let is_text = kind == BlockKind::Text;
            let payload = match kind {
                BlockKind::Image => None,
                BlockKind::Text => Some(format!("{text}{}", "x".repeat(extra))),
                _ => Some(text),
            };
            LayoutRecord {
                doc_id: "doc".into(),
                source_id: "s".into(),
                page: 0,
                block_id: String::new(),
                kind,
                label,
                bbox,
                center: [x + w / 2.0, y + h / 2.0],
                margins: [x, y, 595.0 - x - w, 842.0 - y - h],
                clipped: false,
                f12: payload,
                f12_truncated: false,
                f13: is_text.then_some(b),
                f14: is_text.then_some(i),
                f15: is_text.then_some(size),
                f16: is_text.then(|| vec!["Times-Roman".to_string()]),
                f17: is_text.then_some(caps),
                f18: is_text.then_some(ntok),
                label_origin: [LabelOrigin::Heuristic, LabelOrigin::Model, LabelOrigin::Human][origin],
                model_version: origin as u32,
                confidence: if is_text { conf } else { None },
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layout_persistence_is_lossless(mut records in prop::collection::vec(arb_record(), 0..12)) {
        for (k, r) in records.iter_mut().enumerate() {
            r.block_id = format!("p0-{}{k}", r.kind.tag());
        }
        let dir = tempfile::tempdir().unwrap();
        let c = Corpus::open(dir.path()).unwrap();
        c.save_layout("doc", &records).unwrap();
        prop_assert_eq!(c.layout("doc").unwrap(), records.clone());
        c.save_layout("doc", &records).unwrap();
        let first = std::fs::read(c.path("layout/doc.jsonl")).unwrap();
        c.save_layout("doc", &c.layout("doc").unwrap()).unwrap();
        prop_assert_eq!(std::fs::read(c.path("layout/doc.jsonl")).unwrap(), first);
    }
}
