use dla_core::features::join_spans;
use dla_core::{tokens, BoundingBox, LayoutBlock, PageGeometry, TextSpan};
use dla_pdf::lines::line_token_count;
use dla_pdf::{
    detect_tables, merge_lines_into_blocks, reading_key, reconstruct_spaceless_text, suppress_overlapping_text, MergeParams, Segment,
    TableParams, SUPPRESSION_THRESHOLD,
};
use proptest::prelude::*;

fn page() -> PageGeometry {
    PageGeometry::new(0, 595.0, 842.0).unwrap()
}

const WORDS: [&str; 8] = ["real", "decreto", "BOE", "núm.", "12", "de", "Estado", "—"];

fn arb_line() -> impl Strategy<Value = (f64, f64, f64, u8, Vec<usize>)> {
    (20.0..400.0f64, 10.0..800.0f64, 6.0..16.0f64, 0u8..4, prop::collection::vec(0usize..WORDS.len(), 1..6))
}

fn to_spans(lines: &[(f64, f64, f64, u8, Vec<usize>)]) -> Vec<TextSpan> {
    lines
        .iter()
        .enumerate()
        .map(|(id, (x, y, size, style, words))| {
            let text = words.iter().map(|&w| WORDS[w]).collect::<Vec<_>>().join(" ");
            TextSpan {
                text,
                font_name: if style & 1 == 1 { "Times-Bold".into() } else { "Times-Roman".into() },
                font_size: *size,
                bold: style & 1 == 1,
                italic: style & 2 == 2,
                bbox: BoundingBox::new(*x, *y, x + 150.0, y + size).unwrap(),
                line_id: id,
                rotation: 0,
            }
        })
        .collect()
}

fn flatten(blocks: &[LayoutBlock]) -> Vec<TextSpan> {
    blocks.iter().flat_map(|b| b.spans.iter().cloned()).collect()
}

proptest! {
    #[test]
    fn merging_is_idempotent(lines in prop::collection::vec(arb_line(), 0..25)) {
        let spans = to_spans(&lines);
        let p = MergeParams::default();
        let once = merge_lines_into_blocks(&spans, &page(), &p);
        let twice = merge_lines_into_blocks(&flatten(&once), &page(), &p);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn merging_preserves_tokens(lines in prop::collection::vec(arb_line(), 0..25)) {
        let spans = to_spans(&lines);
        let blocks = merge_lines_into_blocks(&spans, &page(), &MergeParams::default());
        let merged: usize = blocks.iter().map(|b| tokens(b.payload.as_deref().unwrap()).count()).sum();
        prop_assert_eq!(merged, line_token_count(&spans));
        let expected: usize = spans.iter().map(|s| tokens(&s.text).count()).sum();
        prop_assert_eq!(merged, expected);
    }

    #[test]
    fn blocks_follow_reading_order(lines in prop::collection::vec(arb_line(), 0..25)) {
        let p = MergeParams::default();
        let blocks = merge_lines_into_blocks(&to_spans(&lines), &page(), &p);
        for w in blocks.windows(2) {
            let (a, b) = (reading_key(&w[0].bbox, p.line_quantum), reading_key(&w[1].bbox, p.line_quantum));
            prop_assert!(a.0 < b.0 || (a.0 == b.0 && a.1 <= b.1));
        }
        for b in &blocks {
            prop_assert!(b.bbox.x0 <= b.bbox.x1 && b.bbox.y0 <= b.bbox.y1);
            prop_assert!(b.validate().is_ok());
        }
    }

    #[test]
    fn spaceless_reconstruction_ignores_input_order(
        words in prop::collection::vec((0usize..WORDS.len(), 0usize..3, 0.0..500.0f64), 1..20),
        seed in any::<u64>(),
    ) {
        let spans: Vec<TextSpan> = words
            .iter()
            .map(|&(w, line, x)| TextSpan {
                text: WORDS[w].into(),
                font_name: "Times-Roman".into(),
                font_size: 10.0,
                bold: false,
                italic: false,
                bbox: BoundingBox::new(x, 20.0 * line as f64, x + 30.0, 20.0 * line as f64 + 10.0).unwrap(),
                line_id: line,
                rotation: 0,
            })
            .collect();
        let mut shuffled = spans.clone();
        let n = shuffled.len();
        for i in 0..n {
            let j = (seed.wrapping_mul(i as u64 + 7) % n as u64) as usize;
            shuffled.swap(i, j);
        }
        let mut sorted = spans.clone();
        sorted.sort_by(|a, b| a.line_id.cmp(&b.line_id).then(a.bbox.x0.total_cmp(&b.bbox.x0)).then(a.text.cmp(&b.text)));
        let oracle: Vec<String> = {
            let mut out: Vec<(usize, Vec<&str>)> = Vec::new();
            for s in &sorted {
                match out.last_mut() {
                    Some((l, v)) if *l == s.line_id => v.push(&s.text),
                    _ => out.push((s.line_id, vec![&s.text])),
                }
            }
            out.into_iter().map(|(_, v)| v.join(" ")).collect()
        };
        let got: Vec<String> = reconstruct_spaceless_text(&shuffled).into_iter().map(|s| s.text).collect();
        prop_assert_eq!(got, oracle);
    }

    #[test]
    fn suppression_postcondition(
        boxes in prop::collection::vec((0.0..500.0f64, 0.0..800.0f64, 1.0..200.0f64, 1.0..100.0f64), 0..30),
        tables in prop::collection::vec((0.0..500.0f64, 0.0..800.0f64, 10.0..300.0f64, 10.0..300.0f64), 0..4),
    ) {
        let blocks: Vec<LayoutBlock> = boxes
            .iter()
            .enumerate()
            .map(|(i, &(x, y, w, h))| LayoutBlock::text(format!("b{i}"), 0, BoundingBox::new(x, y, x + w, y + h).unwrap(), "t".into(), vec![]))
            .collect();
        let tb: Vec<BoundingBox> = tables.iter().map(|&(x, y, w, h)| BoundingBox::new(x, y, x + w, y + h).unwrap()).collect();
        let (kept, removed) = suppress_overlapping_text(blocks.clone(), &tb);
        prop_assert_eq!(kept.len() + removed, blocks.len());
        for b in &kept {
            for t in &tb {
                prop_assert!(b.bbox.overlap_fraction(t) <= SUPPRESSION_THRESHOLD);
            }
        }
        for b in &blocks {
            let survives = kept.iter().any(|k| k.block_id == b.block_id);
            let covered = tb.iter().any(|t| b.bbox.overlap_fraction(t) > SUPPRESSION_THRESHOLD);
            prop_assert_eq!(survives, !covered);
        }
    }

    #[test]
    fn tables_are_translation_invariant_and_conserve_tokens(
        rows in 1usize..5, cols in 1usize..5,
        x in 10.0..200.0f64, y in 10.0..400.0f64,
        dx in -5.0..5.0f64, dy in -5.0..5.0f64,
        fill in prop::collection::vec(prop::collection::vec(0usize..WORDS.len(), 0..3), 16),
    ) {
        let (cw, ch) = (60.0, 20.0);
        let mut segs = Vec::new();
        for r in 0..=rows {
            segs.push(Segment::new(x, y + ch * r as f64, x + cw * cols as f64, y + ch * r as f64));
        }
        for c in 0..=cols {
            segs.push(Segment::new(x + cw * c as f64, y, x + cw * c as f64, y + ch * rows as f64));
        }
        let mut spans = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                for (k, &w) in fill[r * 4 + c].iter().enumerate() {
                    let sx = x + cw * c as f64 + 3.0;
                    let sy = y + ch * r as f64 + 2.0 + 8.0 * k as f64;
                    spans.push(TextSpan {
                        text: WORDS[w].into(),
                        font_name: "Helvetica".into(),
                        font_size: 6.0,
                        bold: false,
                        italic: false,
                        bbox: BoundingBox::new(sx, sy, sx + 20.0, sy + 6.0).unwrap(),
                        line_id: spans.len(),
                        rotation: 0,
                    });
                }
            }
        }
        let g = page();
        let p = TableParams::default();
        let t = detect_tables(&segs, &spans, &g, &p);
        prop_assert_eq!(t.len(), 1);
        prop_assert_eq!((t[0].rows(), t[0].cols()), (rows, cols));
        prop_assert_eq!(t[0].cells.len(), rows);
        prop_assert!(t[0].cells.iter().all(|r| r.len() == cols));

        let mut cell_tokens: Vec<String> = t[0].cells.iter().flatten().flat_map(|c| tokens(c).map(str::to_string).collect::<Vec<_>>()).collect();
        let mut span_tokens: Vec<String> = spans.iter().flat_map(|s| tokens(&join_spans(std::slice::from_ref(s))).map(str::to_string).collect::<Vec<_>>()).collect();
        cell_tokens.sort();
        span_tokens.sort();
        prop_assert_eq!(cell_tokens, span_tokens);

        let moved_segs: Vec<Segment> = segs.iter().map(|s| s.translate(dx, dy)).collect();
        let moved_spans: Vec<TextSpan> = spans.iter().map(|s| TextSpan { bbox: s.bbox.translate(dx, dy), ..s.clone() }).collect();
        let moved = detect_tables(&moved_segs, &moved_spans, &g, &p);
        prop_assert_eq!(moved.len(), 1);
        let shifted = t[0].bbox.translate(dx, dy);
        prop_assert_eq!(moved[0].bbox, shifted);
        prop_assert_eq!(&moved[0].cells, &t[0].cells);
    }
}
