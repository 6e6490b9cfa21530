//! Grouping positioned runs into lines, and lines into text blocks.

use std::collections::BTreeMap;

use dla_core::features::{join_spans, text_features, WORD_GAP_FACTOR};
use dla_core::{preprocess_text, tokens, BoundingBox, LayoutBlock, PageGeometry, TextSpan};

use crate::content::TextRun;
use crate::tables::Segment;

/// Runs whose baselines differ by at most this fraction of the font size share a line.
pub const BASELINE_TOLERANCE: f64 = 0.3;
/// Largest horizontal gap (in font sizes) bridged between runs of one line.
pub const MAX_RUN_GAP: f64 = 1.0;
/// Largest horizontal overlap (in font sizes) tolerated between consecutive runs.
pub const MAX_RUN_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeParams {
    /// Lines merge when their vertical gap is at most this many median line heights.
    pub gap_factor: f64,
    /// Vertical bucket (points) of the reading-order key.
    pub line_quantum: f64,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self { gap_factor: 0.6, line_quantum: 3.0 }
    }
}

/// Reading-order key: top-to-bottom in `quantum` buckets, then left to right.
pub fn reading_key(b: &BoundingBox, quantum: f64) -> (i64, f64) {
    ((b.y0 / quantum).round() as i64, b.x0)
}

pub fn cmp_reading(a: &BoundingBox, b: &BoundingBox, quantum: f64) -> std::cmp::Ordering {
    let (ka, kb) = (reading_key(a, quantum), reading_key(b, quantum));
    ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
}

/// A vertical rule crossing the horizontal interval `(x_from, x_to)` at height `y`.
fn rule_between(rules: &[Segment], x_from: f64, x_to: f64, y: f64) -> bool {
    rules.iter().any(|s| {
        let vertical = (s.x1 - s.x0).abs() <= 0.5 && (s.y1 - s.y0).abs() > 0.0;
        let x = (s.x0 + s.x1) / 2.0;
        vertical && x > x_from && x < x_to && y >= s.y0.min(s.y1) && y <= s.y0.max(s.y1)
    })
}

/// A horizontal rule lying between two vertically stacked boxes and overlapping both.
fn rule_under(rules: &[Segment], upper: &BoundingBox, lower: &BoundingBox) -> bool {
    let (top, bottom) = ((upper.y0 + upper.y1) / 2.0, (lower.y0 + lower.y1) / 2.0);
    rules.iter().any(|s| {
        let horizontal = (s.y1 - s.y0).abs() <= 0.5 && (s.x1 - s.x0).abs() > 0.0;
        let y = (s.y0 + s.y1) / 2.0;
        let (lo, hi) = (s.x0.min(s.x1), s.x0.max(s.x1));
        horizontal && y > top && y < bottom && lo < upper.x1.min(lower.x1) && hi > upper.x0.max(lower.x0)
    })
}

fn same_run_style(a: &TextRun, b: &TextRun) -> bool {
    a.font_name == b.font_name && a.font_size == b.font_size && a.bold == b.bold && a.italic == b.italic
}

fn run_span(r: &TextRun) -> TextSpan {
    TextSpan {
        text: r.text.clone(),
        font_name: r.font_name.clone(),
        font_size: r.font_size,
        bold: r.bold,
        italic: r.italic,
        bbox: r.bbox,
        line_id: 0,
        rotation: r.rotation,
    }
}

/// Groups runs into lines and returns their spans with line ids in reading order.
///
/// Horizontal runs share a line when their baselines agree and the gap
/// between them is small; a vertical rule between two runs always separates
/// them. Adjacent runs with identical style are coalesced into one span.
/// Rotated runs each form their own line.
pub fn build_lines(runs: &[TextRun], rules: &[Segment], quantum: f64) -> Vec<TextSpan> {
    let mut order: Vec<usize> = (0..runs.len()).filter(|&i| !runs[i].text.is_empty()).collect();
    order.sort_by(|&a, &b| runs[a].bbox.x0.total_cmp(&runs[b].bbox.x0).then(runs[a].origin.1.total_cmp(&runs[b].origin.1)));
    let mut lines: Vec<Vec<usize>> = Vec::new();
    for i in order {
        let r = &runs[i];
        if r.rotation != 0 {
            lines.push(vec![i]);
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (li, line) in lines.iter().enumerate() {
            let last = &runs[*line.last().expect("lines are never empty")];
            if last.rotation != 0 {
                continue;
            }
            let size = last.font_size.max(r.font_size);
            let gap = r.bbox.x0 - last.bbox.x1;
            let aligned = (last.origin.1 - r.origin.1).abs() <= BASELINE_TOLERANCE * size;
            if !aligned || gap > MAX_RUN_GAP * size || gap < -MAX_RUN_OVERLAP * size {
                continue;
            }
            if rule_between(rules, last.bbox.x1, r.bbox.x0, r.origin.1 - 0.3 * r.font_size) {
                continue;
            }
            if best.is_none_or(|(_, g)| gap.abs() < g) {
                best = Some((li, gap.abs()));
            }
        }
        match best {
            Some((li, _)) => lines[li].push(i),
            None => lines.push(vec![i]),
        }
    }
    let mut built: Vec<Vec<TextSpan>> = lines
        .iter()
        .map(|line| {
            let mut spans: Vec<TextSpan> = Vec::new();
            let mut prev: Option<&TextRun> = None;
            for &i in line {
                let r = &runs[i];
                match (spans.last_mut(), prev) {
                    (Some(cur), Some(p)) if same_run_style(p, r) => {
                        if r.bbox.x0 - cur.bbox.x1 > WORD_GAP_FACTOR * r.font_size {
                            cur.text.push(' ');
                        }
                        cur.text.push_str(&r.text);
                        cur.bbox = cur.bbox.union(&r.bbox);
                    }
                    _ => spans.push(run_span(r)),
                }
                prev = Some(r);
            }
            spans
        })
        .collect();
    built.sort_by(|a, b| cmp_reading(&line_bbox(a), &line_bbox(b), quantum));
    let mut out = Vec::new();
    for (id, line) in built.into_iter().enumerate() {
        for mut s in line {
            s.line_id = id;
            out.push(s);
        }
    }
    out
}

fn line_bbox(spans: &[TextSpan]) -> BoundingBox {
    spans.iter().skip(1).fold(spans[0].bbox, |acc, s| acc.union(&s.bbox))
}

/// Rebuilds spaced text from word-level items: words are grouped by line
/// reference, sorted by x0 and joined with single spaces, giving one span
/// per line (styled like its leftmost word) with the union bbox.
pub fn reconstruct_spaceless_text(words: &[TextSpan]) -> Vec<TextSpan> {
    let mut by_line: BTreeMap<usize, Vec<&TextSpan>> = BTreeMap::new();
    for w in words {
        by_line.entry(w.line_id).or_default().push(w);
    }
    by_line
        .into_values()
        .map(|mut ws| {
            ws.sort_by(|a, b| a.bbox.x0.total_cmp(&b.bbox.x0).then(a.text.cmp(&b.text)));
            let mut span = ws[0].clone();
            span.text = ws.iter().map(|w| w.text.trim()).filter(|t| !t.is_empty()).collect::<Vec<_>>().join(" ");
            span.bbox = ws.iter().skip(1).fold(ws[0].bbox, |acc, w| acc.union(&w.bbox));
            span
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Line {
    spans: Vec<TextSpan>,
    bbox: BoundingBox,
    fonts: Vec<String>,
    bold: bool,
    italic: bool,
    rotation: u16,
}

fn group_lines(spans: &[TextSpan]) -> Vec<Line> {
    let mut by_id: BTreeMap<usize, Vec<TextSpan>> = BTreeMap::new();
    for s in spans {
        by_id.entry(s.line_id).or_default().push(s.clone());
    }
    by_id
        .into_values()
        .filter_map(|mut spans| {
            spans.sort_by(|a, b| a.bbox.x0.total_cmp(&b.bbox.x0).then(a.bbox.y0.total_cmp(&b.bbox.y0)));
            let tf = text_features(&spans)?;
            Some(Line {
                bbox: line_bbox(&spans),
                fonts: tf.fonts,
                bold: tf.bold_ratio > 0.5,
                italic: tf.italic_ratio > 0.5,
                rotation: spans[0].rotation,
                spans,
            })
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Merges lines into text blocks without ruling information.
pub fn merge_lines_into_blocks(spans: &[TextSpan], g: &PageGeometry, p: &MergeParams) -> Vec<LayoutBlock> {
    merge_lines_with_rules(spans, g, p, &[])
}

/// Merges lines into text blocks.
///
/// Lines are visited in reading order. A line joins the block of its
/// predecessor, the closest earlier line overlapping it horizontally, when
/// that predecessor ends its block, the vertical gap is at most
/// `gap_factor` median line heights, the font-name sets and bold/italic
/// flags agree and no horizontal rule separates them. Blocks are emitted
/// in reading order with ids `p<page>-x<k>`.
pub fn merge_lines_with_rules(spans: &[TextSpan], g: &PageGeometry, p: &MergeParams, rules: &[Segment]) -> Vec<LayoutBlock> {
    let mut lines = group_lines(spans);
    lines.sort_by(|a, b| cmp_reading(&a.bbox, &b.bbox, p.line_quantum));
    let horizontal: Vec<f64> = lines.iter().filter(|l| l.rotation == 0).map(|l| l.bbox.height()).collect();
    let med = if horizontal.is_empty() { median(lines.iter().map(|l| l.bbox.height()).collect()) } else { median(horizontal) };
    let max_gap = p.gap_factor * med;
    let mut block_of: Vec<usize> = Vec::with_capacity(lines.len());
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..lines.len() {
        let line = &lines[i];
        let pred = if line.rotation == 0 {
            (0..i).rev().find(|&j| {
                let o = &lines[j];
                o.rotation == 0 && o.bbox.x0 < line.bbox.x1 && line.bbox.x0 < o.bbox.x1 && o.bbox.y0 < line.bbox.y0
            })
        } else {
            None
        };
        let target = pred.filter(|&j| {
            let o = &lines[j];
            let b = block_of[j];
            let gap = line.bbox.y0 - o.bbox.y1;
            *blocks[b].last().expect("blocks are never empty") == j
                && gap <= max_gap
                && gap >= -med
                && o.fonts == line.fonts
                && o.bold == line.bold
                && o.italic == line.italic
                && !rule_under(rules, &o.bbox, &line.bbox)
        });
        match target {
            Some(j) => {
                let b = block_of[j];
                blocks[b].push(i);
                block_of.push(b);
            }
            None => {
                block_of.push(blocks.len());
                blocks.push(vec![i]);
            }
        }
    }
    let mut out: Vec<LayoutBlock> = Vec::new();
    for members in blocks {
        let spans: Vec<TextSpan> = members.iter().flat_map(|&i| lines[i].spans.iter().cloned()).collect();
        let bbox = members.iter().skip(1).fold(lines[members[0]].bbox, |acc, &i| acc.union(&lines[i].bbox));
        let text = preprocess_text(&join_spans(&spans));
        if text.is_empty() {
            log::warn!("page {}: dropping text block with no visible text", g.page_index);
            continue;
        }
        if bbox.area() <= 0.0 {
            log::warn!("page {}: dropping zero-area text block {:?}", g.page_index, text);
            continue;
        }
        let mut block = LayoutBlock::text(String::new(), g.page_index, bbox, text, spans);
        block.clipped = bbox.exceeds(g.width, g.height);
        out.push(block);
    }
    out.sort_by(|a, b| cmp_reading(&a.bbox, &b.bbox, p.line_quantum));
    for (k, b) in out.iter_mut().enumerate() {
        b.block_id = format!("p{}-x{k}", g.page_index);
    }
    out
}

/// Total token count of a span sequence grouped into lines.
pub fn line_token_count(spans: &[TextSpan]) -> usize {
    group_lines(spans).iter().map(|l| tokens(&join_spans(&l.spans)).count()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn page() -> PageGeometry {
        PageGeometry::new(0, 595.0, 842.0).unwrap()
    }

    fn run(text: &str, x: f64, baseline: f64, size: f64, font: &str) -> TextRun {
        let w = dla_core_width(text, size);
        TextRun {
            text: text.into(),
            font_name: font.into(),
            font_size: size,
            bold: font.contains("Bold"),
            italic: false,
            bbox: BoundingBox::new(x, baseline - 0.8 * size, x + w, baseline + 0.2 * size).unwrap(),
            origin: (x, baseline),
            rotation: 0,
        }
    }

    fn dla_core_width(text: &str, size: f64) -> f64 {
        crate::metrics::text_width("Helvetica", size, text)
    }

    fn line_span(text: &str, line: usize, y0: f64, size: f64, font: &str, bold: bool) -> TextSpan {
        TextSpan {
            text: text.into(),
            font_name: font.into(),
            font_size: size,
            bold,
            italic: false,
            bbox: BoundingBox::new(50.0, y0, 300.0, y0 + size).unwrap(),
            line_id: line,
            rotation: 0,
        }
    }

    #[test]
    fn runs_on_one_baseline_form_one_line() {
        let a = run("Boletín", 50.0, 100.0, 10.0, "Helvetica");
        let b = run("Oficial", a.bbox.x1 + 2.78, 100.0, 10.0, "Helvetica");
        let c = run("lejos", 400.0, 100.0, 10.0, "Helvetica");
        let spans = build_lines(&[c.clone(), b, a], &[], 3.0);
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[0].text, "Boletín Oficial");
        assert_eq!(spans[0].line_id, 0);
        assert_eq!(spans[1].line_id, 1);
    }

    #[test]
    fn vertical_rule_splits_runs() {
        let a = run("uno", 50.0, 100.0, 8.0, "Helvetica");
        let b = run("dos", a.bbox.x1 + 4.0, 100.0, 8.0, "Helvetica");
        let rule = Segment::new(a.bbox.x1 + 2.0, 80.0, a.bbox.x1 + 2.0, 110.0);
        assert_eq!(build_lines(&[a.clone(), b.clone()], &[], 3.0).len(), 1);
        let split = build_lines(&[a, b], &[rule], 3.0);
        assert_eq!(split.len(), 2);
        assert_ne!(split[0].line_id, split[1].line_id);
    }

    #[test]
    fn spaceless_reconstruction() {
        let w1 = line_span("Boletín", 0, 10.0, 10.0, "H", false);
        let mut w2 = line_span("Oficial", 0, 10.0, 10.0, "H", false);
        w2.bbox = w2.bbox.translate(300.0, 0.0);
        let w3 = line_span("Estado", 1, 30.0, 10.0, "H", false);
        let out = reconstruct_spaceless_text(&[w3.clone(), w2.clone(), w1.clone()]);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].text, "Boletín Oficial");
        assert_eq!(out[0].bbox, w1.bbox.union(&w2.bbox));
        assert_eq!(out[1].text, "Estado");
        assert!(reconstruct_spaceless_text(&[]).is_empty());
    }

    #[test]
    fn paragraph_lines_merge() {
        let spans = [line_span("primera línea", 0, 100.0, 12.0, "Helvetica", false), line_span("segunda", 1, 114.0, 12.0, "Helvetica", false)];
        let blocks = merge_lines_into_blocks(&spans, &page(), &MergeParams::default());
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].payload.as_deref(), Some("primera línea segunda"));
        assert_eq!(blocks[0].block_id, "p0-x0");
    }

    #[test]
    fn style_change_splits() {
        let spans = [line_span("cuerpo", 0, 100.0, 12.0, "Helvetica", false), line_span("TITULO", 1, 114.0, 16.0, "Helvetica-Bold", true)];
        assert_eq!(merge_lines_into_blocks(&spans, &page(), &MergeParams::default()).len(), 2);
    }

    #[test]
    fn size_only_difference_still_merges_with_weighted_size() {
        let spans = [
            line_span("a b c d e f g h i j", 0, 100.0, 12.0, "Helvetica", false),
            line_span("k l m n o", 1, 113.0, 18.0, "Helvetica", false),
        ];
        let blocks = merge_lines_into_blocks(&spans, &page(), &MergeParams::default());
        assert_eq!(blocks.len(), 1);
        let fv = dla_core::compute_features(&blocks[0], &page()).unwrap();
        assert_eq!(fv.text.unwrap().font_size, 14.0);
    }

    #[test]
    fn large_gap_splits() {
        let spans = [line_span("uno", 0, 100.0, 12.0, "H", false), line_span("dos", 1, 120.0, 12.0, "H", false)];
        assert_eq!(merge_lines_into_blocks(&spans, &page(), &MergeParams::default()).len(), 2);
    }

    #[test]
    fn horizontal_rule_splits() {
        let spans = [line_span("uno", 0, 100.0, 12.0, "H", false), line_span("dos", 1, 114.0, 12.0, "H", false)];
        let rule = Segment::new(40.0, 113.0, 320.0, 113.0);
        assert_eq!(merge_lines_with_rules(&spans, &page(), &MergeParams::default(), &[rule]).len(), 2);
    }

    #[test]
    fn two_columns_merge_per_column() {
        let mut spans = Vec::new();
        for (k, y) in [100.0, 112.0, 124.0].iter().enumerate() {
            let mut l = line_span(&format!("izq{k}"), 2 * k, *y, 10.0, "H", false);
            l.bbox = BoundingBox::new(50.0, *y, 280.0, y + 10.0).unwrap();
            let mut r = line_span(&format!("der{k}"), 2 * k + 1, *y, 10.0, "H", false);
            r.bbox = BoundingBox::new(310.0, *y, 540.0, y + 10.0).unwrap();
            spans.push(l);
            spans.push(r);
        }
        let blocks = merge_lines_into_blocks(&spans, &page(), &MergeParams::default());
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].payload.as_deref(), Some("izq0 izq1 izq2"));
        assert_eq!(blocks[1].payload.as_deref(), Some("der0 der1 der2"));
    }
}
