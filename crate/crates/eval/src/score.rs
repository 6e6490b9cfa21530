//! Extraction quality against a ground-truth manifest.
//!
//! Blocks are matched one-to-one, greedily by decreasing IoU, and only when
//! the kinds agree and the IoU reaches [`IOU_THRESHOLD`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use dla_core::BlockKind;
use dla_corpus::LayoutRecord;

use crate::synth::{TruthBlock, TruthDoc};

pub const IOU_THRESHOLD: f64 = 0.9;

/// Indices `(truth, extracted)` of matched blocks on one page.
pub fn match_blocks(truth: &[&TruthBlock], extracted: &[&LayoutRecord]) -> Vec<(usize, usize)> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, t) in truth.iter().enumerate() {
        for (j, e) in extracted.iter().enumerate() {
            if t.kind != e.kind {
                continue;
            }
            let iou = t.bbox.iou(&e.bbox);
            if iou >= IOU_THRESHOLD {
                candidates.push((iou, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_t, mut used_e) = (vec![false; truth.len()], vec![false; extracted.len()]);
    let mut out = Vec::new();
    for (_, i, j) in candidates {
        if !used_t[i] && !used_e[j] {
            used_t[i] = true;
            used_e[j] = true;
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out
}

/// Parses an RFC 4180 document into rows.
pub fn parse_csv(text: &str) -> Result<Vec<Vec<String>>, csv::Error> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes())
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KindScore {
    pub truth: usize,
    pub extracted: usize,
    pub matched: usize,
}

impl KindScore {
    pub fn recall(&self) -> f64 {
        ratio(self.matched, self.truth)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.matched, self.extracted)
    }

    fn add(&mut self, o: &KindScore) {
        self.truth += o.truth;
        self.extracted += o.extracted;
        self.matched += o.matched;
    }
}

/// An empty denominator counts as perfect.
fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        1.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractionScore {
    pub documents: usize,
    pub pages: usize,
    pub by_kind: BTreeMap<String, KindScore>,
    pub all: KindScore,
    /// Matched tables, and those whose row and column counts are exact.
    pub tables_matched: usize,
    pub tables_shape_exact: usize,
    pub cells: usize,
    pub cells_exact: usize,
    /// Matched text blocks, and those whose stored label equals the truth.
    pub text_matched: usize,
    pub labels_correct: usize,
    /// First few unmatched blocks, for diagnostics.
    pub misses: Vec<String>,
}

const MAX_MISSES: usize = 20;

impl ExtractionScore {
    pub fn recall(&self) -> f64 {
        self.all.recall()
    }

    pub fn precision(&self) -> f64 {
        self.all.precision()
    }

    pub fn cell_accuracy(&self) -> f64 {
        ratio(self.cells_exact, self.cells)
    }

    pub fn label_accuracy(&self) -> f64 {
        ratio(self.labels_correct, self.text_matched)
    }

    pub fn merge(&mut self, o: &ExtractionScore) {
        self.documents += o.documents;
        self.pages += o.pages;
        for (k, v) in &o.by_kind {
            self.by_kind.entry(k.clone()).or_default().add(v);
        }
        self.all.add(&o.all);
        self.tables_matched += o.tables_matched;
        self.tables_shape_exact += o.tables_shape_exact;
        self.cells += o.cells;
        self.cells_exact += o.cells_exact;
        self.text_matched += o.text_matched;
        self.labels_correct += o.labels_correct;
        for m in &o.misses {
            if self.misses.len() < MAX_MISSES {
                self.misses.push(m.clone());
            }
        }
    }
}

/// Scores one document. `csv` returns the stored CSV for a table record's
/// relative path.
pub fn score_document(truth: &TruthDoc, records: &[LayoutRecord], csv: impl Fn(&str) -> Option<String>) -> ExtractionScore {
    let mut s = ExtractionScore { documents: 1, pages: truth.pages.len(), ..Default::default() };
    for (p, page) in truth.pages.iter().enumerate() {
        let t: Vec<&TruthBlock> = page.blocks.iter().collect();
        let e: Vec<&LayoutRecord> = records.iter().filter(|r| r.page == p).collect();
        let pairs = match_blocks(&t, &e);
        for k in [BlockKind::Image, BlockKind::Table, BlockKind::Link, BlockKind::Text] {
            let ks = KindScore {
                truth: t.iter().filter(|b| b.kind == k).count(),
                extracted: e.iter().filter(|b| b.kind == k).count(),
                matched: pairs.iter().filter(|&&(i, _)| t[i].kind == k).count(),
            };
            s.by_kind.entry(k.to_string()).or_default().add(&ks);
            s.all.add(&ks);
        }
        let mut matched_t = vec![false; t.len()];
        for &(i, j) in &pairs {
            matched_t[i] = true;
            let (tb, rec) = (t[i], e[j]);
            match tb.kind {
                BlockKind::Text => {
                    s.text_matched += 1;
                    if rec.label == tb.label {
                        s.labels_correct += 1;
                    }
                }
                BlockKind::Table => score_table(&mut s, tb, rec, &csv),
                _ => {}
            }
        }
        for (i, b) in t.iter().enumerate().filter(|(i, _)| !matched_t[*i]) {
            if s.misses.len() < MAX_MISSES {
                let near = e
                    .iter()
                    .filter(|r| r.kind == b.kind)
                    .map(|r| (b.bbox.iou(&r.bbox), r.bbox))
                    .max_by(|a, b| a.0.total_cmp(&b.0));
                s.misses.push(format!("{} p{p} #{i} {} {:?} best {:?}", truth.doc_id, b.kind, b.bbox, near));
            }
        }
    }
    s
}

fn score_table(s: &mut ExtractionScore, truth: &TruthBlock, rec: &LayoutRecord, csv: &impl Fn(&str) -> Option<String>) {
    s.tables_matched += 1;
    let want = truth.cells.as_deref().unwrap_or_default();
    let n: usize = want.iter().map(Vec::len).sum();
    s.cells += n;
    let got = rec.f12.as_deref().and_then(csv).and_then(|t| parse_csv(&t).ok()).unwrap_or_default();
    let shape = |g: &[Vec<String>]| (g.len(), g.first().map_or(0, Vec::len));
    if shape(&got) == shape(want) && got.iter().all(|r| r.len() == want[0].len()) {
        s.tables_shape_exact += 1;
    }
    for (i, row) in want.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if got.get(i).and_then(|r| r.get(j)) == Some(cell) {
                s.cells_exact += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dla_core::{BoundingBox, LabelOrigin, LayoutLabel};

    fn tb(kind: BlockKind, b: [f64; 4]) -> TruthBlock {
        TruthBlock {
            kind,
            label: kind.fixed_label().unwrap_or(LayoutLabel::Body),
            bbox: BoundingBox::try_from(b).unwrap(),
            text: None,
            cells: None,
            column: None,
            rotation: 0,
            style_violation: false,
        }
    }

    fn rec(kind: BlockKind, b: [f64; 4]) -> LayoutRecord {
        let bbox = BoundingBox::try_from(b).unwrap();
        LayoutRecord {
            doc_id: "d".into(),
            source_id: "s".into(),
            page: 0,
            block_id: String::new(),
            kind,
            label: kind.fixed_label().unwrap_or(LayoutLabel::Body),
            bbox,
            center: [0.0; 2],
            margins: [0.0; 4],
            clipped: false,
            f12: None,
            f12_truncated: false,
            f13: None,
            f14: None,
            f15: None,
            f16: None,
            f17: None,
            f18: None,
            label_origin: LabelOrigin::Heuristic,
            model_version: 0,
            confidence: None,
        }
    }

    #[test]
    fn matching_needs_same_kind_and_high_iou() {
        let t = [tb(BlockKind::Text, [0., 0., 100., 10.]), tb(BlockKind::Image, [0., 20., 100., 60.])];
        let e = [
            rec(BlockKind::Image, [0., 0., 100., 10.]),
            rec(BlockKind::Text, [0., 0., 100., 10.5]),
            rec(BlockKind::Image, [0., 20., 100., 50.]),
        ];
        let tr: Vec<&TruthBlock> = t.iter().collect();
        let er: Vec<&LayoutRecord> = e.iter().collect();
        // 100x10 against 100x10.5: IoU 0.952; 40 tall against 30 tall: 0.75
        assert_eq!(match_blocks(&tr, &er), vec![(0, 1)]);
    }

    #[test]
    fn matching_is_one_to_one() {
        let t = [tb(BlockKind::Text, [0., 0., 100., 10.])];
        let e = [rec(BlockKind::Text, [0., 0., 100., 10.]), rec(BlockKind::Text, [0., 0., 100., 10.2])];
        let tr: Vec<&TruthBlock> = t.iter().collect();
        let er: Vec<&LayoutRecord> = e.iter().collect();
        assert_eq!(match_blocks(&tr, &er), vec![(0, 0)]);
    }

    #[test]
    fn table_cells_are_compared_through_the_csv() {
        let mut t = tb(BlockKind::Table, [0., 0., 100., 40.]);
        t.cells = Some(vec![vec!["a, \"b\"".into(), String::new()], vec!["c".into(), "d".into()]]);
        let doc = TruthDoc {
            doc_id: "d".into(),
            file: "f".into(),
            source_id: "s".into(),
            template: "x".into(),
            publication_date: chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            pages: vec![crate::synth::TruthPage { width: 595.0, height: 842.0, blocks: vec![t] }],
        };
        let mut r = rec(BlockKind::Table, [0., 0., 100., 40.]);
        r.f12 = Some("t.csv".into());
        let s = score_document(&doc, &[r.clone()], |_| Some("\"a, \"\"b\"\"\",\nc,x\n".into()));
        assert_eq!((s.tables_matched, s.tables_shape_exact, s.cells, s.cells_exact), (1, 1, 4, 3));
        let s = score_document(&doc, &[r], |_| Some("c,d\n".into()));
        assert_eq!(s.tables_shape_exact, 0);
        assert_eq!((s.recall(), s.precision()), (1.0, 1.0));
    }

    #[test]
    fn empty_denominators_are_perfect() {
        let s = ExtractionScore::default();
        assert_eq!((s.recall(), s.precision(), s.cell_accuracy()), (1.0, 1.0, 1.0));
    }
}
