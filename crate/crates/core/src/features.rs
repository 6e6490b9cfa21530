//! Per-block layout features and their numeric classifier form.
//!
//! Every block gets its page index, box, center and page-edge distances.
//! Text blocks also get style descriptors computed over their tokens:
//! bold and italic proportions, mean font size, the font-name tuple, the
//! capital-letter proportion and the token count.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{page_margins, BoundingBox, PageGeometry, PageMargins};
use crate::layout::{BlockKind, LayoutBlock, LayoutLabel, TextSpan};
use crate::text::{is_separator, preprocess_text};

/// Identifies the component order produced by [`normalize_for_classifier`].
pub const FEATURE_VERSION: &str = "layout-f1-f18/v1";

/// Length of the classifier vector.
pub const N_FEATURES: usize = 17;

/// Horizontal gap, as a fraction of the font size, above which two spans on
/// one line are separated by a space.
pub const WORD_GAP_FACTOR: f64 = 0.15;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("text block {0} is empty after preprocessing")]
    EmptyText(String),
    #[error("text block {0} carries no spans")]
    NoSpans(String),
    #[error("block {0} is not a text block")]
    NotText(String),
    #[error("font dictionary line {line}: {message}")]
    FontTable { line: usize, message: String },
}

/// Style descriptors of a text block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextFeatures {
    /// f13
    pub bold_ratio: f64,
    /// f14
    pub italic_ratio: f64,
    /// f15
    pub font_size: f64,
    /// f16, sorted and deduplicated
    pub fonts: Vec<String>,
    /// f17
    pub caps_ratio: f64,
    /// f18
    pub tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// f1
    pub page: usize,
    /// f2..f5
    pub bbox: BoundingBox,
    /// f6, f7
    pub center: (f64, f64),
    /// f8..f11
    pub margins: PageMargins,
    /// f12
    pub payload: Option<String>,
    /// f13..f18, text blocks only
    pub text: Option<TextFeatures>,
    pub kind: BlockKind,
    pub label: LayoutLabel,
}

/// Raw text of a run of spans together with the index of the span each
/// character came from.
///
/// Spans on different lines are joined with a space; spans on the same line
/// are joined with a space when the horizontal gap between them exceeds
/// [`WORD_GAP_FACTOR`] times the font size.
pub fn attributed_text(spans: &[TextSpan]) -> Vec<(char, usize)> {
    let mut out = Vec::new();
    for (i, span) in spans.iter().enumerate() {
        if i > 0 && needs_space(&spans[i - 1], span) {
            out.push((' ', i));
        }
        out.extend(span.text.chars().map(|c| (c, i)));
    }
    out
}

fn needs_space(prev: &TextSpan, next: &TextSpan) -> bool {
    if prev.line_id != next.line_id || prev.rotation != next.rotation {
        return true;
    }
    let gap = if next.rotation == 0 { next.bbox.x0 - prev.bbox.x1 } else { 0.0 };
    gap > WORD_GAP_FACTOR * next.font_size.max(prev.font_size)
}

/// Raw (unprocessed) block text built from its spans.
pub fn join_spans(spans: &[TextSpan]) -> String {
    attributed_text(spans).into_iter().map(|(c, _)| c).collect()
}

/// Token-level statistics of a span sequence: each token takes the style of
/// the span holding its first character.
pub fn text_features(spans: &[TextSpan]) -> Option<TextFeatures> {
    let chars = attributed_text(spans);
    let mut tokens = 0usize;
    let mut bold = 0usize;
    let mut italic = 0usize;
    let mut size_sum = 0.0;
    let mut upper = 0usize;
    let mut letters = 0usize;
    let mut in_token = false;
    for &(c, idx) in &chars {
        if is_separator(c) {
            in_token = false;
            continue;
        }
        if !in_token {
            in_token = true;
            tokens += 1;
            let s = &spans[idx];
            bold += s.bold as usize;
            italic += s.italic as usize;
            size_sum += s.font_size;
        }
        if c.is_alphabetic() {
            letters += 1;
            upper += c.is_uppercase() as usize;
        }
    }
    if tokens == 0 {
        return None;
    }
    let mut fonts: Vec<String> = spans
        .iter()
        .filter(|s| s.text.chars().any(|c| !is_separator(c)))
        .map(|s| s.font_name.clone())
        .collect();
    fonts.sort();
    fonts.dedup();
    let n = tokens as f64;
    Some(TextFeatures {
        bold_ratio: bold as f64 / n,
        italic_ratio: italic as f64 / n,
        font_size: size_sum / n,
        fonts,
        caps_ratio: if letters == 0 { 0.0 } else { upper as f64 / letters as f64 },
        tokens,
    })
}

pub fn compute_features(b: &LayoutBlock, g: &PageGeometry) -> Result<FeatureVector, FeatureError> {
    let margins = page_margins(&b.bbox, g);
    let (payload, text) = match b.kind {
        BlockKind::Image => (None, None),
        BlockKind::Table | BlockKind::Link => (b.payload.clone(), None),
        BlockKind::Text => {
            if b.spans.is_empty() {
                return Err(FeatureError::NoSpans(b.block_id.clone()));
            }
            let tf = text_features(&b.spans).ok_or_else(|| FeatureError::EmptyText(b.block_id.clone()))?;
            let payload = b.payload.clone().unwrap_or_else(|| preprocess_text(&join_spans(&b.spans)));
            if payload.is_empty() {
                return Err(FeatureError::EmptyText(b.block_id.clone()));
            }
            (Some(payload), Some(tf))
        }
    };
    Ok(FeatureVector {
        page: b.page_index,
        bbox: b.bbox,
        center: b.bbox.center(),
        margins,
        payload,
        text,
        kind: b.kind,
        label: b.label,
    })
}

/// Stable per-source mapping from font-name tuples to small integer codes.
///
/// Codes start at 1 in insertion order; 0 is reserved for tuples never seen.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FontDictionary {
    codes: IndexMap<Vec<String>, u32>,
}

impl FontDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Returns the tuple's code, assigning the next one if it is new.
    pub fn register(&mut self, fonts: &[String]) -> u32 {
        if let Some(code) = self.codes.get(fonts) {
            return *code;
        }
        let code = self.codes.values().copied().max().unwrap_or(0) + 1;
        self.codes.insert(fonts.to_vec(), code);
        code
    }

    pub fn encode(&self, fonts: &[String]) -> u32 {
        self.codes.get(fonts).copied().unwrap_or(0)
    }

    pub fn decode(&self, code: u32) -> Option<&[String]> {
        self.codes.iter().find(|(_, c)| **c == code).map(|(k, _)| k.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[String], u32)> {
        self.codes.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    /// `code<TAB>font|font|...` per line, in insertion order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (fonts, code) in &self.codes {
            out.push_str(&code.to_string());
            out.push('\t');
            out.push_str(&fonts.join("|"));
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(s: &str) -> Result<Self, FeatureError> {
        let mut codes = IndexMap::new();
        let mut seen = std::collections::HashSet::new();
        for (i, line) in s.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| FeatureError::FontTable { line: i + 1, message };
            let (code, tuple) = line.split_once('\t').ok_or_else(|| err("missing TAB".into()))?;
            let code: u32 = code.trim().parse().map_err(|_| err(format!("bad code {code:?}")))?;
            if code == 0 {
                return Err(err("code 0 is reserved".into()));
            }
            if !seen.insert(code) {
                return Err(err(format!("duplicate code {code}")));
            }
            let fonts: Vec<String> =
                if tuple.is_empty() { Vec::new() } else { tuple.split('|').map(str::to_string).collect() };
            if codes.insert(fonts, code).is_some() {
                return Err(err("duplicate font tuple".into()));
            }
        }
        Ok(Self { codes })
    }
}

/// Classifier input: `[f1, f2/W, f3/H, f4/W, f5/H, f6/W, f7/H, f8/W, f9/H,
/// f10/W, f11/H, f13, f14, f15, code(f16), f17, f18]`.
///
/// Geometry is normalized by the page size; the page index stays raw.
pub fn normalize_for_classifier(
    fv: &FeatureVector,
    g: &PageGeometry,
    fd: &FontDictionary,
) -> Result<[f64; N_FEATURES], FeatureError> {
    let t = fv.text.as_ref().ok_or_else(|| FeatureError::NotText(format!("page {} {:?}", fv.page, fv.bbox)))?;
    let (w, h) = (g.width, g.height);
    let b = &fv.bbox;
    let m = &fv.margins;
    Ok([
        fv.page as f64,
        b.x0 / w,
        b.y0 / h,
        b.x1 / w,
        b.y1 / h,
        fv.center.0 / w,
        fv.center.1 / h,
        m.left / w,
        m.top / h,
        m.right / w,
        m.bottom / h,
        t.bold_ratio,
        t.italic_ratio,
        t.font_size,
        fd.encode(&t.fonts) as f64,
        t.caps_ratio,
        t.tokens as f64,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn span(text: &str, font: &str, size: f64, bold: bool, italic: bool, x0: f64, line: usize) -> TextSpan {
        let w = text.chars().count() as f64 * size * 0.5;
        TextSpan {
            text: text.into(),
            font_name: font.into(),
            font_size: size,
            bold,
            italic,
            bbox: BoundingBox::new(x0, line as f64 * size * 1.2, x0 + w, line as f64 * size * 1.2 + size).unwrap(),
            line_id: line,
            rotation: 0,
        }
    }

    fn block(spans: Vec<TextSpan>) -> LayoutBlock {
        let bbox = spans.iter().map(|s| s.bbox).reduce(|a, b| a.union(&b)).unwrap();
        let text = preprocess_text(&join_spans(&spans));
        LayoutBlock::text("p0-x0".into(), 0, bbox, text, spans)
    }

    fn page() -> PageGeometry {
        PageGeometry::new(0, 595.0, 842.0).unwrap()
    }

    #[test]
    fn all_bold_heading() {
        let b = block(vec![span("REAL DECRETO 12/2020", "Helvetica-Bold", 14.0, true, false, 50.0, 0)]);
        let fv = compute_features(&b, &page()).unwrap();
        let t = fv.text.unwrap();
        assert_eq!(t.bold_ratio, 1.0);
        assert_eq!(t.tokens, 3);
        assert_eq!(t.font_size, 14.0);
        assert_eq!(t.caps_ratio, 1.0);
        assert_eq!(t.fonts, vec!["Helvetica-Bold".to_string()]);
    }

    #[test]
    fn partial_bold_ratio() {
        let b = block(vec![
            span("uno dos", "H-B", 10.0, true, false, 0.0, 0),
            span("tres cuatro cinco seis siete ocho", "H", 10.0, false, false, 0.0, 1),
        ]);
        let t = compute_features(&b, &page()).unwrap().text.unwrap();
        assert_eq!(t.tokens, 8);
        assert_eq!(t.bold_ratio, 0.25);
        assert_eq!(t.fonts, vec!["H".to_string(), "H-B".to_string()]);
    }

    #[test]
    fn weighted_size() {
        let b = block(vec![
            span("a b c d e f g h i j", "H", 12.0, false, false, 0.0, 0),
            span("k l m n o", "H", 18.0, false, false, 0.0, 1),
        ]);
        let t = compute_features(&b, &page()).unwrap().text.unwrap();
        assert_eq!(t.font_size, 14.0);
    }

    #[test]
    fn adjacent_spans_share_token() {
        // "Artí" + "culo" with no gap form one token attributed to the bold span
        let a = span("Artí", "H-B", 10.0, true, false, 0.0, 0);
        let mut b = span("culo", "H", 10.0, false, false, 0.0, 0);
        b.bbox = b.bbox.translate(a.bbox.x1 - b.bbox.x0, 0.0);
        let blk = block(vec![a, b]);
        assert_eq!(blk.payload.as_deref(), Some("Artículo"));
        let t = compute_features(&blk, &page()).unwrap().text.unwrap();
        assert_eq!(t.tokens, 1);
        assert_eq!(t.bold_ratio, 1.0);
    }

    #[test]
    fn image_has_geometry_only() {
        let bbox = BoundingBox::new(10.0, 10.0, 110.0, 60.0).unwrap();
        let img = LayoutBlock::fixed(BlockKind::Image, "p0-i0".into(), 0, bbox, None);
        let fv = compute_features(&img, &page()).unwrap();
        assert_eq!(fv.kind, BlockKind::Image);
        assert_eq!(fv.label, LayoutLabel::Image);
        assert!(fv.payload.is_none() && fv.text.is_none());
        assert_eq!(fv.center, (60.0, 35.0));
    }

    #[test]
    fn empty_text_is_rejected() {
        let b = block(vec![span("   ", "H", 10.0, false, false, 0.0, 0)]);
        assert!(matches!(compute_features(&b, &page()), Err(FeatureError::EmptyText(_))));
    }

    #[test]
    fn normalization() {
        let g = page();
        let mut s = span("hola", "H", 10.0, false, false, 297.5, 0);
        s.bbox = BoundingBox::new(297.5, 0.0, 595.0, 842.0).unwrap();
        let fv = compute_features(&block(vec![s]), &g).unwrap();
        let mut fd = FontDictionary::new();
        fd.register(&["H".to_string()]);
        let v = normalize_for_classifier(&fv, &g, &fd).unwrap();
        assert_eq!(v[1], 0.5);
        assert_eq!(v[14], 1.0);
        assert_eq!(&v[7..11], &[0.5, 0.0, 0.0, 0.0]);

        let full = BoundingBox::new(0.0, 0.0, 595.0, 842.0).unwrap();
        let mut s = span("x", "Z", 10.0, false, false, 0.0, 0);
        s.bbox = full;
        let fv = compute_features(&block(vec![s]), &g).unwrap();
        let v2 = normalize_for_classifier(&fv, &g, &fd).unwrap();
        assert_eq!(&v2[7..11], &[0.0; 4]);
        // unseen tuple maps to the reserved code
        assert_eq!(v2[14], 0.0);
        assert_eq!(normalize_for_classifier(&fv, &g, &fd).unwrap(), v2);
    }

    #[test]
    fn font_dictionary_tsv() {
        let mut fd = FontDictionary::new();
        let a = vec!["Helvetica".to_string()];
        let b = vec!["Helvetica".to_string(), "Helvetica-Bold".to_string()];
        assert_eq!(fd.register(&a), 1);
        assert_eq!(fd.register(&b), 2);
        assert_eq!(fd.register(&a), 1);
        let back = FontDictionary::from_tsv(&fd.to_tsv()).unwrap();
        assert_eq!(back, fd);
        for (tuple, code) in fd.iter() {
            assert_eq!(fd.decode(code).unwrap(), tuple);
        }
        assert!(FontDictionary::from_tsv("0\tX\n").is_err());
        assert!(FontDictionary::from_tsv("1\tX\n1\tY\n").is_err());
        assert!(FontDictionary::from_tsv("1 X\n").is_err());
    }
}
