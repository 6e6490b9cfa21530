//! One JSON line per block in `layout/<doc_id>.jsonl`.

use serde::{Deserialize, Serialize};

use dla_core::{BlockKind, BoundingBox, FeatureVector, LabelOrigin, LayoutLabel, PageMargins, TextFeatures};

/// Longest payload kept inline; longer ones move to the sidecar file.
pub const PAYLOAD_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutRecord {
    pub doc_id: String,
    pub source_id: String,
    pub page: usize,
    pub block_id: String,
    #[serde(rename = "B")]
    pub kind: BlockKind,
    #[serde(rename = "L")]
    pub label: LayoutLabel,
    pub bbox: BoundingBox,
    pub center: [f64; 2],
    /// Left, top, right and bottom distance to the page edges.
    pub margins: [f64; 4],
    #[serde(default, skip_serializing_if = "is_false")]
    pub clipped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f12: Option<String>,
    /// Only ever set on disk: the full payload lives in the sidecar.
    #[serde(default, skip_serializing_if = "is_false")]
    pub f12_truncated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f13: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f14: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f15: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f16: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f17: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f18: Option<usize>,
    pub label_origin: LabelOrigin,
    /// Version of the model that produced the label; 0 for rules and humans.
    pub model_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl LayoutRecord {
    pub fn from_features(doc_id: &str, source_id: &str, block_id: &str, fv: &FeatureVector) -> Self {
        let t = fv.text.as_ref();
        Self {
            doc_id: doc_id.to_string(),
            source_id: source_id.to_string(),
            page: fv.page,
            block_id: block_id.to_string(),
            kind: fv.kind,
            label: fv.label,
            bbox: fv.bbox,
            center: [fv.center.0, fv.center.1],
            margins: fv.margins.as_array(),
            clipped: fv.margins.clipped,
            f12: fv.payload.clone(),
            f12_truncated: false,
            f13: t.map(|t| t.bold_ratio),
            f14: t.map(|t| t.italic_ratio),
            f15: t.map(|t| t.font_size),
            f16: t.map(|t| t.fonts.clone()),
            f17: t.map(|t| t.caps_ratio),
            f18: t.map(|t| t.tokens),
            label_origin: LabelOrigin::Heuristic,
            model_version: 0,
            confidence: None,
        }
    }

    pub fn is_text(&self) -> bool {
        self.kind == BlockKind::Text
    }

    pub fn text_features(&self) -> Option<TextFeatures> {
        Some(TextFeatures {
            bold_ratio: self.f13?,
            italic_ratio: self.f14?,
            font_size: self.f15?,
            fonts: self.f16.clone()?,
            caps_ratio: self.f17?,
            tokens: self.f18?,
        })
    }

    pub fn feature_vector(&self) -> FeatureVector {
        let [left, top, right, bottom] = self.margins;
        FeatureVector {
            page: self.page,
            bbox: self.bbox,
            center: (self.center[0], self.center[1]),
            margins: PageMargins { left, top, right, bottom, clipped: self.clipped },
            payload: self.f12.clone(),
            text: self.text_features(),
            kind: self.kind,
            label: self.label,
        }
    }

    pub fn tokens(&self) -> usize {
        self.f18.unwrap_or(0)
    }

    /// Consistency problems of a record read from disk.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = dla_core::layout::check_consistency(self.kind, self.label) {
            out.push(e.to_string());
        }
        let text_cols = [self.f13.is_some(), self.f14.is_some(), self.f15.is_some(), self.f16.is_some(), self.f17.is_some(), self.f18.is_some()];
        match self.kind {
            BlockKind::Text => {
                if text_cols.iter().any(|c| !c) {
                    out.push(format!("text block {} is missing style features", self.block_id));
                }
                if self.f12.as_deref().map_or(true, str::is_empty) {
                    out.push(format!("text block {} has no text", self.block_id));
                }
            }
            _ => {
                if text_cols.iter().any(|c| *c) {
                    out.push(format!("{} block {} carries text features", self.kind, self.block_id));
                }
            }
        }
        if self.kind == BlockKind::Image && self.f12.is_some() {
            out.push(format!("image block {} carries a payload", self.block_id));
        }
        if matches!(self.kind, BlockKind::Table | BlockKind::Link) && self.f12.is_none() {
            out.push(format!("{} block {} is missing its payload", self.kind, self.block_id));
        }
        if let Some(c) = self.confidence {
            if !(0.0..=1.0).contains(&c) {
                out.push(format!("confidence {c} outside [0, 1]"));
            }
        }
        out
    }
}

/// Splits a payload at [`PAYLOAD_LIMIT`] characters, returning the inline
/// part and whether anything was cut.
pub fn truncate_payload(s: &str) -> (&str, bool) {
    match s.char_indices().nth(PAYLOAD_LIMIT) {
        Some((at, _)) => (&s[..at], true),
        None => (s, false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_counts_characters() {
        let s = "é".repeat(PAYLOAD_LIMIT + 5);
        let (head, cut) = truncate_payload(&s);
        assert!(cut);
        assert_eq!(head.chars().count(), PAYLOAD_LIMIT);
        let short = "é".repeat(PAYLOAD_LIMIT);
        assert_eq!(truncate_payload(&short), (short.as_str(), false));
    }

    #[test]
    fn codes_serialize_as_integers() {
        let fv = FeatureVector {
            page: 1,
            bbox: BoundingBox::new(1.0, 2.0, 3.0, 4.0).unwrap(),
            center: (2.0, 3.0),
            margins: PageMargins { left: 1.0, top: 2.0, right: 3.0, bottom: 4.0, clipped: false },
            payload: None,
            text: None,
            kind: BlockKind::Image,
            label: LayoutLabel::Image,
        };
        let r = LayoutRecord::from_features("d", "s", "p1-i0", &fv);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"B\":0,\"L\":0"), "{json}");
        assert!(!json.contains("f13"));
        assert!(r.problems().is_empty());
        assert_eq!(r.feature_vector(), fv);
    }
}
