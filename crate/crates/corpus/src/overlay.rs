//! SVG overlays drawing each block's box in its label color.

use std::fmt::Write as _;
use std::path::PathBuf;

use dla_core::{LayoutLabel, PageGeometry};

use crate::error::Result;
use crate::record::LayoutRecord;
use crate::store::{write_atomic, Corpus};

pub fn label_color(label: LayoutLabel) -> &'static str {
    match label {
        LayoutLabel::Identifier => "green",
        LayoutLabel::Title => "pink",
        LayoutLabel::Summary => "cyan",
        LayoutLabel::Body => "black",
        LayoutLabel::Image => "orange",
        LayoutLabel::Table => "blue",
        LayoutLabel::Link => "purple",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One page's overlay. Box coordinates are written unchanged, in points.
pub fn render_page(g: &PageGeometry, records: &[LayoutRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = g.width,
        h = g.height
    );
    for r in records.iter().filter(|r| r.page == g.page_index) {
        let b = &r.bbox;
        let _ = writeln!(
            s,
            r#"  <rect data-block="{}" data-label="{}" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="{}" stroke-width="1"/>"#,
            escape(&r.block_id),
            r.label.code(),
            b.x0,
            b.y0,
            b.width(),
            b.height(),
            label_color(r.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `overlays/<doc_id>/p<n>.svg` for every page.
pub fn write_overlays(corpus: &Corpus, doc_id: &str) -> Result<Vec<PathBuf>> {
    let m = corpus.manifest(doc_id)?;
    let records = corpus.layout(doc_id)?;
    let mut out = Vec::new();
    for g in &m.pages {
        let path = corpus.path(&format!("overlays/{doc_id}/p{}.svg", g.page_index));
        write_atomic(&path, render_page(g, &records).as_bytes())?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dla_core::{BlockKind, BoundingBox, LabelOrigin};

    #[test]
    fn colors_are_distinct_and_boxes_exact() {
        let all = [
            LayoutLabel::Image,
            LayoutLabel::Table,
            LayoutLabel::Link,
            LayoutLabel::Identifier,
            LayoutLabel::Title,
            LayoutLabel::Summary,
            LayoutLabel::Body,
        ];
        let mut colors: Vec<_> = all.iter().map(|l| label_color(*l)).collect();
        colors.sort();
        colors.dedup();
        assert_eq!(colors.len(), all.len());

        let r = LayoutRecord {
            doc_id: "d".into(),
            source_id: "s".into(),
            page: 0,
            block_id: "p0-x0".into(),
            kind: BlockKind::Text,
            label: LayoutLabel::Title,
            bbox: BoundingBox::new(10.125, 20.5, 110.0, 32.75).unwrap(),
            center: [0.0, 0.0],
            margins: [0.0; 4],
            clipped: false,
            f12: Some("a".into()),
            f12_truncated: false,
            f13: Some(1.0),
            f14: Some(0.0),
            f15: Some(11.0),
            f16: Some(vec!["Times-Bold".into()]),
            f17: Some(0.0),
            f18: Some(1),
            label_origin: LabelOrigin::Heuristic,
            model_version: 0,
            confidence: None,
        };
        let svg = render_page(&PageGeometry::new(0, 595.0, 842.0).unwrap(), &[r]);
        assert!(svg.contains(r#"x="10.125" y="20.5" width="99.875" height="12.25" fill="none" stroke="pink""#), "{svg}");
    }
}
