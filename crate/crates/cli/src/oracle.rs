//! Slow, independent reimplementations used to check the fast code paths.

use dla_core::{BoundingBox, LayoutBlock, PageGeometry, TextSpan};

/// Covered fraction of `a` estimated by sampling the centers of a grid of
/// `step`-sized cells over `a`. Exact when every coordinate is a multiple of
/// `step`.
pub fn raster_overlap(a: &BoundingBox, b: &BoundingBox, step: f64) -> f64 {
    let nx = (a.width() / step).round() as usize;
    let ny = (a.height() / step).round() as usize;
    if nx == 0 || ny == 0 {
        return 0.0;
    }
    let mut inside = 0usize;
    for i in 0..nx {
        let x = a.x0 + (i as f64 + 0.5) * step;
        if x < b.x0 || x > b.x1 {
            continue;
        }
        for j in 0..ny {
            let y = a.y0 + (j as f64 + 0.5) * step;
            if y >= b.y0 && y <= b.y1 {
                inside += 1;
            }
        }
    }
    inside as f64 / (nx * ny) as f64
}

/// Block features recomputed by building the block string with explicit
/// separators and then walking it token by token.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveFeatures {
    pub bbox: [f64; 4],
    pub center: [f64; 2],
    pub margins: [f64; 4],
    pub text: String,
    pub bold: f64,
    pub italic: f64,
    pub size: f64,
    pub fonts: Vec<String>,
    pub caps: f64,
    pub tokens: usize,
}

fn word_break(prev: &TextSpan, next: &TextSpan) -> bool {
    if prev.line_id != next.line_id || prev.rotation != next.rotation {
        return true;
    }
    let biggest = if prev.font_size > next.font_size { prev.font_size } else { next.font_size };
    next.rotation == 0 && next.bbox.x0 - prev.bbox.x1 > 0.15 * biggest
}

pub fn naive_features(block: &LayoutBlock, g: &PageGeometry) -> Option<NaiveFeatures> {
    let spans = &block.spans;
    // one string plus, per byte offset, the span it came from
    let mut s = String::new();
    let mut owner: Vec<usize> = Vec::new();
    for (k, span) in spans.iter().enumerate() {
        if k > 0 && word_break(&spans[k - 1], span) {
            s.push(' ');
            owner.push(k);
        }
        for c in span.text.chars() {
            s.push(c);
            for _ in 0..c.len_utf8() {
                owner.push(k);
            }
        }
    }
    let sep = |c: char| c.is_whitespace() || c == '\u{FFFF}';
    let mut words: Vec<(&str, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in s.char_indices().chain(std::iter::once((s.len(), ' '))) {
        match (start, sep(c)) {
            (None, false) => start = Some(i),
            (Some(st), true) => {
                words.push((&s[st..i], owner[st]));
                start = None;
            }
            _ => {}
        }
    }
    if words.is_empty() {
        return None;
    }
    let n = words.len() as f64;
    let mut size = 0.0;
    for (_, k) in &words {
        size += spans[*k].font_size;
    }
    let letters: Vec<char> = words.iter().flat_map(|(w, _)| w.chars()).filter(|c| c.is_alphabetic()).collect();
    let upper = letters.iter().filter(|c| c.is_uppercase()).count();
    let mut fonts: Vec<String> = Vec::new();
    for sp in spans {
        if sp.text.chars().any(|c| !sep(c)) && !fonts.contains(&sp.font_name) {
            fonts.push(sp.font_name.clone());
        }
    }
    fonts.sort();
    let b = &block.bbox;
    let clamp = |v: f64| if v < 0.0 { 0.0 } else { v };
    Some(NaiveFeatures {
        bbox: [b.x0, b.y0, b.x1, b.y1],
        center: [(b.x0 + b.x1) / 2.0, (b.y0 + b.y1) / 2.0],
        margins: [clamp(b.x0), clamp(b.y0), clamp(g.width - b.x1), clamp(g.height - b.y1)],
        text: words.iter().map(|(w, _)| *w).collect::<Vec<_>>().join(" "),
        bold: words.iter().filter(|(_, k)| spans[*k].bold).count() as f64 / n,
        italic: words.iter().filter(|(_, k)| spans[*k].italic).count() as f64 / n,
        size: size / n,
        fonts,
        caps: if letters.is_empty() { 0.0 } else { upper as f64 / letters.len() as f64 },
        tokens: words.len(),
    })
}

/// Differences between the production features of `block` and the oracle.
pub fn feature_mismatches(block: &LayoutBlock, g: &PageGeometry) -> Vec<String> {
    let fv = match dla_core::compute_features(block, g) {
        Ok(fv) => fv,
        Err(e) => return vec![format!("{}: {e}", block.block_id)],
    };
    let (Some(t), Some(o)) = (fv.text.as_ref(), naive_features(block, g)) else {
        return vec![format!("{}: one side has no text features", block.block_id)];
    };
    let mut out = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            out.push(format!("{}: {name} differs", block.block_id));
        }
    };
    check("bbox", [fv.bbox.x0, fv.bbox.y0, fv.bbox.x1, fv.bbox.y1] == o.bbox);
    check("center", [fv.center.0, fv.center.1] == o.center);
    check("margins", fv.margins.as_array() == o.margins);
    check("f12", fv.payload.as_deref() == Some(o.text.as_str()));
    check("f13", t.bold_ratio == o.bold);
    check("f14", t.italic_ratio == o.italic);
    check("f15", t.font_size == o.size);
    check("f16", t.fonts == o.fonts);
    check("f17", t.caps_ratio == o.caps);
    check("f18", t.tokens == o.tokens);
    out
}
