//! Content stream interpreter.
//!
//! Produces positioned text runs (one per show operator), ruling segments
//! from stroked paths and thin filled rectangles, and image placements. All
//! output coordinates are top-left-origin page points.

use std::collections::HashMap;
use std::rc::Rc;

use dla_core::BoundingBox;

use crate::document::Document;
use crate::error::{PdfError, Result};
use crate::fonts::Font;
use crate::lexer::{Lexer, Token};
use crate::object::{Dict, Object};
use crate::tables::Segment;

/// TJ adjustments moving right by more than this many thousandths of an em
/// are treated as word spaces.
pub const TJ_SPACE_THRESHOLD: f64 = 150.0;
/// Filled rectangles thinner than this (points) are drawn rules.
pub const RULE_THICKNESS: f64 = 2.0;
const MAX_FORM_DEPTH: usize = 8;

pub type Matrix = [f64; 6];
pub const IDENTITY: Matrix = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0];

/// `a` applied first, then `b`.
pub fn mul(a: &Matrix, b: &Matrix) -> Matrix {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
        a[4] * b[0] + a[5] * b[2] + b[4],
        a[4] * b[1] + a[5] * b[3] + b[5],
    ]
}

pub fn apply(m: &Matrix, x: f64, y: f64) -> (f64, f64) {
    (m[0] * x + m[2] * y + m[4], m[1] * x + m[3] * y + m[5])
}

/// A text run drawn by a single show operator.
#[derive(Debug, Clone, PartialEq)]
pub struct TextRun {
    pub text: String,
    pub font_name: String,
    pub font_size: f64,
    pub bold: bool,
    pub italic: bool,
    pub bbox: BoundingBox,
    /// Baseline origin of the first visible glyph.
    pub origin: (f64, f64),
    /// Clockwise baseline direction in degrees, snapped to 0/90/180/270.
    pub rotation: u16,
}

#[derive(Debug, Clone, Default)]
pub struct PageContent {
    pub runs: Vec<TextRun>,
    pub segments: Vec<Segment>,
    pub images: Vec<BoundingBox>,
}

/// Maps PDF user space after the CTM to top-left page coordinates.
#[derive(Debug, Clone, Copy)]
pub struct PageFrame {
    pub x0: f64,
    pub top: f64,
}

impl PageFrame {
    pub fn from_box(b: [f64; 4]) -> Self {
        Self { x0: b[0], top: b[3] }
    }

    pub fn to_page(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (x - self.x0, self.top - y)
    }
}

#[derive(Debug, Clone)]
struct GraphicsState {
    ctm: Matrix,
    char_spacing: f64,
    word_spacing: f64,
    h_scale: f64,
    leading: f64,
    font: Option<Rc<Font>>,
    font_size: f64,
    rise: f64,
}

impl GraphicsState {
    fn new(ctm: Matrix) -> Self {
        Self {
            ctm,
            char_spacing: 0.0,
            word_spacing: 0.0,
            h_scale: 1.0,
            leading: 0.0,
            font: None,
            font_size: 0.0,
            rise: 0.0,
        }
    }
}

pub struct Interpreter<'d> {
    doc: &'d Document,
    frame: PageFrame,
    font_cache: HashMap<String, Rc<Font>>,
    out: PageContent,
}

fn num(ops: &[Object], i: usize) -> f64 {
    ops.get(i).and_then(Object::as_f64).unwrap_or(0.0)
}

fn snap_rotation(m: &Matrix) -> u16 {
    // Baseline direction in PDF space is (a, b); flipping the y axis makes
    // a counter-clockwise angle clockwise.
    let theta = m[1].atan2(m[0]).to_degrees();
    let cw = (360.0 - theta).rem_euclid(360.0);
    ((cw / 90.0).round() as u16 % 4) * 90
}

impl<'d> Interpreter<'d> {
    pub fn new(doc: &'d Document, frame: PageFrame) -> Self {
        Self { doc, frame, font_cache: HashMap::new(), out: PageContent::default() }
    }

    pub fn run_page(mut self, content: &[u8], resources: &Dict) -> Result<PageContent> {
        let mut gs = GraphicsState::new(IDENTITY);
        self.execute(content, resources, &mut gs, 0)?;
        Ok(self.out)
    }

    fn font(&mut self, resources: &Dict, name: &str) -> Option<Rc<Font>> {
        let fonts = self.doc.dict_at(resources, "Font")?;
        let obj = fonts.get(name)?;
        let key = match obj {
            Object::Ref(r) => format!("{}:{}", r.num, r.gen),
            _ => format!("{:p}:{name}", resources as *const Dict),
        };
        if let Some(f) = self.font_cache.get(&key) {
            return Some(f.clone());
        }
        let dict = self.doc.resolve(obj).as_dict()?;
        let font = Rc::new(Font::load(self.doc, dict));
        self.font_cache.insert(key, font.clone());
        Some(font)
    }

    fn execute(&mut self, content: &[u8], resources: &Dict, gs: &mut GraphicsState, depth: usize) -> Result<()> {
        let mut lx = Lexer::new(content, 0);
        let mut ops: Vec<Object> = Vec::new();
        let mut stack: Vec<GraphicsState> = Vec::new();
        let mut tm = IDENTITY;
        let mut tlm = IDENTITY;
        let mut path: Vec<Vec<(f64, f64)>> = Vec::new();
        let mut closed: Vec<bool> = Vec::new();
        loop {
            lx.skip_ws();
            let at = lx.pos;
            let Some(tok) = lx.next_token()? else { break };
            let Token::Keyword(op) = tok else {
                ops.push(lx.object_from(tok, at, false)?);
                continue;
            };
            match op.as_slice() {
                b"q" => stack.push(gs.clone()),
                b"Q" => {
                    if let Some(prev) = stack.pop() {
                        *gs = prev;
                    }
                }
                b"cm" if ops.len() >= 6 => {
                    let m = [num(&ops, 0), num(&ops, 1), num(&ops, 2), num(&ops, 3), num(&ops, 4), num(&ops, 5)];
                    gs.ctm = mul(&m, &gs.ctm);
                }
                b"BT" => {
                    tm = IDENTITY;
                    tlm = IDENTITY;
                }
                b"ET" => {}
                b"Tf" if ops.len() >= 2 => {
                    if let Some(name) = ops[0].as_name() {
                        gs.font = self.font(resources, name);
                        if gs.font.is_none() {
                            log::debug!("font resource /{name} not found");
                        }
                    }
                    gs.font_size = num(&ops, 1);
                }
                b"Tc" => gs.char_spacing = num(&ops, 0),
                b"Tw" => gs.word_spacing = num(&ops, 0),
                b"Tz" => gs.h_scale = num(&ops, 0) / 100.0,
                b"TL" => gs.leading = num(&ops, 0),
                b"Ts" => gs.rise = num(&ops, 0),
                b"Td" => {
                    tlm = mul(&[1.0, 0.0, 0.0, 1.0, num(&ops, 0), num(&ops, 1)], &tlm);
                    tm = tlm;
                }
                b"TD" => {
                    gs.leading = -num(&ops, 1);
                    tlm = mul(&[1.0, 0.0, 0.0, 1.0, num(&ops, 0), num(&ops, 1)], &tlm);
                    tm = tlm;
                }
                b"Tm" if ops.len() >= 6 => {
                    tlm = [num(&ops, 0), num(&ops, 1), num(&ops, 2), num(&ops, 3), num(&ops, 4), num(&ops, 5)];
                    tm = tlm;
                }
                b"T*" => {
                    tlm = mul(&[1.0, 0.0, 0.0, 1.0, 0.0, -gs.leading], &tlm);
                    tm = tlm;
                }
                b"Tj" => {
                    if let Some(s) = ops.first().and_then(Object::as_bytes) {
                        self.show(gs, &mut tm, &[Object::Str(s.to_vec())]);
                    }
                }
                b"TJ" => {
                    if let Some(items) = ops.first().and_then(Object::as_array) {
                        self.show(gs, &mut tm, items);
                    }
                }
                b"'" => {
                    tlm = mul(&[1.0, 0.0, 0.0, 1.0, 0.0, -gs.leading], &tlm);
                    tm = tlm;
                    if let Some(s) = ops.first().and_then(Object::as_bytes) {
                        self.show(gs, &mut tm, &[Object::Str(s.to_vec())]);
                    }
                }
                b"\"" if ops.len() >= 3 => {
                    gs.word_spacing = num(&ops, 0);
                    gs.char_spacing = num(&ops, 1);
                    tlm = mul(&[1.0, 0.0, 0.0, 1.0, 0.0, -gs.leading], &tlm);
                    tm = tlm;
                    if let Some(s) = ops[2].as_bytes() {
                        self.show(gs, &mut tm, &[Object::Str(s.to_vec())]);
                    }
                }
                b"m" => {
                    path.push(vec![apply(&gs.ctm, num(&ops, 0), num(&ops, 1))]);
                    closed.push(false);
                }
                b"l" => {
                    let p = apply(&gs.ctm, num(&ops, 0), num(&ops, 1));
                    match path.last_mut() {
                        Some(sub) => sub.push(p),
                        None => {
                            path.push(vec![p]);
                            closed.push(false);
                        }
                    }
                }
                b"c" | b"v" | b"y" => {
                    // Curves never form rules; keep only the end point so
                    // later segments start from the right place.
                    let n = ops.len();
                    if n >= 2 {
                        let p = apply(&gs.ctm, num(&ops, n - 2), num(&ops, n - 1));
                        if let Some(sub) = path.last_mut() {
                            sub.push((f64::NAN, f64::NAN));
                            sub.push(p);
                        }
                    }
                }
                b"re" if ops.len() >= 4 => {
                    let (x, y, w, h) = (num(&ops, 0), num(&ops, 1), num(&ops, 2), num(&ops, 3));
                    let pts = [(x, y), (x + w, y), (x + w, y + h), (x, y + h)];
                    path.push(pts.iter().map(|&(px, py)| apply(&gs.ctm, px, py)).collect());
                    closed.push(true);
                }
                b"h" => {
                    if let Some(c) = closed.last_mut() {
                        *c = true;
                    }
                }
                b"S" | b"s" | b"B" | b"B*" | b"b" | b"b*" => {
                    let close_all = matches!(op.as_slice(), b"s" | b"b" | b"b*");
                    self.stroke(&path, &closed, close_all);
                    path.clear();
                    closed.clear();
                }
                b"f" | b"F" | b"f*" => {
                    self.fill_rules(&path);
                    path.clear();
                    closed.clear();
                }
                b"n" => {
                    path.clear();
                    closed.clear();
                }
                b"Do" => {
                    if let Some(name) = ops.first().and_then(Object::as_name) {
                        self.do_xobject(resources, name, gs, depth)?;
                    }
                }
                b"BI" => {
                    self.inline_image(&mut lx, gs)?;
                }
                _ => {}
            }
            ops.clear();
        }
        Ok(())
    }

    fn show(&mut self, gs: &GraphicsState, tm: &mut Matrix, items: &[Object]) {
        let Some(font) = gs.font.clone() else {
            log::debug!("text shown without a font; skipped");
            return;
        };
        let start = *tm;
        let tfs = gs.font_size;
        let th = gs.h_scale;
        let mut x = 0.0;
        let mut text = String::new();
        let mut first_x: Option<f64> = None;
        let mut last_x = 0.0;
        for item in items {
            match item {
                Object::Str(bytes) => {
                    for g in font.decode(bytes) {
                        let adv = (g.width * tfs + gs.char_spacing + if g.is_space { gs.word_spacing } else { 0.0 }) * th;
                        let visible = g.text.chars().any(|c| !dla_core::text::is_separator(c));
                        if visible {
                            first_x.get_or_insert(x);
                            last_x = x + g.width * tfs * th;
                        }
                        text.push_str(&g.text);
                        x += adv;
                    }
                }
                other => {
                    if let Some(n) = other.as_f64() {
                        x -= n / 1000.0 * tfs * th;
                        if -n > TJ_SPACE_THRESHOLD && !text.is_empty() && !text.ends_with(' ') {
                            text.push(' ');
                        }
                    }
                }
            }
        }
        *tm = mul(&[1.0, 0.0, 0.0, 1.0, x, 0.0], &start);
        let Some(x_start) = first_x else { return };
        let m = mul(&start, &gs.ctm);
        let y_lo = font.descent * tfs + gs.rise;
        let y_hi = font.ascent * tfs + gs.rise;
        let corners = [(x_start, y_lo), (last_x, y_lo), (last_x, y_hi), (x_start, y_hi)];
        let pts = corners.iter().map(|&(cx, cy)| self.frame.to_page(apply(&m, cx, cy)));
        let Some(bbox) = BoundingBox::hull_of_points(pts) else { return };
        let scale = (m[2] * m[2] + m[3] * m[3]).sqrt();
        let size = (tfs * scale * 1000.0).round() / 1000.0;
        if size <= 0.0 {
            return;
        }
        let trimmed = text.trim_matches(dla_core::text::is_separator).to_string();
        self.out.runs.push(TextRun {
            text: trimmed,
            font_name: font.name.clone(),
            font_size: size,
            bold: font.bold,
            italic: font.italic,
            bbox,
            origin: self.frame.to_page(apply(&m, x_start, gs.rise)),
            rotation: snap_rotation(&m),
        });
    }

    fn push_segment(&mut self, a: (f64, f64), b: (f64, f64)) {
        if a.0.is_nan() || b.0.is_nan() || (a == b) {
            return;
        }
        let (x0, y0) = self.frame.to_page(a);
        let (x1, y1) = self.frame.to_page(b);
        self.out.segments.push(Segment { x0, y0, x1, y1 });
    }

    fn stroke(&mut self, path: &[Vec<(f64, f64)>], closed: &[bool], close_all: bool) {
        for (sub, &is_closed) in path.iter().zip(closed) {
            for w in sub.windows(2) {
                self.push_segment(w[0], w[1]);
            }
            if (is_closed || close_all) && sub.len() > 2 {
                self.push_segment(sub[sub.len() - 1], sub[0]);
            }
        }
    }

    fn fill_rules(&mut self, path: &[Vec<(f64, f64)>]) {
        for sub in path {
            if sub.len() != 4 || sub.iter().any(|p| p.0.is_nan()) {
                continue;
            }
            let pts: Vec<(f64, f64)> = sub.iter().map(|&p| self.frame.to_page(p)).collect();
            let axis_aligned = (0..4).all(|i| {
                let (a, b) = (pts[i], pts[(i + 1) % 4]);
                (a.0 - b.0).abs() < 1e-6 || (a.1 - b.1).abs() < 1e-6
            });
            if !axis_aligned {
                continue;
            }
            let Some(r) = BoundingBox::hull_of_points(pts) else { continue };
            let (w, h) = (r.width(), r.height());
            if h <= RULE_THICKNESS && w > 2.0 * h {
                let y = (r.y0 + r.y1) / 2.0;
                self.out.segments.push(Segment { x0: r.x0, y0: y, x1: r.x1, y1: y });
            } else if w <= RULE_THICKNESS && h > 2.0 * w {
                let x = (r.x0 + r.x1) / 2.0;
                self.out.segments.push(Segment { x0: x, y0: r.y0, x1: x, y1: r.y1 });
            }
        }
    }

    fn place_image(&mut self, ctm: &Matrix) {
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)].map(|(x, y)| self.frame.to_page(apply(ctm, x, y)));
        if let Some(b) = BoundingBox::hull_of_points(pts) {
            self.out.images.push(b);
        }
    }

    fn do_xobject(&mut self, resources: &Dict, name: &str, gs: &mut GraphicsState, depth: usize) -> Result<()> {
        let Some(xobjects) = self.doc.dict_at(resources, "XObject") else { return Ok(()) };
        let Some(Object::Stream(s)) = xobjects.get(name).map(|o| self.doc.resolve(o)) else { return Ok(()) };
        match s.dict.get("Subtype").and_then(Object::as_name) {
            Some("Image") => self.place_image(&gs.ctm),
            Some("Form") => {
                if depth >= MAX_FORM_DEPTH {
                    log::warn!("form XObject /{name} nested too deeply; skipped");
                    return Ok(());
                }
                let matrix = match self.doc.resolve_key(&s.dict, "Matrix").and_then(Object::as_array) {
                    Some(a) if a.len() == 6 => {
                        let v: Vec<f64> = a.iter().map(|o| self.doc.resolve(o).as_f64().unwrap_or(0.0)).collect();
                        [v[0], v[1], v[2], v[3], v[4], v[5]]
                    }
                    _ => IDENTITY,
                };
                let data = self.doc.decode(s)?;
                let form_res = self.doc.dict_at(&s.dict, "Resources").cloned().unwrap_or_else(|| resources.clone());
                let mut inner = gs.clone();
                inner.ctm = mul(&matrix, &gs.ctm);
                self.execute(&data, &form_res, &mut inner, depth + 1)?;
            }
            _ => {}
        }
        Ok(())
    }

    fn inline_image(&mut self, lx: &mut Lexer, gs: &GraphicsState) -> Result<()> {
        let start = lx.pos;
        loop {
            lx.skip_ws();
            if lx.buf[lx.pos..].starts_with(b"ID") {
                lx.pos += 2;
                break;
            }
            let at = lx.pos;
            match lx.next_token()? {
                None => return Err(lx.err(start, "inline image without ID")),
                Some(t) => {
                    lx.object_from(t, at, false)?;
                }
            }
        }
        lx.pos += 1;
        let data_start = lx.pos;
        let buf = lx.buf;
        let end = (data_start..buf.len().saturating_sub(1)).find(|&i| {
            buf[i] == b'E'
                && buf[i + 1] == b'I'
                && (i == 0 || crate::lexer::is_whitespace(buf[i - 1]))
                && buf.get(i + 2).is_none_or(|&b| crate::lexer::is_whitespace(b))
        });
        match end {
            Some(e) => lx.pos = e + 2,
            None => return Err(lx.err(start, "inline image without EI")),
        }
        self.place_image(&gs.ctm);
        Ok(())
    }
}

/// Runs a page's content streams (already concatenated and decoded).
pub fn interpret(doc: &Document, content: &[u8], resources: &Dict, frame: PageFrame) -> Result<PageContent> {
    Interpreter::new(doc, frame).run_page(content, resources)
}

/// Decodes and concatenates a page's `/Contents`.
pub fn page_content_bytes(doc: &Document, page: &Dict) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let Some(contents) = page.get("Contents") else { return Ok(out) };
    let streams: Vec<&Object> = match doc.resolve(contents) {
        Object::Array(a) => a.iter().map(|o| doc.resolve(o)).collect(),
        other => vec![other],
    };
    for s in streams {
        match s {
            Object::Stream(st) => {
                out.extend_from_slice(&doc.decode(st)?);
                out.push(b'\n');
            }
            Object::Null => {}
            other => return Err(PdfError::Structure(format!("page /Contents entry is a {}", other.type_name()))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_order() {
        let scale = [2.0, 0.0, 0.0, 2.0, 0.0, 0.0];
        let shift = [1.0, 0.0, 0.0, 1.0, 10.0, 0.0];
        assert_eq!(apply(&mul(&scale, &shift), 1.0, 0.0), (12.0, 0.0));
        assert_eq!(apply(&mul(&shift, &scale), 1.0, 0.0), (22.0, 0.0));
    }

    #[test]
    fn rotation_snapping() {
        assert_eq!(snap_rotation(&IDENTITY), 0);
        // Counter-clockwise in PDF space reads bottom-to-top on the page.
        assert_eq!(snap_rotation(&[0.0, 1.0, -1.0, 0.0, 0.0, 0.0]), 270);
        assert_eq!(snap_rotation(&[0.0, -1.0, 1.0, 0.0, 0.0, 0.0]), 90);
        assert_eq!(snap_rotation(&[-1.0, 0.0, 0.0, -1.0, 0.0, 0.0]), 180);
    }
}
