//! A small PDF writer for synthetic documents.
//!
//! Drawing calls take top-left-origin page coordinates, matching what the
//! extractor reports. Only the base-14 fonts are supported; each is written
//! with explicit WinAnsi widths and a descriptor so extraction needs no
//! built-in metrics.

use std::fmt::Write as _;
use std::io::Write as _;

use dla_core::BoundingBox;
use flate2::{write::ZlibEncoder, Compression};

use crate::metrics::{standard_width, win_ansi_byte, win_ansi_char, DEFAULT_ASCENT, DEFAULT_DESCENT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FontId(usize);

/// Formats a number the way PDF producers do: fixed precision, no trailing zeros.
pub fn fmt_num(v: f64) -> String {
    let mut s = format!("{v:.4}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// Encodes text as a WinAnsi literal string; unrepresentable characters become `?`.
pub fn pdf_string(text: &str) -> String {
    let mut out = String::from("(");
    for c in text.chars() {
        let b = win_ansi_byte(c).unwrap_or(b'?');
        match b {
            b'(' | b')' | b'\\' => {
                out.push('\\');
                out.push(b as char);
            }
            0x20..=0x7e => out.push(b as char),
            _ => {
                let _ = write!(out, "\\{b:03o}");
            }
        }
    }
    out.push(')');
    out
}

/// One page being drawn.
#[derive(Debug, Clone)]
pub struct Canvas {
    pub width: f64,
    pub height: f64,
    ops: String,
    links: Vec<(BoundingBox, String)>,
    uses_image: bool,
}

impl Canvas {
    pub fn new(width: f64, height: f64) -> Self {
        Self { width, height, ops: String::new(), links: Vec::new(), uses_image: false }
    }

    fn y(&self, y: f64) -> f64 {
        self.height - y
    }

    /// Draws `text` with its baseline origin at `(x, baseline)`.
    pub fn text(&mut self, font: FontId, size: f64, x: f64, baseline: f64, text: &str) {
        let y = self.y(baseline);
        let _ = writeln!(self.ops, "BT /F{} {} Tf 1 0 0 1 {} {} Tm {} Tj ET", font.0 + 1, fmt_num(size), fmt_num(x), fmt_num(y), pdf_string(text));
    }

    /// Draws text whose baseline runs `rotation` degrees clockwise on the page.
    pub fn text_rotated(&mut self, font: FontId, size: f64, x: f64, y: f64, rotation: u16, text: &str) {
        let theta = ((360 - rotation as i32 % 360) % 360) as f64;
        let (s, c) = theta.to_radians().sin_cos();
        let (s, c) = (s.round(), c.round());
        let _ = writeln!(
            self.ops,
            "BT /F{} {} Tf {} {} {} {} {} {} Tm {} Tj ET",
            font.0 + 1,
            fmt_num(size),
            fmt_num(c),
            fmt_num(s),
            fmt_num(-s),
            fmt_num(c),
            fmt_num(x),
            fmt_num(self.y(y)),
            pdf_string(text)
        );
    }

    /// Draws each word with its own positioning and no space characters.
    /// Returns the x coordinate after the last word.
    pub fn words(&mut self, font: FontId, font_name: &str, size: f64, x: f64, baseline: f64, words: &[&str]) -> f64 {
        let space = standard_width(font_name, ' ') * size / 1000.0;
        let mut cx = x;
        for (i, w) in words.iter().enumerate() {
            if i > 0 {
                cx += space;
            }
            self.text(font, size, cx, baseline, w);
            cx += string_width(font_name, size, w);
        }
        cx
    }

    /// Draws text as a TJ array with a kerning adjustment between every pair of characters.
    pub fn kerned(&mut self, font: FontId, size: f64, x: f64, baseline: f64, text: &str, kern: f64) {
        let mut arr = String::new();
        for (i, ch) in text.chars().enumerate() {
            if i > 0 {
                let _ = write!(arr, " {} ", fmt_num(kern));
            }
            arr.push_str(&pdf_string(&ch.to_string()));
        }
        let y = self.y(baseline);
        let _ = writeln!(self.ops, "BT /F{} {} Tf {} {} Td [{}] TJ ET", font.0 + 1, fmt_num(size), fmt_num(x), fmt_num(y), arr);
    }

    pub fn line(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, width: f64) {
        let _ = writeln!(
            self.ops,
            "{} w {} {} m {} {} l S",
            fmt_num(width),
            fmt_num(x0),
            fmt_num(self.y(y0)),
            fmt_num(x1),
            fmt_num(self.y(y1))
        );
    }

    pub fn stroke_rect(&mut self, b: &BoundingBox, width: f64) {
        let _ = writeln!(
            self.ops,
            "{} w {} {} {} {} re S",
            fmt_num(width),
            fmt_num(b.x0),
            fmt_num(self.y(b.y1)),
            fmt_num(b.width()),
            fmt_num(b.height())
        );
    }

    /// A filled rectangle, which the extractor reads as a rule when thin.
    pub fn fill_rect(&mut self, b: &BoundingBox) {
        let _ = writeln!(self.ops, "{} {} {} {} re f", fmt_num(b.x0), fmt_num(self.y(b.y1)), fmt_num(b.width()), fmt_num(b.height()));
    }

    pub fn image(&mut self, b: &BoundingBox) {
        self.uses_image = true;
        let _ = writeln!(
            self.ops,
            "q {} 0 0 {} {} {} cm /Im1 Do Q",
            fmt_num(b.width()),
            fmt_num(b.height()),
            fmt_num(b.x0),
            fmt_num(self.y(b.y1))
        );
    }

    pub fn link(&mut self, b: BoundingBox, uri: &str) {
        self.links.push((b, uri.to_string()));
    }

    /// Appends raw content stream operators.
    pub fn raw(&mut self, ops: &str) {
        self.ops.push_str(ops);
        self.ops.push('\n');
    }
}

/// Width in points of `text` as written by [`Canvas::text`].
pub fn string_width(font_name: &str, size: f64, text: &str) -> f64 {
    text.chars().map(|c| standard_width(font_name, win_ansi_byte(c).map(win_ansi_char).unwrap_or('?'))).sum::<f64>() * size / 1000.0
}

#[derive(Debug, Clone, Default)]
pub struct PdfBuilder {
    fonts: Vec<String>,
    pages: Vec<Canvas>,
    title: Option<String>,
    creation_date: Option<String>,
    compress: bool,
    xref_stream: bool,
}

impl PdfBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Flate-compress content streams.
    pub fn compress(mut self, yes: bool) -> Self {
        self.compress = yes;
        self
    }

    /// Write a cross-reference stream instead of a classic xref table.
    pub fn xref_stream(mut self, yes: bool) -> Self {
        self.xref_stream = yes;
        self
    }

    pub fn title(mut self, t: &str) -> Self {
        self.title = Some(t.to_string());
        self
    }

    /// Creation date as `YYYYMMDD`.
    pub fn creation_date(mut self, ymd: &str) -> Self {
        self.creation_date = Some(ymd.to_string());
        self
    }

    pub fn font(&mut self, base: &str) -> FontId {
        if let Some(i) = self.fonts.iter().position(|f| f == base) {
            return FontId(i);
        }
        self.fonts.push(base.to_string());
        FontId(self.fonts.len() - 1)
    }

    pub fn add_page(&mut self, page: Canvas) {
        self.pages.push(page);
    }

    pub fn page_count(&self) -> usize {
        self.pages.len()
    }

    pub fn finish(self) -> Vec<u8> {
        let mut w = ObjWriter::default();
        // Fixed numbering: 1 catalog, 2 page tree, 3 info, 4 image, then
        // two objects per font, then page/content pairs and annotations.
        let catalog = w.reserve();
        let pages_id = w.reserve();
        let info_id = w.reserve();
        let image_id = w.reserve();
        let mut font_refs = Vec::new();
        for base in &self.fonts {
            let desc = w.reserve();
            let font = w.reserve();
            let bold = base.contains("Bold");
            let italic = base.contains("Oblique") || base.contains("Italic");
            let flags = 32 | if italic { 64 } else { 0 } | if bold { 1 << 18 } else { 0 };
            w.set(
                desc,
                format!(
                    "<< /Type /FontDescriptor /FontName /{base} /Flags {flags} /FontBBox [-200 {d} 1000 {a}] /ItalicAngle {} /Ascent {a} /Descent {d} /CapHeight 700 /StemV {} /FontWeight {} >>",
                    if italic { -12 } else { 0 },
                    if bold { 140 } else { 80 },
                    if bold { 700 } else { 400 },
                    a = DEFAULT_ASCENT,
                    d = DEFAULT_DESCENT,
                )
                .into_bytes(),
            );
            let widths: Vec<String> = (32u8..=255).map(|b| fmt_num(standard_width(base, win_ansi_char(b)))).collect();
            w.set(
                font,
                format!(
                    "<< /Type /Font /Subtype /Type1 /BaseFont /{base} /Encoding /WinAnsiEncoding /FirstChar 32 /LastChar 255 /Widths [{}] /FontDescriptor {desc} 0 R >>",
                    widths.join(" ")
                )
                .into_bytes(),
            );
            font_refs.push(font);
        }
        let font_dict: String = font_refs.iter().enumerate().map(|(i, r)| format!("/F{} {r} 0 R ", i + 1)).collect();
        let mut kids = Vec::new();
        for page in &self.pages {
            let page_id = w.reserve();
            let content_id = w.reserve();
            let mut annots = Vec::new();
            for (b, uri) in &page.links {
                let id = w.reserve();
                w.set(
                    id,
                    format!(
                        "<< /Type /Annot /Subtype /Link /Rect [{} {} {} {}] /Border [0 0 0] /A << /S /URI /URI {} >> >>",
                        fmt_num(b.x0),
                        fmt_num(page.height - b.y1),
                        fmt_num(b.x1),
                        fmt_num(page.height - b.y0),
                        pdf_string(uri)
                    )
                    .into_bytes(),
                );
                annots.push(format!("{id} 0 R"));
            }
            let xobj = if page.uses_image { format!("/XObject << /Im1 {image_id} 0 R >> ") } else { String::new() };
            let annot_entry = if annots.is_empty() { String::new() } else { format!("/Annots [{}] ", annots.join(" ")) };
            w.set(
                page_id,
                format!(
                    "<< /Type /Page /Parent {pages_id} 0 R /MediaBox [0 0 {} {}] /Resources << /Font << {font_dict}>> {xobj}>> /Contents {content_id} 0 R {annot_entry}>>",
                    fmt_num(page.width),
                    fmt_num(page.height)
                )
                .into_bytes(),
            );
            w.set(content_id, stream_object("", page.ops.as_bytes(), self.compress));
            kids.push(format!("{page_id} 0 R"));
        }
        w.set(catalog, format!("<< /Type /Catalog /Pages {pages_id} 0 R >>").into_bytes());
        w.set(pages_id, format!("<< /Type /Pages /Kids [{}] /Count {} >>", kids.join(" "), kids.len()).into_bytes());
        let mut info = String::from("<< /Producer (dla synthetic generator) ");
        if let Some(t) = &self.title {
            let _ = write!(info, "/Title {} ", pdf_string(t));
        }
        if let Some(d) = &self.creation_date {
            let _ = write!(info, "/CreationDate (D:{d}000000Z) ");
        }
        info.push_str(">>");
        w.set(info_id, info.into_bytes());
        w.set(image_id, stream_object("/Type /XObject /Subtype /Image /Width 2 /Height 2 /ColorSpace /DeviceGray /BitsPerComponent 8 ", &[0, 255, 255, 0], false));
        w.finish(catalog, info_id, self.xref_stream)
    }
}

fn stream_object(extra: &str, data: &[u8], compress: bool) -> Vec<u8> {
    let (body, filter) = if compress {
        let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
        enc.write_all(data).expect("in-memory compression");
        (enc.finish().expect("in-memory compression"), "/Filter /FlateDecode ")
    } else {
        (data.to_vec(), "")
    };
    let mut out = format!("<< {extra}{filter}/Length {} >>\nstream\n", body.len()).into_bytes();
    out.extend_from_slice(&body);
    out.extend_from_slice(b"\nendstream");
    out
}

#[derive(Default)]
struct ObjWriter {
    bodies: Vec<Vec<u8>>,
}

impl ObjWriter {
    fn reserve(&mut self) -> usize {
        self.bodies.push(Vec::new());
        self.bodies.len()
    }

    fn set(&mut self, id: usize, body: Vec<u8>) {
        self.bodies[id - 1] = body;
    }

    fn finish(self, root: usize, info: usize, xref_stream: bool) -> Vec<u8> {
        let mut out = b"%PDF-1.5\n%\xe2\xe3\xcf\xd3\n".to_vec();
        let mut offsets = Vec::with_capacity(self.bodies.len());
        for (i, body) in self.bodies.iter().enumerate() {
            offsets.push(out.len());
            out.extend_from_slice(format!("{} 0 obj\n", i + 1).as_bytes());
            out.extend_from_slice(body);
            out.extend_from_slice(b"\nendobj\n");
        }
        let size = self.bodies.len() + 1;
        let xref_at = out.len();
        if xref_stream {
            let mut rows = vec![0u8, 0, 0, 0, 0, 0xff, 0xff];
            for off in offsets.iter().copied().chain(std::iter::once(xref_at)) {
                rows.push(1);
                rows.extend_from_slice(&(off as u32).to_be_bytes());
                rows.extend_from_slice(&[0, 0]);
            }
            let dict = format!("/Type /XRef /Size {} /W [1 4 2] /Root {root} 0 R /Info {info} 0 R ", size + 1);
            out.extend_from_slice(format!("{size} 0 obj\n").as_bytes());
            out.extend_from_slice(&stream_object(&dict, &rows, true));
            out.extend_from_slice(b"\nendobj\n");
        } else {
            out.extend_from_slice(format!("xref\n0 {size}\n0000000000 65535 f \n").as_bytes());
            for off in &offsets {
                out.extend_from_slice(format!("{off:010} 00000 n \n").as_bytes());
            }
            out.extend_from_slice(format!("trailer\n<< /Size {size} /Root {root} 0 R /Info {info} 0 R >>\n").as_bytes());
        }
        out.extend_from_slice(format!("startxref\n{xref_at}\n%%EOF\n").as_bytes());
        out
    }
}
