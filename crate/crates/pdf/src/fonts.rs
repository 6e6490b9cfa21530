use std::collections::HashMap;

use crate::document::Document;
use crate::lexer::{Lexer, Token};
use crate::metrics::{glyph_name_to_char, standard_width, win_ansi_char, DEFAULT_ASCENT, DEFAULT_DESCENT};
use crate::object::{Dict, Object};

const FLAG_ITALIC: i64 = 1 << 6;
const FLAG_FORCE_BOLD: i64 = 1 << 18;

/// One decoded character code.
#[derive(Debug, Clone, PartialEq)]
pub struct Glyph {
    pub text: String,
    /// Horizontal advance in text space units per unit font size.
    pub width: f64,
    /// Single-byte code 32, which receives word spacing.
    pub is_space: bool,
}

#[derive(Debug, Clone)]
pub struct Font {
    /// BaseFont with any subset tag removed.
    pub name: String,
    pub bold: bool,
    pub italic: bool,
    /// Ascent and descent in text space units per unit font size.
    pub ascent: f64,
    pub descent: f64,
    two_byte: bool,
    encoding: Vec<Option<char>>,
    widths: HashMap<u32, f64>,
    default_width: Option<f64>,
    to_unicode: HashMap<u32, String>,
    /// Glyph-space to text-space scale (0.001 except for Type3 fonts).
    scale: f64,
}

pub fn strip_subset_tag(name: &str) -> &str {
    match name.split_once('+') {
        Some((tag, rest)) if tag.len() == 6 && tag.bytes().all(|b| b.is_ascii_uppercase()) => rest,
        _ => name,
    }
}

/// Style from descriptor flags or, failing that, from the font name.
pub fn style_of(name: &str, flags: i64, weight: Option<f64>) -> (bool, bool) {
    let lower = name.to_ascii_lowercase();
    let bold = flags & FLAG_FORCE_BOLD != 0 || weight.is_some_and(|w| w >= 600.0) || lower.contains("bold");
    let italic = flags & FLAG_ITALIC != 0 || lower.contains("italic") || lower.contains("oblique");
    (bold, italic)
}

impl Font {
    /// A standard face with WinAnsi encoding and built-in widths.
    pub fn standard(name: &str) -> Self {
        let (bold, italic) = style_of(name, 0, None);
        Font {
            name: name.to_string(),
            bold,
            italic,
            ascent: DEFAULT_ASCENT / 1000.0,
            descent: DEFAULT_DESCENT / 1000.0,
            two_byte: false,
            encoding: (0..=255u8).map(|b| Some(win_ansi_char(b))).collect(),
            widths: HashMap::new(),
            default_width: None,
            to_unicode: HashMap::new(),
            scale: 0.001,
        }
    }

    pub fn load(doc: &Document, dict: &Dict) -> Self {
        let base = doc.resolve_key(dict, "BaseFont").and_then(Object::as_name).unwrap_or("Unknown");
        let name = strip_subset_tag(base).to_string();
        let subtype = doc.resolve_key(dict, "Subtype").and_then(Object::as_name).unwrap_or("Type1");
        let mut font = Font::standard(&name);
        let descendant = if subtype == "Type0" {
            font.two_byte = true;
            font.encoding = Vec::new();
            doc.resolve_key(dict, "DescendantFonts")
                .and_then(Object::as_array)
                .and_then(|a| a.first())
                .and_then(|d| doc.resolve(d).as_dict())
        } else {
            None
        };
        let metrics_dict = descendant.unwrap_or(dict);
        let descriptor = doc.dict_at(metrics_dict, "FontDescriptor");
        let flags = descriptor.and_then(|d| doc.resolve_key(d, "Flags")).and_then(Object::as_i64).unwrap_or(0);
        let weight = descriptor.and_then(|d| doc.resolve_key(d, "FontWeight")).and_then(Object::as_f64);
        (font.bold, font.italic) = style_of(&name, flags, weight);
        if let Some(d) = descriptor {
            let asc = doc.resolve_key(d, "Ascent").and_then(Object::as_f64).filter(|a| *a > 0.0);
            let desc = doc.resolve_key(d, "Descent").and_then(Object::as_f64).filter(|a| *a < 0.0);
            font.ascent = asc.unwrap_or(DEFAULT_ASCENT) / 1000.0;
            font.descent = desc.unwrap_or(DEFAULT_DESCENT) / 1000.0;
            if let Some(mw) = doc.resolve_key(d, "MissingWidth").and_then(Object::as_f64).filter(|w| *w > 0.0) {
                font.default_width = Some(mw);
            }
        }
        if subtype == "Type3" {
            if let Some(m) = doc.resolve_key(dict, "FontMatrix").and_then(Object::as_array) {
                font.scale = m.first().and_then(Object::as_f64).unwrap_or(0.001).abs();
            }
        }
        if let Some(desc) = descendant {
            font.default_width = Some(doc.resolve_key(desc, "DW").and_then(Object::as_f64).unwrap_or(1000.0));
            if let Some(w) = doc.resolve_key(desc, "W").and_then(Object::as_array) {
                font.widths = cid_widths(doc, w);
            }
        } else {
            let first = doc.resolve_key(dict, "FirstChar").and_then(Object::as_i64).unwrap_or(0);
            if let Some(ws) = doc.resolve_key(dict, "Widths").and_then(Object::as_array) {
                for (i, w) in ws.iter().enumerate() {
                    if let Some(w) = doc.resolve(w).as_f64() {
                        font.widths.insert((first + i as i64) as u32, w);
                    }
                }
            }
            font.apply_encoding(doc, dict);
        }
        if let Some(Object::Stream(s)) = dict.get("ToUnicode").map(|o| doc.resolve(o)) {
            match doc.decode(s) {
                Ok(data) => font.to_unicode = parse_cmap(&data),
                Err(e) => log::warn!("font {name}: unreadable ToUnicode ({e})"),
            }
        }
        font
    }

    fn apply_encoding(&mut self, doc: &Document, dict: &Dict) {
        let enc = doc.resolve_key(dict, "Encoding");
        let differences = match enc {
            Some(Object::Dict(d)) => doc.resolve_key(d, "Differences").and_then(Object::as_array),
            _ => None,
        };
        let base = match enc {
            Some(Object::Name(n)) => Some(n.as_str()),
            Some(Object::Dict(d)) => doc.resolve_key(d, "BaseEncoding").and_then(Object::as_name),
            _ => None,
        };
        if base == Some("MacRomanEncoding") {
            log::debug!("font {}: MacRoman treated as WinAnsi for the ASCII range", self.name);
        }
        if let Some(diff) = differences {
            let mut code = 0i64;
            for item in diff {
                match doc.resolve(item) {
                    Object::Int(c) => code = *c,
                    Object::Name(n) => {
                        if (0..256).contains(&code) {
                            self.encoding[code as usize] = glyph_name_to_char(n);
                        }
                        code += 1;
                    }
                    _ => {}
                }
            }
        }
    }

    pub fn is_two_byte(&self) -> bool {
        self.two_byte
    }

    fn width_of(&self, code: u32, text: &str) -> f64 {
        let units = match self.widths.get(&code) {
            Some(&w) => w,
            None => match self.default_width {
                Some(w) if self.widths.is_empty() || self.two_byte => w,
                _ => text.chars().next().map(|c| standard_width(&self.name, c)).unwrap_or(0.0),
            },
        };
        units * self.scale
    }

    pub fn decode(&self, bytes: &[u8]) -> Vec<Glyph> {
        let mut out = Vec::with_capacity(bytes.len());
        if self.two_byte {
            for pair in bytes.chunks(2) {
                let code = if pair.len() == 2 { (pair[0] as u32) << 8 | pair[1] as u32 } else { pair[0] as u32 };
                let text = self
                    .to_unicode
                    .get(&code)
                    .cloned()
                    .unwrap_or_else(|| char::from_u32(code).map(String::from).unwrap_or_default());
                out.push(Glyph { width: self.width_of(code, &text), text, is_space: false });
            }
            return out;
        }
        for &b in bytes {
            let code = b as u32;
            let text = match self.to_unicode.get(&code) {
                Some(t) => t.clone(),
                None => self.encoding.get(b as usize).copied().flatten().map(String::from).unwrap_or_default(),
            };
            out.push(Glyph { width: self.width_of(code, &text), text, is_space: b == b' ' });
        }
        out
    }
}

fn cid_widths(doc: &Document, w: &[Object]) -> HashMap<u32, f64> {
    let mut out = HashMap::new();
    let items: Vec<&Object> = w.iter().map(|o| doc.resolve(o)).collect();
    let mut i = 0;
    while i < items.len() {
        let Some(first) = items[i].as_i64() else { break };
        match items.get(i + 1) {
            Some(Object::Array(ws)) => {
                for (k, w) in ws.iter().enumerate() {
                    if let Some(w) = doc.resolve(w).as_f64() {
                        out.insert((first + k as i64) as u32, w);
                    }
                }
                i += 2;
            }
            Some(last) => {
                let (Some(last), Some(width)) = (last.as_i64(), items.get(i + 2).and_then(|o| o.as_f64())) else { break };
                for c in first..=last.min(first + 65535) {
                    out.insert(c as u32, width);
                }
                i += 3;
            }
            None => break,
        }
    }
    out
}

fn be_code(bytes: &[u8]) -> u32 {
    bytes.iter().fold(0u32, |acc, &b| acc << 8 | b as u32)
}

fn utf16_text(bytes: &[u8]) -> String {
    let units: Vec<u16> = bytes.chunks(2).map(|c| if c.len() == 2 { u16::from_be_bytes([c[0], c[1]]) } else { c[0] as u16 }).collect();
    String::from_utf16_lossy(&units)
}

/// Parses `bfchar`/`bfrange` sections of a ToUnicode CMap.
pub fn parse_cmap(data: &[u8]) -> HashMap<u32, String> {
    let mut out = HashMap::new();
    let mut lx = Lexer::new(data, 0);
    let mut operands: Vec<Object> = Vec::new();
    let mut mode: Option<&'static str> = None;
    loop {
        let at = lx.pos;
        let tok = match lx.next_token() {
            Ok(Some(t)) => t,
            Ok(None) => break,
            Err(_) => {
                lx.pos = at + 1;
                continue;
            }
        };
        match tok {
            Token::Keyword(k) => {
                match k.as_slice() {
                    b"beginbfchar" => mode = Some("char"),
                    b"beginbfrange" => mode = Some("range"),
                    b"endbfchar" | b"endbfrange" => {
                        apply_cmap_section(mode, &operands, &mut out);
                        mode = None;
                    }
                    _ => {}
                }
                operands.clear();
            }
            t => match lx.object_from(t, at, false) {
                Ok(o) => operands.push(o),
                Err(_) => operands.clear(),
            },
        }
    }
    out
}

fn apply_cmap_section(mode: Option<&str>, ops: &[Object], out: &mut HashMap<u32, String>) {
    match mode {
        Some("char") => {
            for pair in ops.chunks(2) {
                if let [Object::Str(src), dst] = pair {
                    let text = match dst {
                        Object::Str(d) => utf16_text(d),
                        Object::Name(n) => glyph_name_to_char(n).map(String::from).unwrap_or_default(),
                        _ => continue,
                    };
                    out.insert(be_code(src), text);
                }
            }
        }
        Some("range") => {
            for triple in ops.chunks(3) {
                let [Object::Str(lo), Object::Str(hi), dst] = triple else { continue };
                let (lo, hi) = (be_code(lo), be_code(hi));
                if hi < lo || hi - lo > 0xffff {
                    continue;
                }
                match dst {
                    Object::Str(d) if !d.is_empty() => {
                        let base = utf16_text(d);
                        let mut chars: Vec<char> = base.chars().collect();
                        for code in lo..=hi {
                            out.insert(code, chars.iter().collect());
                            if let Some(last) = chars.last_mut() {
                                *last = char::from_u32(*last as u32 + 1).unwrap_or(*last);
                            }
                        }
                    }
                    Object::Array(items) => {
                        for (k, item) in items.iter().enumerate() {
                            if let Object::Str(d) = item {
                                out.insert(lo + k as u32, utf16_text(d));
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
        _ => {}
    }
}
