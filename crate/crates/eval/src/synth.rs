//! Synthetic gazette PDFs with a ground-truth manifest for every block.
//!
//! Layout of a page: an identifier header line, an optional logo, a flow of
//! announcements (bold title, italic summary, body paragraphs, sometimes a
//! ruled table or an image) and an identifier footer carrying a link.
//! Text metrics follow the writer exactly, so each manifest box is the box a
//! faithful extractor should report.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use dla_core::{tokens, BlockKind, BoundingBox, LayoutLabel};
use dla_pdf::writer::string_width;
use dla_pdf::{content_id, Canvas, FontId, PdfBuilder};

const ASCENT: f64 = 0.8;
const DESCENT: f64 = 0.2;
const LEADING: f64 = 1.2;
/// Vertical space between consecutive blocks.
const BLOCK_GAP: f64 = 12.0;
const ROW_HEIGHT: f64 = 16.0;
const CELL_PAD: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTemplate {
    pub name: String,
    pub page_width: f64,
    pub page_height: f64,
    /// Regular, bold and italic base-14 font names.
    pub fonts: [String; 3],
    pub header_size: f64,
    pub title_size: f64,
    pub summary_size: f64,
    pub body_size: f64,
    pub footer_size: f64,
    pub cell_size: f64,
    pub columns: u8,
    pub margin: f64,
    pub gutter: f64,
    /// Draw every word as its own text object with no space glyphs.
    pub word_level: bool,
    pub pages: (usize, usize),
    pub table_prob: f64,
    /// Share of tables printed sideways.
    pub rotated_table_prob: f64,
    pub image_prob: f64,
    /// Horizontal jitter of block positions, in points.
    pub jitter: f64,
    /// Probability that a text block breaks its class's usual style.
    pub style_violation: f64,
    pub masthead: String,
}

impl SynthTemplate {
    /// One column, Times, occasional tables and images.
    pub fn single_column() -> Self {
        Self {
            name: "single".into(),
            page_width: 595.0,
            page_height: 842.0,
            fonts: ["Times-Roman".into(), "Times-Bold".into(), "Times-Italic".into()],
            header_size: 8.0,
            title_size: 11.0,
            summary_size: 9.0,
            body_size: 10.0,
            footer_size: 8.0,
            cell_size: 8.0,
            columns: 1,
            margin: 56.0,
            gutter: 0.0,
            word_level: false,
            pages: (5, 12),
            table_prob: 0.35,
            rotated_table_prob: 0.0,
            image_prob: 0.15,
            jitter: 4.0,
            style_violation: 0.0,
            masthead: "BOLETÍN OFICIAL DEL ESTADO".into(),
        }
    }

    /// Two body columns in Helvetica.
    pub fn two_column() -> Self {
        Self {
            name: "two-column".into(),
            fonts: ["Helvetica".into(), "Helvetica-Bold".into(), "Helvetica-Oblique".into()],
            columns: 2,
            gutter: 24.0,
            masthead: "BOLETÍN OFICIAL DE NAVARRA".into(),
            ..Self::single_column()
        }
    }

    /// Word-by-word drawing and sideways tables.
    pub fn word_level() -> Self {
        Self {
            name: "word-level".into(),
            word_level: true,
            rotated_table_prob: 0.5,
            table_prob: 0.45,
            masthead: "BOLETÍN OFICIAL DE LA COMUNIDAD DE MADRID".into(),
            ..Self::single_column()
        }
    }

    /// [`single_column`](Self::single_column) with 10% style violations.
    pub fn hard() -> Self {
        Self { name: "hard".into(), style_violation: 0.10, masthead: "BOLETÍN OFICIAL DE CANTABRIA".into(), ..Self::single_column() }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.page_width > 2.0 * self.margin + 100.0 && self.page_height > 300.0) {
            out.push("page too small for its margins".into());
        }
        if !(1..=3).contains(&self.columns) {
            out.push("columns must be 1 to 3".into());
        }
        if self.pages.0 == 0 || self.pages.0 > self.pages.1 {
            out.push("page range must be non-empty and start at 1 or more".into());
        }
        for p in [self.table_prob, self.rotated_table_prob, self.image_prob, self.style_violation] {
            if !(0.0..=1.0).contains(&p) {
                out.push(format!("probability {p} outside [0, 1]"));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthBlock {
    #[serde(rename = "B")]
    pub kind: BlockKind,
    #[serde(rename = "L")]
    pub label: LayoutLabel,
    pub bbox: BoundingBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// Logical-order cell grid of tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<Vec<String>>>,
    /// Body column (0-based) on multi-column templates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<u8>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub rotation: u16,
    /// The block was drawn in another class's style.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub style_violation: bool,
}

fn is_zero(v: &u16) -> bool {
    *v == 0
}

impl TruthBlock {
    pub fn tokens(&self) -> usize {
        self.text.as_deref().map_or(0, |t| tokens(t).count())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthPage {
    pub width: f64,
    pub height: f64,
    pub blocks: Vec<TruthBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDoc {
    pub doc_id: String,
    pub file: String,
    pub source_id: String,
    pub template: String,
    pub publication_date: NaiveDate,
    pub pages: Vec<TruthPage>,
}

impl TruthDoc {
    pub fn blocks(&self) -> impl Iterator<Item = (usize, &TruthBlock)> {
        self.pages.iter().enumerate().flat_map(|(i, p)| p.blocks.iter().map(move |b| (i, b)))
    }
}

const WORDS: &[&str] = &[
    "disposición", "artículo", "resolución", "ministerio", "consejería", "presupuesto", "convocatoria", "ayudas", "régimen",
    "procedimiento", "administración", "personal", "funcionario", "plazo", "solicitud", "real", "decreto", "orden", "ley",
    "autonómica", "subvención", "contrato", "servicio", "público", "licitación", "anuncio", "notificación", "expediente",
    "municipal", "ayuntamiento", "provincia", "boletín", "oficial", "estado", "comunidad", "general", "dirección", "secretaría",
    "economía", "hacienda", "empleo", "educación", "sanidad", "cultura", "deporte", "medio", "ambiente", "agricultura",
    "pesca", "alimentación", "vivienda", "transporte", "tribunal", "sentencia", "recurso", "acuerdo", "pleno", "comisión",
    "junta", "gobierno", "de", "la", "el", "los", "las", "del", "en", "por", "para", "con", "que", "se", "y", "a", "su", "al",
    "2019", "2020", "2021", "12/2020", "núm.", "apartado", "anexo", "normativa", "vigente", "europea", "fondos",
];

const CELL_WORDS: &[&str] = &[
    "Total", "Importe", "Plazo", "Lote", "Euros", "Alta", "Baja", "Sí", "No", "Norte", "Sur", "Centro", "A1", "B2", "C3",
];

const WEEKDAYS: [&str; 5] = ["lunes", "martes", "miércoles", "jueves", "viernes"];
const MONTHS: [&str; 12] =
    ["enero", "febrero", "marzo", "abril", "mayo", "junio", "julio", "agosto", "septiembre", "octubre", "noviembre", "diciembre"];

/// Rounds to the writer's number precision so manifests match the file.
fn q(v: f64) -> f64 {
    (v * 4.0).round() / 4.0
}

fn words(rng: &mut ChaCha8Rng, n: std::ops::Range<usize>) -> Vec<String> {
    let n = rng.gen_range(n);
    (0..n).map(|_| WORDS.choose(rng).expect("non-empty").to_string()).collect()
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

#[derive(Clone, Copy, PartialEq)]
enum Style {
    Regular,
    Bold,
    Italic,
}

struct Writer<'a> {
    t: &'a SynthTemplate,
    canvas: Canvas,
    fonts: [FontId; 3],
    blocks: Vec<TruthBlock>,
}

impl Writer<'_> {
    fn font(&self, s: Style) -> (FontId, &str) {
        let i = s as usize;
        (self.fonts[i], &self.t.fonts[i])
    }

    /// Draws one line; returns its box.
    fn line(&mut self, style: Style, size: f64, x: f64, baseline: f64, ws: &[String]) -> BoundingBox {
        let (font, name) = self.font(style);
        let name = name.to_string();
        let end = if self.t.word_level {
            let refs: Vec<&str> = ws.iter().map(String::as_str).collect();
            self.canvas.words(font, &name, size, x, baseline, &refs)
        } else {
            let text = ws.join(" ");
            self.canvas.text(font, size, x, baseline, &text);
            x + string_width(&name, size, &text)
        };
        BoundingBox::new(x, baseline - ASCENT * size, end, baseline + DESCENT * size).expect("ordered box")
    }

    /// Greedy word wrap at `width`.
    fn wrap(&self, style: Style, size: f64, width: f64, ws: Vec<String>) -> Vec<Vec<String>> {
        let name = &self.t.fonts[style as usize];
        let mut lines: Vec<Vec<String>> = Vec::new();
        let mut cur: Vec<String> = Vec::new();
        for w in ws {
            cur.push(w);
            if cur.len() > 1 && string_width(name, size, &cur.join(" ")) > width {
                let w = cur.pop().expect("just pushed");
                lines.push(std::mem::take(&mut cur));
                cur.push(w);
            }
        }
        if !cur.is_empty() {
            lines.push(cur);
        }
        lines
    }

    fn paragraph_height(lines: usize, size: f64) -> f64 {
        (lines as f64 - 1.0) * LEADING * size + size
    }

    /// Draws wrapped lines with their top at `top` and records a text block.
    fn text_block(&mut self, label: LayoutLabel, style: Style, size: f64, x: f64, top: f64, lines: &[Vec<String>], column: Option<u8>, violated: bool) -> f64 {
        let mut bbox: Option<BoundingBox> = None;
        for (i, l) in lines.iter().enumerate() {
            let baseline = q(top + ASCENT * size + i as f64 * LEADING * size);
            let b = self.line(style, size, x, baseline, l);
            bbox = Some(bbox.map_or(b, |acc| acc.union(&b)));
        }
        let bbox = bbox.expect("at least one line");
        let text = lines.iter().map(|l| l.join(" ")).collect::<Vec<_>>().join(" ");
        self.blocks.push(TruthBlock {
            kind: BlockKind::Text,
            label,
            bbox,
            text: Some(text),
            cells: None,
            column,
            rotation: 0,
            style_violation: violated,
        });
        bbox.y1
    }
}

struct Announcement {
    title: Vec<String>,
    summary: Vec<String>,
    body: Vec<Vec<String>>,
}

fn announcement(rng: &mut ChaCha8Rng) -> Announcement {
    let mut title = words(rng, 5..16);
    title.insert(0, ["RESOLUCIÓN", "ORDEN", "DECRETO", "ANUNCIO", "ACUERDO"].choose(rng).expect("non-empty").to_string());
    let mut summary = words(rng, 6..30);
    summary[0] = capitalize(&summary[0]);
    let body = (0..rng.gen_range(1..4))
        .map(|_| {
            let mut p = words(rng, 12..70);
            p[0] = capitalize(&p[0]);
            p
        })
        .collect();
    Announcement { title, summary, body }
}

/// A table's logical grid; the first row is a header.
fn table_cells(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<String>> {
    (0..rows)
        .map(|r| {
            (0..cols)
                .map(|c| {
                    if r == 0 {
                        format!("{} {}", CELL_WORDS.choose(rng).expect("non-empty"), c + 1)
                    } else if rng.gen_bool(0.1) {
                        String::new()
                    } else if rng.gen_bool(0.5) {
                        format!("{},{:02}", rng.gen_range(1..9999), rng.gen_range(0..100))
                    } else {
                        CELL_WORDS.choose(rng).expect("non-empty").to_string()
                    }
                })
                .collect()
        })
        .collect()
}

struct Column {
    x: f64,
    width: f64,
    index: Option<u8>,
}

/// Lays out one page; returns false when the page had to end before `items`
/// were exhausted (the caller keeps the rest for the next page).
fn fill_page(w: &mut Writer, rng: &mut ChaCha8Rng, first_page: bool, date: NaiveDate, page_no: usize, issue: u32, pending: &mut Vec<Announcement>) {
    let t = w.t.clone();
    let (pw, ph) = (t.page_width, t.page_height);
    let weekday = WEEKDAYS[(date.format("%u").to_string().parse::<usize>().unwrap_or(1) - 1) % 5];
    let header = format!(
        "{} Núm. {issue} {weekday} {} de {} de {} Pág. {}",
        t.masthead,
        date.format("%d"),
        MONTHS[date.format("%m").to_string().parse::<usize>().unwrap_or(1) - 1],
        date.format("%Y"),
        page_no + 1
    );
    let hw: Vec<String> = header.split(' ').map(String::from).collect();
    w.text_block(LayoutLabel::Identifier, Style::Regular, t.header_size, t.margin, q(40.0 - ASCENT * t.header_size), &[hw], None, false);

    // footer with a link over the URL
    let fsize = t.footer_size;
    let violated = rng.gen_bool(t.style_violation);
    let fsize_drawn = if violated { t.body_size - 1.0 } else { fsize };
    let cve = format!("cve: {}-{}-{}", t.name.to_uppercase(), date.format("%Y%m%d"), page_no + 1);
    let url = "https://www.boletin.example/cve";
    let footer: Vec<String> = vec![cve, "Verificable".into(), "en".into(), url.into()];
    let baseline = ph - 27.0;
    let top = q(baseline - ASCENT * fsize_drawn);
    w.text_block(LayoutLabel::Identifier, Style::Regular, fsize_drawn, t.margin, top, &[footer.clone()], None, violated);
    let name = &t.fonts[0];
    let prefix = footer[..3].join(" ") + " ";
    let ux = t.margin + string_width(name, fsize_drawn, &prefix);
    let ubox = BoundingBox::new(q(ux), q(baseline - ASCENT * fsize_drawn), q(ux + string_width(name, fsize_drawn, url)), q(baseline + DESCENT * fsize_drawn))
        .expect("ordered");
    w.canvas.link(ubox, url);
    w.blocks.push(TruthBlock { kind: BlockKind::Link, label: LayoutLabel::Link, bbox: ubox, text: Some(url.into()), cells: None, column: None, rotation: 0, style_violation: false });

    let mut y_start = 62.0;
    if first_page {
        let logo = BoundingBox::new(t.margin, 58.0, t.margin + 80.0, 98.0).expect("ordered");
        w.canvas.image(&logo);
        w.blocks.push(TruthBlock { kind: BlockKind::Image, label: LayoutLabel::Image, bbox: logo, text: None, cells: None, column: None, rotation: 0, style_violation: false });
        y_start = 98.0 + BLOCK_GAP;
    }
    let bottom = ph - 52.0;
    let ncol = t.columns as usize;
    let colw = (pw - 2.0 * t.margin - t.gutter * (ncol as f64 - 1.0)) / ncol as f64;
    let columns: Vec<Column> = (0..ncol)
        .map(|i| Column { x: t.margin + i as f64 * (colw + t.gutter), width: colw, index: (ncol > 1).then_some(i as u8) })
        .collect();

    // each column is filled top to bottom with whole blocks
    let mut col = 0;
    let mut y = y_start;
    let mut queue: Vec<Item> = Vec::new();
    loop {
        if queue.is_empty() {
            let a = if pending.is_empty() { announcement(rng) } else { pending.remove(0) };
            queue = items(w, rng, a);
            if queue.is_empty() {
                continue;
            }
        }
        let c = &columns[col];
        let jitter = if t.jitter > 0.0 { q(rng.gen_range(0.0..t.jitter)) } else { 0.0 };
        let x = c.x + jitter;
        let width = c.width - t.jitter;
        let item = queue.remove(0);
        let h = item.height(w, width);
        if y + h > bottom {
            queue.insert(0, item);
            col += 1;
            y = y_start;
            if col == ncol {
                // the rest of the announcement starts the next page
                let rest = queue.drain(..).collect::<Vec<_>>();
                if !rest.is_empty() {
                    pending.insert(0, Announcement::from_items(rest));
                }
                return;
            }
            continue;
        }
        y = item.draw(w, rng, x, y, width, c.index) + BLOCK_GAP;
    }
}

enum Item {
    Text { label: LayoutLabel, style: Style, size: f64, words: Vec<String>, violated: bool },
    Table { cells: Vec<Vec<String>>, rotated: bool },
    Image { height: f64 },
}

impl Announcement {
    fn from_items(items: Vec<Item>) -> Self {
        let mut a = Announcement { title: Vec::new(), summary: Vec::new(), body: Vec::new() };
        for it in items {
            if let Item::Text { label, words, .. } = it {
                match label {
                    LayoutLabel::Title => a.title = words,
                    LayoutLabel::Summary => a.summary = words,
                    _ => a.body.push(words),
                }
            }
        }
        a
    }
}

fn items(w: &Writer, rng: &mut ChaCha8Rng, a: Announcement) -> Vec<Item> {
    let t = w.t;
    let v = t.style_violation;
    let mut out = Vec::new();
    if !a.title.is_empty() {
        let violated = rng.gen_bool(v);
        out.push(Item::Text { label: LayoutLabel::Title, style: if violated { Style::Regular } else { Style::Bold }, size: t.title_size, words: a.title, violated });
    }
    if !a.summary.is_empty() {
        let violated = rng.gen_bool(v);
        out.push(Item::Text { label: LayoutLabel::Summary, style: if violated { Style::Regular } else { Style::Italic }, size: t.summary_size, words: a.summary, violated });
    }
    for p in a.body {
        let violated = rng.gen_bool(v);
        out.push(Item::Text { label: LayoutLabel::Body, style: if violated { Style::Bold } else { Style::Regular }, size: t.body_size, words: p, violated });
    }
    if rng.gen_bool(t.table_prob) {
        let rotated = rng.gen_bool(t.rotated_table_prob);
        let cols = rng.gen_range(2..6);
        let rows = rng.gen_range(2..7);
        out.push(Item::Table { cells: table_cells(rng, rows, cols), rotated });
    }
    if rng.gen_bool(t.image_prob) {
        out.push(Item::Image { height: q(rng.gen_range(40.0..120.0)) });
    }
    out
}

/// Width of a sideways table's logical column.
const ROTATED_COL: f64 = 64.0;

impl Item {
    fn height(&self, w: &Writer, width: f64) -> f64 {
        match self {
            Item::Text { style, size, words, .. } => Writer::paragraph_height(w.wrap(*style, *size, width, words.clone()).len(), *size),
            Item::Table { cells, rotated: false } => cells.len() as f64 * ROW_HEIGHT,
            Item::Table { cells, rotated: true } => cells[0].len() as f64 * ROTATED_COL,
            Item::Image { height } => *height,
        }
    }

    fn draw(self, w: &mut Writer, rng: &mut ChaCha8Rng, x: f64, top: f64, width: f64, column: Option<u8>) -> f64 {
        match self {
            Item::Text { label, style, size, words, violated } => {
                let lines = w.wrap(style, size, width, words);
                w.text_block(label, style, size, x, top, &lines, column, violated)
            }
            Item::Image { height } => {
                let iw = q((width * rng.gen_range(0.3..0.8)).min(width));
                let b = BoundingBox::new(x, top, x + iw, top + height).expect("ordered");
                w.canvas.image(&b);
                w.blocks.push(TruthBlock { kind: BlockKind::Image, label: LayoutLabel::Image, bbox: b, text: None, cells: None, column, rotation: 0, style_violation: false });
                b.y1
            }
            Item::Table { cells, rotated } => draw_table(w, x, top, width, cells, rotated, column),
        }
    }
}

fn draw_table(w: &mut Writer, x: f64, top: f64, width: f64, cells: Vec<Vec<String>>, rotated: bool, column: Option<u8>) -> f64 {
    let (rows, cols) = (cells.len(), cells[0].len());
    let size = w.t.cell_size;
    let (font_r, name_r) = w.font(Style::Regular);
    let (font_b, name_b) = w.font(Style::Bold);
    let (name_r, name_b) = (name_r.to_string(), name_b.to_string());
    // physical grid: columns of width `cw`, rows of height `rh`
    let (ncols, nrows, cw, rh) = if rotated { (rows, cols, ROW_HEIGHT, ROTATED_COL) } else { (cols, rows, q(width / cols as f64), ROW_HEIGHT) };
    let (x1, y1) = (x + cw * ncols as f64, top + rh * nrows as f64);
    for r in 0..=nrows {
        let y = top + rh * r as f64;
        w.canvas.line(x, y, x1, y, 0.5);
    }
    for c in 0..=ncols {
        let cx = x + cw * c as f64;
        w.canvas.line(cx, top, cx, y1, 0.5);
    }
    for (i, row) in cells.iter().enumerate() {
        for (j, text) in row.iter().enumerate() {
            if text.is_empty() {
                continue;
            }
            let (font, name) = if i == 0 { (font_b, &name_b) } else { (font_r, &name_r) };
            let tw = string_width(name, size, text);
            if rotated {
                // reads bottom to top: logical row i is physical column i,
                // logical column j is physical row (cols - 1 - j) from the top
                let left = x + ROW_HEIGHT * i as f64;
                let cell_bottom = top + rh * (nrows - j) as f64;
                let origin_x = q(left + ROW_HEIGHT / 2.0 + (ASCENT - DESCENT) * size / 2.0);
                let origin_y = q(cell_bottom - CELL_PAD);
                debug_assert!(tw < rh - 2.0 * CELL_PAD);
                w.canvas.text_rotated(font, size, origin_x, origin_y, 270, text);
            } else {
                let left = x + cw * j as f64;
                debug_assert!(tw < cw - 2.0 * CELL_PAD);
                let baseline = q(top + ROW_HEIGHT * i as f64 + CELL_PAD + ASCENT * size + 1.0);
                w.canvas.text(font, size, left + CELL_PAD, baseline, text);
            }
        }
    }
    let bbox = BoundingBox::new(x, top, x1, y1).expect("ordered");
    w.blocks.push(TruthBlock {
        kind: BlockKind::Table,
        label: LayoutLabel::Table,
        bbox,
        text: None,
        cells: Some(cells),
        column,
        rotation: if rotated { 270 } else { 0 },
        style_violation: false,
    });
    y1
}

/// Generates one document. The same seed always gives the same bytes.
pub fn generate_document(t: &SynthTemplate, source_id: &str, file: &str, seed: u64) -> (Vec<u8>, TruthDoc) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = NaiveDate::from_ymd_opt(2014, 1, 1).expect("valid");
    let date = start + chrono::Duration::days(rng.gen_range(0..3650));
    let issue = rng.gen_range(1..320);
    let mut pdf = PdfBuilder::new().compress(true).creation_date(&date.format("%Y%m%d").to_string());
    let fonts = [pdf.font(&t.fonts[0]), pdf.font(&t.fonts[1]), pdf.font(&t.fonts[2])];
    let n_pages = rng.gen_range(t.pages.0..=t.pages.1);
    let mut pages = Vec::new();
    let mut pending = Vec::new();
    for p in 0..n_pages {
        let mut w = Writer { t, canvas: Canvas::new(t.page_width, t.page_height), fonts, blocks: Vec::new() };
        fill_page(&mut w, &mut rng, p == 0, date, p, issue, &mut pending);
        pages.push(TruthPage { width: t.page_width, height: t.page_height, blocks: w.blocks });
        pdf.add_page(w.canvas);
    }
    let bytes = pdf.finish();
    let truth = TruthDoc {
        doc_id: content_id(&bytes),
        file: file.to_string(),
        source_id: source_id.to_string(),
        template: t.name.clone(),
        publication_date: date,
        pages,
    };
    (bytes, truth)
}

#[derive(Debug, Clone)]
pub struct GeneratedDoc {
    pub path: PathBuf,
    pub truth: TruthDoc,
}

/// Seed of document `doc` of source number `source` under master `seed`.
pub fn doc_seed(seed: u64, source: u64, doc: u64) -> u64 {
    dla_core::labeler::forest::tree_seed(dla_core::labeler::forest::tree_seed(seed, source), doc)
}

/// Writes `<out>/pdf/<source>/<source>-<k>.pdf` and `<out>/truth/<doc_id>.json`
/// for every source. Documents are generated in parallel.
pub fn generate_corpus(sources: &[(String, SynthTemplate)], docs_per_source: usize, seed: u64, out: &Path) -> std::io::Result<Vec<GeneratedDoc>> {
    let jobs: Vec<(usize, usize)> = (0..sources.len()).flat_map(|s| (0..docs_per_source).map(move |d| (s, d))).collect();
    let generated: Vec<(PathBuf, Vec<u8>, TruthDoc)> = jobs
        .par_iter()
        .map(|&(s, d)| {
            let (id, t) = &sources[s];
            let file = format!("{id}-{d:03}.pdf");
            let (bytes, truth) = generate_document(t, id, &file, doc_seed(seed, s as u64, d as u64));
            (out.join("pdf").join(id).join(&file), bytes, truth)
        })
        .collect();
    std::fs::create_dir_all(out.join("truth"))?;
    let mut docs = Vec::with_capacity(generated.len());
    for (path, bytes, truth) in generated {
        std::fs::create_dir_all(path.parent().expect("has parent"))?;
        std::fs::write(&path, &bytes)?;
        let mut json = serde_json::to_vec_pretty(&truth).expect("serializable");
        json.push(b'\n');
        std::fs::write(out.join("truth").join(format!("{}.json", truth.doc_id)), json)?;
        docs.push(GeneratedDoc { path, truth });
    }
    Ok(docs)
}

/// Reads every manifest under `<dir>/truth`, ordered by doc id.
pub fn load_truth(dir: &Path) -> std::io::Result<Vec<TruthDoc>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir.join("truth"))?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    paths
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .map(|p| {
            let s = std::fs::read_to_string(p)?;
            serde_json::from_str(&s).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", p.display())))
        })
        .collect()
}
