use dla_core::{BlockKind, BoundingBox};
use dla_pdf::writer::string_width;
use dla_pdf::{layout_page, parse_document, parse_document_with, Canvas, MergeParams, ParseOptions, PdfBuilder, PdfError, TableParams};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-3
}

#[test]
fn single_bold_run() {
    let mut pdf = PdfBuilder::new();
    let bold = pdf.font("Helvetica-Bold");
    let mut page = Canvas::new(595.0, 842.0);
    page.text(bold, 12.0, 72.0, 100.0, "Hola");
    pdf.add_page(page);
    let doc = parse_document(&pdf.finish(), "s1").unwrap();
    let spans = &doc.pages[0].spans;
    assert_eq!(spans.len(), 1);
    let s = &spans[0];
    assert_eq!(s.text, "Hola");
    assert!(s.bold && !s.italic);
    assert_eq!(s.font_size, 12.0);
    assert_eq!(s.font_name, "Helvetica-Bold");
    let w = string_width("Helvetica-Bold", 12.0, "Hola");
    assert!(close(s.bbox.x0, 72.0) && close(s.bbox.x1, 72.0 + w));
    assert!(close(s.bbox.y0, 100.0 - 9.6) && close(s.bbox.y1, 100.0 + 2.4));
}

#[test]
fn link_annotation() {
    let mut pdf = PdfBuilder::new();
    let mut page = Canvas::new(595.0, 842.0);
    let rect = BoundingBox::new(100.0, 700.0, 250.0, 712.0).unwrap();
    page.link(rect, "https://example.org");
    pdf.add_page(page);
    let doc = parse_document(&pdf.finish(), "s1").unwrap();
    let links = &doc.pages[0].links;
    assert_eq!(links.len(), 1);
    assert_eq!(links[0].kind, BlockKind::Link);
    assert_eq!(links[0].payload.as_deref(), Some("https://example.org"));
    assert_eq!(links[0].bbox, rect);
}

#[test]
fn empty_page_has_no_blocks() {
    let mut pdf = PdfBuilder::new();
    pdf.add_page(Canvas::new(595.0, 842.0));
    let doc = parse_document(&pdf.finish(), "s1").unwrap();
    let layout = layout_page(&doc, &doc.pages[0], &MergeParams::default(), &TableParams::default());
    assert!(layout.blocks.is_empty());
    assert!(doc.pages[0].spans.is_empty());
}

#[test]
fn images_text_and_tables_through_xref_stream() {
    let mut pdf = PdfBuilder::new().compress(true).xref_stream(true).creation_date("20190304").title("Prueba");
    let f = pdf.font("Helvetica");
    let mut page = Canvas::new(595.0, 842.0);
    let img = BoundingBox::new(50.0, 50.0, 150.0, 120.0).unwrap();
    page.image(&img);
    page.text(f, 10.0, 72.0, 200.0, "Artículo único.");
    for r in 0..=2 {
        page.line(100.0, 300.0 + 20.0 * r as f64, 400.0, 300.0 + 20.0 * r as f64, 0.5);
    }
    for c in 0..=3 {
        page.line(100.0 + 100.0 * c as f64, 300.0, 100.0 + 100.0 * c as f64, 340.0, 0.5);
    }
    for r in 0..2 {
        for c in 0..3 {
            page.text(f, 8.0, 105.0 + 100.0 * c as f64, 314.0 + 20.0 * r as f64, &format!("c{r}{c}, x"));
        }
    }
    pdf.add_page(page);
    let bytes = pdf.finish();
    let doc = parse_document(&bytes, "s1").unwrap();
    assert_eq!(doc.publication_date, chrono::NaiveDate::from_ymd_opt(2019, 3, 4));
    assert_eq!(doc.title.as_deref(), Some("Prueba"));
    assert_eq!(doc.pages[0].images[0].bbox, img);
    let layout = layout_page(&doc, &doc.pages[0], &MergeParams::default(), &TableParams::default());
    assert_eq!(layout.tables.len(), 1);
    let t = &layout.tables[0];
    assert_eq!((t.rows(), t.cols()), (2, 3));
    assert_eq!(t.cells[1][2], "c12, x");
    assert_eq!(layout.suppressed, 6);
    let kinds: Vec<BlockKind> = layout.blocks.iter().map(|b| b.kind).collect();
    assert_eq!(kinds, vec![BlockKind::Image, BlockKind::Text, BlockKind::Table]);
    assert_eq!(layout.blocks[1].payload.as_deref(), Some("Artículo único."));
    assert_eq!(layout.blocks[2].payload.as_deref(), Some(format!("tables/{}/p0_t0.csv", doc.doc_id).as_str()));
}

#[test]
fn kerned_and_word_level_text() {
    let mut pdf = PdfBuilder::new();
    let f = pdf.font("Times-Roman");
    let mut page = Canvas::new(595.0, 842.0);
    page.kerned(f, 10.0, 72.0, 100.0, "AB", -300.0);
    page.kerned(f, 10.0, 72.0, 130.0, "CD", -50.0);
    page.words(f, "Times-Roman", 10.0, 72.0, 160.0, &["Boletín", "Oficial", "del", "Estado"]);
    pdf.add_page(page);
    let bytes = pdf.finish();
    for spaceless in [false, true] {
        let doc = parse_document_with(&bytes, "s", &ParseOptions { spaceless_words: spaceless, ..Default::default() }).unwrap();
        let texts: Vec<&str> = doc.pages[0].spans.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, vec!["A B", "CD", "Boletín Oficial del Estado"]);
    }
}

#[test]
fn rotated_text_direction() {
    let mut pdf = PdfBuilder::new();
    let f = pdf.font("Helvetica");
    let mut page = Canvas::new(595.0, 842.0);
    page.text_rotated(f, 10.0, 300.0, 500.0, 270, "arriba");
    page.text_rotated(f, 10.0, 200.0, 500.0, 90, "abajo");
    pdf.add_page(page);
    let doc = parse_document(&pdf.finish(), "s").unwrap();
    let spans = &doc.pages[0].spans;
    let up = spans.iter().find(|s| s.text == "arriba").unwrap();
    let down = spans.iter().find(|s| s.text == "abajo").unwrap();
    assert_eq!((up.rotation, down.rotation), (270, 90));
    assert!(close(up.bbox.y1, 500.0));
    assert!(up.bbox.height() > up.bbox.width());
    assert!(close(down.bbox.y0, 500.0));
}

#[test]
fn malformed_and_encrypted_inputs() {
    let err = parse_document(b"%PDF-1.4\n1 0 obj\n<< /Type /Catalog /Pages [ >>\nendobj\n", "s").unwrap_err();
    assert!(err.offset().is_some(), "{err}");
    let mut pdf = PdfBuilder::new();
    pdf.add_page(Canvas::new(100.0, 100.0));
    let bytes = String::from_utf8_lossy(&pdf.finish()).replace("/Root", "/Encrypt << >> /Root");
    assert!(matches!(parse_document(bytes.as_bytes(), "s"), Err(PdfError::Encrypted)));
}

#[test]
fn bad_content_stream_skips_only_that_page() {
    let mut pdf = PdfBuilder::new();
    let f = pdf.font("Helvetica");
    let mut bad = Canvas::new(200.0, 200.0);
    bad.raw("BT /F1 10 Tf (unterminated Tj ET");
    let mut good = Canvas::new(200.0, 200.0);
    good.text(f, 10.0, 10.0, 50.0, "ok");
    pdf.add_page(bad);
    pdf.add_page(good);
    let doc = parse_document(&pdf.finish(), "s").unwrap();
    assert_eq!(doc.pages.len(), 2);
    assert!(doc.pages[0].warning.is_some());
    assert!(doc.pages[0].spans.is_empty());
    assert_eq!(doc.pages[1].spans[0].text, "ok");
    assert_eq!(doc.warnings().len(), 1);
}

#[test]
fn parsing_is_deterministic() {
    let mut pdf = PdfBuilder::new().compress(true);
    let f = pdf.font("Helvetica");
    let mut page = Canvas::new(595.0, 842.0);
    for i in 0..20 {
        page.text(f, 10.0, 72.0, 100.0 + 12.0 * i as f64, &format!("línea {i}"));
    }
    pdf.add_page(page);
    let bytes = pdf.finish();
    let a = parse_document(&bytes, "s").unwrap();
    let b = parse_document(&bytes, "s").unwrap();
    assert_eq!(a.pages[0].spans, b.pages[0].spans);
    assert_eq!(a.doc_id, b.doc_id);
}
