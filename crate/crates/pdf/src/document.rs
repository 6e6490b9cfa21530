//! Cross-reference handling and object loading.
//!
//! Objects are loaded eagerly: the xref chain (tables or streams, following
//! `/Prev`) is read first, then every in-use object is parsed from its
//! offset or its object stream. If the xref data is unusable the file is
//! scanned for `N G obj` headers instead.

use std::collections::{BTreeMap, HashMap};

use crate::error::{PdfError, Result};
use crate::filters::decode_stream;
use crate::lexer::{Lexer, Token};
use crate::object::{Dict, ObjRef, Object, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
enum XrefEntry {
    InFile(usize),
    InStream { stream: u32, index: usize },
}

#[derive(Debug, Clone)]
pub struct Document {
    objects: HashMap<ObjRef, Object>,
    pub trailer: Dict,
    pub version: String,
}

/// A page dictionary with inherited attributes already resolved.
#[derive(Debug, Clone)]
pub struct PageNode {
    pub id: Option<ObjRef>,
    pub dict: Dict,
    pub resources: Dict,
    pub media_box: [f64; 4],
    pub crop_box: Option<[f64; 4]>,
    pub rotate: i64,
}

const MAX_PAGE_TREE_DEPTH: usize = 64;

impl Document {
    pub fn load(bytes: &[u8]) -> Result<Self> {
        if !bytes.starts_with(b"%PDF-") {
            let head = bytes.windows(5).position(|w| w == b"%PDF-");
            if head.is_none() {
                return Err(PdfError::syntax(0, "missing %PDF- header"));
            }
        }
        let version = header_version(bytes);
        let doc = match read_xref_chain(bytes).and_then(|(entries, trailer)| load_objects(bytes, &entries, trailer)) {
            Ok(doc) => doc,
            Err(primary) => {
                log::warn!("xref unusable ({primary}); reconstructing by scan");
                reconstruct(bytes).map_err(|_| primary)?
            }
        };
        let (objects, trailer) = doc;
        if trailer.contains_key("Encrypt") {
            return Err(PdfError::Encrypted);
        }
        let doc = Document { objects, trailer, version };
        if doc.catalog().is_none() {
            return Err(PdfError::Structure("trailer has no usable /Root".into()));
        }
        Ok(doc)
    }

    pub fn get(&self, r: ObjRef) -> Result<&Object> {
        self.objects.get(&r).ok_or(PdfError::MissingObject(r))
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Follows references (up to a small chain limit); missing targets become null.
    pub fn resolve<'a>(&'a self, mut o: &'a Object) -> &'a Object {
        for _ in 0..16 {
            match o {
                Object::Ref(r) => match self.objects.get(r) {
                    Some(next) => o = next,
                    None => return &Object::Null,
                },
                _ => return o,
            }
        }
        &Object::Null
    }

    pub fn resolve_key<'a>(&'a self, d: &'a Dict, key: &str) -> Option<&'a Object> {
        d.get(key).map(|o| self.resolve(o)).filter(|o| !matches!(o, Object::Null))
    }

    pub fn dict_at<'a>(&'a self, d: &'a Dict, key: &str) -> Option<&'a Dict> {
        self.resolve_key(d, key).and_then(Object::as_dict)
    }

    pub fn catalog(&self) -> Option<&Dict> {
        self.dict_at(&self.trailer, "Root")
    }

    pub fn info(&self) -> Option<&Dict> {
        self.dict_at(&self.trailer, "Info")
    }

    pub fn decode(&self, s: &Stream) -> Result<Vec<u8>> {
        decode_stream(s)
    }

    /// Leaves of the page tree in document order.
    pub fn pages(&self) -> Result<Vec<PageNode>> {
        let root = self.catalog().ok_or_else(|| PdfError::Structure("missing catalog".into()))?;
        let tree = root.get("Pages").ok_or(PdfError::NoPages)?;
        let mut out = Vec::new();
        let inherited = Inherited::default();
        self.walk_pages(tree, &inherited, 0, &mut out)?;
        if out.is_empty() {
            return Err(PdfError::NoPages);
        }
        Ok(out)
    }

    fn walk_pages(&self, node: &Object, inh: &Inherited, depth: usize, out: &mut Vec<PageNode>) -> Result<()> {
        if depth > MAX_PAGE_TREE_DEPTH {
            return Err(PdfError::Structure("page tree too deep".into()));
        }
        let id = node.as_ref();
        let Some(dict) = self.resolve(node).as_dict() else {
            return Err(PdfError::Structure(format!("page tree node {} is not a dictionary", id.map(|r| r.to_string()).unwrap_or_default())));
        };
        let mut here = inh.clone();
        if let Some(r) = self.dict_at(dict, "Resources") {
            here.resources = Some(r.clone());
        }
        if let Some(b) = self.rect(dict, "MediaBox") {
            here.media_box = Some(b);
        }
        if let Some(b) = self.rect(dict, "CropBox") {
            here.crop_box = Some(b);
        }
        if let Some(r) = self.resolve_key(dict, "Rotate").and_then(Object::as_i64) {
            here.rotate = Some(r);
        }
        let is_leaf = match self.resolve_key(dict, "Type").and_then(Object::as_name) {
            Some("Page") => true,
            Some("Pages") => false,
            _ => !dict.contains_key("Kids"),
        };
        if is_leaf {
            out.push(PageNode {
                id,
                dict: dict.clone(),
                resources: here.resources.unwrap_or_default(),
                media_box: here.media_box.unwrap_or([0.0, 0.0, 612.0, 792.0]),
                crop_box: here.crop_box,
                rotate: here.rotate.unwrap_or(0),
            });
            return Ok(());
        }
        let kids = self.resolve_key(dict, "Kids").and_then(Object::as_array).unwrap_or(&[]);
        for kid in kids {
            self.walk_pages(kid, &here, depth + 1, out)?;
        }
        Ok(())
    }

    /// A rectangle normalized to `[llx, lly, urx, ury]`.
    pub fn rect(&self, d: &Dict, key: &str) -> Option<[f64; 4]> {
        let arr = self.resolve_key(d, key)?.as_array()?;
        if arr.len() != 4 {
            return None;
        }
        let mut v = [0.0; 4];
        for (slot, o) in v.iter_mut().zip(arr) {
            *slot = self.resolve(o).as_f64()?;
        }
        Some([v[0].min(v[2]), v[1].min(v[3]), v[0].max(v[2]), v[1].max(v[3])])
    }
}

#[derive(Debug, Clone, Default)]
struct Inherited {
    resources: Option<Dict>,
    media_box: Option<[f64; 4]>,
    crop_box: Option<[f64; 4]>,
    rotate: Option<i64>,
}

fn header_version(bytes: &[u8]) -> String {
    let start = bytes.windows(5).position(|w| w == b"%PDF-").map(|p| p + 5).unwrap_or(0);
    bytes[start..].iter().take(8).take_while(|b| b.is_ascii_digit() || **b == b'.').map(|&b| b as char).collect()
}

fn find_startxref(bytes: &[u8]) -> Result<usize> {
    let tail_start = bytes.len().saturating_sub(2048);
    let tail = &bytes[tail_start..];
    let pos = tail
        .windows(9)
        .rposition(|w| w == b"startxref")
        .ok_or_else(|| PdfError::syntax(bytes.len(), "startxref not found"))?;
    let mut lx = Lexer::new(bytes, tail_start + pos + 9);
    let at = lx.pos;
    match lx.next_token()? {
        Some(Token::Int(off)) if off >= 0 && (off as usize) < bytes.len() => Ok(off as usize),
        _ => Err(PdfError::syntax(at, "invalid startxref offset")),
    }
}

type Entries = BTreeMap<u32, (u16, XrefEntry)>;

fn read_xref_chain(bytes: &[u8]) -> Result<(Entries, Dict)> {
    let mut offset = find_startxref(bytes)?;
    let mut entries = Entries::new();
    let mut trailer: Option<Dict> = None;
    let mut seen = Vec::new();
    loop {
        if seen.contains(&offset) {
            return Err(PdfError::syntax(offset, "xref /Prev loop"));
        }
        seen.push(offset);
        let (section, this_trailer) = read_xref_section(bytes, offset)?;
        if let Some(Object::Int(stm)) = this_trailer.get("XRefStm") {
            if let Ok((hybrid, _)) = read_xref_section(bytes, *stm as usize) {
                for (k, v) in hybrid {
                    entries.entry(k).or_insert(v);
                }
            }
        }
        for (k, v) in section {
            // Newer sections are read first and win.
            entries.entry(k).or_insert(v);
        }
        let prev = this_trailer.get("Prev").and_then(Object::as_i64);
        if trailer.is_none() {
            trailer = Some(this_trailer);
        }
        match prev {
            Some(p) if p >= 0 && (p as usize) < bytes.len() => offset = p as usize,
            Some(p) => return Err(PdfError::syntax(offset, format!("invalid /Prev offset {p}"))),
            None => break,
        }
    }
    Ok((entries, trailer.unwrap_or_default()))
}

fn read_xref_section(bytes: &[u8], offset: usize) -> Result<(Entries, Dict)> {
    let mut lx = Lexer::new(bytes, offset);
    lx.skip_ws();
    if bytes[lx.pos..].starts_with(b"xref") {
        lx.pos += 4;
        read_xref_table(&mut lx)
    } else {
        read_xref_stream(bytes, offset)
    }
}

fn read_xref_table(lx: &mut Lexer) -> Result<(Entries, Dict)> {
    let mut entries = Entries::new();
    loop {
        lx.skip_ws();
        let at = lx.pos;
        match lx.next_token()? {
            Some(Token::Keyword(k)) if k == b"trailer" => break,
            Some(Token::Int(first)) => {
                let count = match lx.next_token()? {
                    Some(Token::Int(c)) if c >= 0 => c,
                    _ => return Err(lx.err(at, "bad xref subsection header")),
                };
                for i in 0..count {
                    lx.skip_ws();
                    let line_at = lx.pos;
                    let (Some(Token::Int(off)), Some(Token::Int(gen)), Some(Token::Keyword(kind))) =
                        (lx.next_token()?, lx.next_token()?, lx.next_token()?)
                    else {
                        return Err(lx.err(line_at, "bad xref entry"));
                    };
                    let num = (first + i) as u32;
                    if kind == b"n" && off > 0 {
                        entries.insert(num, (gen as u16, XrefEntry::InFile(off as usize)));
                    } else if kind != b"f" && kind != b"n" {
                        return Err(lx.err(line_at, "xref entry type must be 'n' or 'f'"));
                    }
                }
            }
            _ => return Err(lx.err(at, "expected xref subsection or trailer")),
        }
    }
    lx.skip_ws();
    let at = lx.pos;
    match lx.next_token()? {
        Some(Token::DictStart) => Ok((entries, lx.dict_body(at, true)?)),
        _ => Err(lx.err(at, "trailer dictionary expected")),
    }
}

fn read_xref_stream(bytes: &[u8], offset: usize) -> Result<(Entries, Dict)> {
    let (_, obj) = parse_indirect(bytes, offset)?;
    let Object::Stream(s) = obj else {
        return Err(PdfError::syntax(offset, "expected xref table or xref stream"));
    };
    if s.dict.get("Type").and_then(Object::as_name) != Some("XRef") {
        return Err(PdfError::syntax(offset, "stream at startxref is not /Type /XRef"));
    }
    let data = decode_stream(&s)?;
    let widths: Vec<usize> = s
        .dict
        .get("W")
        .and_then(Object::as_array)
        .map(|a| a.iter().filter_map(Object::as_i64).map(|w| w.max(0) as usize).collect())
        .unwrap_or_default();
    if widths.len() != 3 {
        return Err(PdfError::syntax(offset, "xref stream /W must have 3 entries"));
    }
    let size = s.dict.get("Size").and_then(Object::as_i64).unwrap_or(0);
    let index: Vec<i64> = match s.dict.get("Index").and_then(Object::as_array) {
        Some(a) => a.iter().filter_map(Object::as_i64).collect(),
        None => vec![0, size],
    };
    let row = widths.iter().sum::<usize>();
    let mut entries = Entries::new();
    let mut cursor = 0usize;
    for pair in index.chunks(2) {
        let [first, count] = pair else { break };
        for i in 0..*count {
            if cursor + row > data.len() {
                break;
            }
            let mut fields = [0u64; 3];
            let mut p = cursor;
            for (f, &w) in fields.iter_mut().zip(&widths) {
                *f = data[p..p + w].iter().fold(0u64, |acc, &b| acc << 8 | b as u64);
                p += w;
            }
            if widths[0] == 0 {
                fields[0] = 1;
            }
            cursor += row;
            let num = (first + i) as u32;
            match fields[0] {
                1 => {
                    entries.insert(num, (fields[2] as u16, XrefEntry::InFile(fields[1] as usize)));
                }
                2 => {
                    entries.insert(num, (0, XrefEntry::InStream { stream: fields[1] as u32, index: fields[2] as usize }));
                }
                _ => {}
            }
        }
    }
    let mut trailer = s.dict.clone();
    for k in ["Filter", "DecodeParms", "Length", "W", "Index", "Type"] {
        trailer.shift_remove(k);
    }
    Ok((entries, trailer))
}

/// Parses `N G obj <object> endobj` at `offset`.
pub(crate) fn parse_indirect(bytes: &[u8], offset: usize) -> Result<(ObjRef, Object)> {
    let mut lx = Lexer::new(bytes, offset);
    lx.skip_ws();
    let at = lx.pos;
    let (Some(Token::Int(num)), Some(Token::Int(gen))) = (lx.next_token()?, lx.next_token()?) else {
        return Err(lx.err(at, "expected object header"));
    };
    lx.expect_keyword(b"obj")?;
    let id = ObjRef::new(num as u32, gen as u16);
    let obj = lx.parse_object(true)?;
    lx.skip_ws();
    if let Object::Dict(dict) = &obj {
        if bytes[lx.pos..].starts_with(b"stream") {
            let data = stream_data(bytes, lx.pos + 6, dict)?;
            return Ok((id, Object::Stream(Stream { dict: dict.clone(), data })));
        }
    }
    Ok((id, obj))
}

fn stream_data(bytes: &[u8], mut start: usize, dict: &Dict) -> Result<Vec<u8>> {
    if bytes.get(start) == Some(&b'\r') {
        start += 1;
    }
    if bytes.get(start) == Some(&b'\n') {
        start += 1;
    }
    if let Some(len) = dict.get("Length").and_then(Object::as_i64) {
        let end = start + len.max(0) as usize;
        if end <= bytes.len() {
            let mut lx = Lexer::new(bytes, end);
            lx.skip_ws();
            if bytes[lx.pos..].starts_with(b"endstream") {
                return Ok(bytes[start..end].to_vec());
            }
        }
    }
    let rel = bytes[start..]
        .windows(9)
        .position(|w| w == b"endstream")
        .ok_or_else(|| PdfError::syntax(start, "stream without endstream"))?;
    let mut end = start + rel;
    if end > start && bytes[end - 1] == b'\n' {
        end -= 1;
    }
    if end > start && bytes[end - 1] == b'\r' {
        end -= 1;
    }
    Ok(bytes[start..end].to_vec())
}

fn load_objects(bytes: &[u8], entries: &Entries, trailer: Dict) -> Result<(HashMap<ObjRef, Object>, Dict)> {
    let mut objects = HashMap::new();
    let mut by_stream: BTreeMap<u32, Vec<(u32, usize)>> = BTreeMap::new();
    for (&num, &(gen, entry)) in entries {
        match entry {
            XrefEntry::InFile(off) => {
                if off >= bytes.len() {
                    return Err(PdfError::syntax(off, format!("object {num} offset beyond end of file")));
                }
                let (id, obj) = parse_indirect(bytes, off)?;
                if id.num != num {
                    return Err(PdfError::syntax(off, format!("xref points object {num} at object {}", id.num)));
                }
                objects.insert(ObjRef::new(num, gen), obj);
            }
            XrefEntry::InStream { stream, index } => by_stream.entry(stream).or_default().push((num, index)),
        }
    }
    for (stream_num, members) in by_stream {
        let Some(Object::Stream(s)) = objects.get(&ObjRef::new(stream_num, 0)).cloned() else {
            return Err(PdfError::Structure(format!("object stream {stream_num} missing")));
        };
        for (id, obj) in unpack_object_stream(&s)? {
            if members.iter().any(|&(n, _)| n == id.num) {
                objects.entry(id).or_insert(obj);
            }
        }
    }
    Ok((objects, trailer))
}

fn unpack_object_stream(s: &Stream) -> Result<Vec<(ObjRef, Object)>> {
    let data = decode_stream(s)?;
    let n = s.dict.get("N").and_then(Object::as_i64).unwrap_or(0).max(0) as usize;
    let first = s.dict.get("First").and_then(Object::as_i64).unwrap_or(0).max(0) as usize;
    let mut header = Lexer::new(&data, 0);
    let mut offsets = Vec::with_capacity(n);
    for _ in 0..n {
        match (header.next_token()?, header.next_token()?) {
            (Some(Token::Int(num)), Some(Token::Int(off))) => offsets.push((num as u32, off as usize)),
            _ => return Err(header.err(header.pos, "bad object stream header")),
        }
    }
    let mut out = Vec::with_capacity(n);
    for (num, off) in offsets {
        let mut lx = Lexer::new(&data, first + off);
        out.push((ObjRef::new(num, 0), lx.parse_object(true)?));
    }
    Ok(out)
}

/// Rebuilds the object table by scanning for object headers.
fn reconstruct(bytes: &[u8]) -> Result<(HashMap<ObjRef, Object>, Dict)> {
    let mut objects = HashMap::new();
    let mut trailer = Dict::new();
    let mut i = 0;
    while let Some(rel) = bytes[i..].windows(3).position(|w| w == b"obj") {
        let kw = i + rel;
        i = kw + 3;
        let Some(start) = header_start(bytes, kw) else { continue };
        if let Ok((id, obj)) = parse_indirect(bytes, start) {
            if let Object::Stream(s) = &obj {
                match s.dict.get("Type").and_then(Object::as_name) {
                    Some("ObjStm") => {
                        if let Ok(inner) = unpack_object_stream(s) {
                            for (r, o) in inner {
                                objects.entry(r).or_insert(o);
                            }
                        }
                    }
                    Some("XRef") => {
                        for (k, v) in &s.dict {
                            if matches!(k.as_str(), "Root" | "Info" | "Encrypt" | "ID") {
                                trailer.insert(k.clone(), v.clone());
                            }
                        }
                    }
                    _ => {}
                }
            }
            objects.insert(id, obj);
        }
    }
    let mut j = 0;
    while let Some(rel) = bytes[j..].windows(7).position(|w| w == b"trailer") {
        let mut lx = Lexer::new(bytes, j + rel + 7);
        lx.skip_ws();
        let at = lx.pos;
        if let Ok(Some(Token::DictStart)) = lx.next_token() {
            if let Ok(d) = lx.dict_body(at, true) {
                for (k, v) in d {
                    trailer.insert(k, v);
                }
            }
        }
        j += rel + 7;
    }
    if !trailer.contains_key("Root") {
        let root = objects
            .iter()
            .filter(|(_, o)| o.as_dict().and_then(|d| d.get("Type")).and_then(Object::as_name) == Some("Catalog"))
            .map(|(r, _)| *r)
            .min();
        match root {
            Some(r) => {
                trailer.insert("Root".into(), Object::Ref(r));
            }
            None => return Err(PdfError::Structure("no catalog found while reconstructing".into())),
        }
    }
    Ok((objects, trailer))
}

/// Start of `N G ` preceding an `obj` keyword at `kw`.
fn header_start(bytes: &[u8], kw: usize) -> Option<usize> {
    if bytes.get(kw + 3).is_some_and(|&b| !crate::lexer::is_whitespace(b) && !crate::lexer::is_delimiter(b)) {
        return None;
    }
    let mut p = kw;
    let mut fields = 0;
    while fields < 2 {
        while p > 0 && crate::lexer::is_whitespace(bytes[p - 1]) {
            p -= 1;
        }
        let end = p;
        while p > 0 && bytes[p - 1].is_ascii_digit() {
            p -= 1;
        }
        if p == end {
            return None;
        }
        fields += 1;
    }
    Some(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(extra_trailer: &str) -> Vec<u8> {
        let objs = [
            "<< /Type /Catalog /Pages 2 0 R >>",
            "<< /Type /Pages /Kids [3 0 R] /Count 1 /MediaBox [0 0 200 100] >>",
            "<< /Type /Page /Parent 2 0 R /Rotate 90 >>",
        ];
        let mut out = b"%PDF-1.4\n".to_vec();
        let mut offs = Vec::new();
        for (i, o) in objs.iter().enumerate() {
            offs.push(out.len());
            out.extend_from_slice(format!("{} 0 obj\n{o}\nendobj\n", i + 1).as_bytes());
        }
        let xref = out.len();
        out.extend_from_slice(format!("xref\n0 {}\n0000000000 65535 f \n", objs.len() + 1).as_bytes());
        for o in offs {
            out.extend_from_slice(format!("{o:010} 00000 n \n").as_bytes());
        }
        out.extend_from_slice(format!("trailer\n<< /Size 4 /Root 1 0 R {extra_trailer}>>\nstartxref\n{xref}\n%%EOF\n").as_bytes());
        out
    }

    #[test]
    fn loads_and_inherits() {
        let doc = Document::load(&minimal("")).unwrap();
        assert_eq!(doc.version, "1.4");
        let pages = doc.pages().unwrap();
        assert_eq!(pages.len(), 1);
        assert_eq!(pages[0].media_box, [0.0, 0.0, 200.0, 100.0]);
        assert_eq!(pages[0].rotate, 90);
    }

    #[test]
    fn broken_xref_is_reconstructed() {
        let mut bytes = minimal("");
        let p = bytes.windows(9).rposition(|w| w == b"startxref").unwrap();
        bytes.truncate(p);
        bytes.extend_from_slice(b"startxref\n5\n%%EOF\n");
        let doc = Document::load(&bytes).unwrap();
        assert_eq!(doc.pages().unwrap().len(), 1);
    }

    #[test]
    fn encrypted_is_rejected() {
        let err = Document::load(&minimal("/Encrypt << /Filter /Standard >> ")).unwrap_err();
        assert!(matches!(err, PdfError::Encrypted));
    }

    #[test]
    fn garbage_reports_offset() {
        let err = Document::load(b"%PDF-1.4\n1 0 obj << /A [ >> endobj\nstartxref\n9\n%%EOF").unwrap_err();
        assert!(err.offset().is_some(), "{err:?}");
        let err = Document::load(b"hello").unwrap_err();
        assert_eq!(err.offset(), Some(0));
    }

    #[test]
    fn header_scan() {
        assert_eq!(header_start(b"x 12 0 obj", 7), Some(2));
        assert_eq!(header_start(b"endobj", 3), None);
    }
}
