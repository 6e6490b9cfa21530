//! Tokenizer and object parser shared by the file reader and the content
//! stream interpreter.

use crate::error::{PdfError, Result};
use crate::object::{Dict, ObjRef, Object};

pub(crate) fn is_whitespace(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | b'\x0c' | b'\0')
}

pub(crate) fn is_delimiter(b: u8) -> bool {
    matches!(b, b'(' | b')' | b'<' | b'>' | b'[' | b']' | b'{' | b'}' | b'/' | b'%')
}

fn is_regular(b: u8) -> bool {
    !is_whitespace(b) && !is_delimiter(b)
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Token {
    Int(i64),
    Real(f64),
    Name(String),
    Str(Vec<u8>),
    ArrayStart,
    ArrayEnd,
    DictStart,
    DictEnd,
    Keyword(Vec<u8>),
}

pub(crate) struct Lexer<'a> {
    pub buf: &'a [u8],
    pub pos: usize,
    /// Added to reported offsets when `buf` is a slice of a larger file.
    pub base: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(buf: &'a [u8], pos: usize) -> Self {
        Self { buf, pos, base: 0 }
    }

    pub fn err(&self, at: usize, message: impl Into<String>) -> PdfError {
        PdfError::syntax(self.base + at, message)
    }

    pub fn skip_ws(&mut self) {
        while self.pos < self.buf.len() {
            let b = self.buf[self.pos];
            if is_whitespace(b) {
                self.pos += 1;
            } else if b == b'%' {
                while self.pos < self.buf.len() && !matches!(self.buf[self.pos], b'\r' | b'\n') {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    pub fn next_token(&mut self) -> Result<Option<Token>> {
        self.skip_ws();
        let Some(&b) = self.buf.get(self.pos) else {
            return Ok(None);
        };
        let start = self.pos;
        let tok = match b {
            b'[' => {
                self.pos += 1;
                Token::ArrayStart
            }
            b']' => {
                self.pos += 1;
                Token::ArrayEnd
            }
            b'<' if self.buf.get(start + 1) == Some(&b'<') => {
                self.pos += 2;
                Token::DictStart
            }
            b'>' if self.buf.get(start + 1) == Some(&b'>') => {
                self.pos += 2;
                Token::DictEnd
            }
            b'<' => Token::Str(self.hex_string()?),
            b'(' => Token::Str(self.literal_string()?),
            b'/' => Token::Name(self.name()),
            b'{' | b'}' => {
                self.pos += 1;
                Token::Keyword(vec![b])
            }
            b')' | b'>' => return Err(self.err(start, format!("unexpected '{}'", b as char))),
            _ => {
                while self.pos < self.buf.len() && is_regular(self.buf[self.pos]) {
                    self.pos += 1;
                }
                let word = &self.buf[start..self.pos];
                number(word).unwrap_or_else(|| Token::Keyword(word.to_vec()))
            }
        };
        Ok(Some(tok))
    }

    fn name(&mut self) -> String {
        self.pos += 1;
        let mut out = Vec::new();
        while self.pos < self.buf.len() && is_regular(self.buf[self.pos]) {
            let b = self.buf[self.pos];
            if b == b'#' {
                let hex = self.buf.get(self.pos + 1..self.pos + 3);
                if let Some(v) = hex.and_then(|h| std::str::from_utf8(h).ok()).and_then(|h| u8::from_str_radix(h, 16).ok()) {
                    out.push(v);
                    self.pos += 3;
                    continue;
                }
            }
            out.push(b);
            self.pos += 1;
        }
        String::from_utf8(out).unwrap_or_else(|e| e.into_bytes().iter().map(|&b| b as char).collect())
    }

    fn hex_string(&mut self) -> Result<Vec<u8>> {
        let start = self.pos;
        self.pos += 1;
        let mut digits = Vec::new();
        loop {
            let Some(&b) = self.buf.get(self.pos) else {
                return Err(self.err(start, "unterminated hex string"));
            };
            self.pos += 1;
            match b {
                b'>' => break,
                b if b.is_ascii_hexdigit() => digits.push(hex_val(b)),
                b if is_whitespace(b) => {}
                _ => return Err(self.err(self.pos - 1, "invalid character in hex string")),
            }
        }
        if digits.len() % 2 == 1 {
            digits.push(0);
        }
        Ok(digits.chunks(2).map(|p| p[0] << 4 | p[1]).collect())
    }

    fn literal_string(&mut self) -> Result<Vec<u8>> {
        let start = self.pos;
        self.pos += 1;
        let mut depth = 1usize;
        let mut out = Vec::new();
        loop {
            let Some(&b) = self.buf.get(self.pos) else {
                return Err(self.err(start, "unterminated literal string"));
            };
            self.pos += 1;
            match b {
                b'(' => {
                    depth += 1;
                    out.push(b);
                }
                b')' => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                    out.push(b);
                }
                b'\\' => {
                    let Some(&e) = self.buf.get(self.pos) else {
                        return Err(self.err(start, "unterminated literal string"));
                    };
                    self.pos += 1;
                    match e {
                        b'n' => out.push(b'\n'),
                        b'r' => out.push(b'\r'),
                        b't' => out.push(b'\t'),
                        b'b' => out.push(8),
                        b'f' => out.push(12),
                        b'\r' => {
                            if self.buf.get(self.pos) == Some(&b'\n') {
                                self.pos += 1;
                            }
                        }
                        b'\n' => {}
                        b'0'..=b'7' => {
                            let mut v = (e - b'0') as u32;
                            for _ in 0..2 {
                                match self.buf.get(self.pos) {
                                    Some(&d @ b'0'..=b'7') => {
                                        v = v * 8 + (d - b'0') as u32;
                                        self.pos += 1;
                                    }
                                    _ => break,
                                }
                            }
                            out.push(v as u8);
                        }
                        other => out.push(other),
                    }
                }
                _ => out.push(b),
            }
        }
        Ok(out)
    }

    /// Parses one object. `allow_refs` enables the `N G R` form, which is
    /// not valid inside content streams.
    pub fn parse_object(&mut self, allow_refs: bool) -> Result<Object> {
        self.skip_ws();
        let start = self.pos;
        let tok = self.next_token()?.ok_or_else(|| self.err(start, "unexpected end of data"))?;
        self.object_from(tok, start, allow_refs)
    }

    pub fn object_from(&mut self, tok: Token, start: usize, allow_refs: bool) -> Result<Object> {
        Ok(match tok {
            Token::Int(i) => {
                if allow_refs {
                    if let Some(r) = self.try_reference(i) {
                        return Ok(Object::Ref(r));
                    }
                }
                Object::Int(i)
            }
            Token::Real(r) => Object::Real(r),
            Token::Name(n) => Object::Name(n),
            Token::Str(s) => Object::Str(s),
            Token::ArrayStart => {
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    let at = self.pos;
                    match self.next_token()? {
                        None => return Err(self.err(start, "unterminated array")),
                        Some(Token::ArrayEnd) => break,
                        Some(t) => items.push(self.object_from(t, at, allow_refs)?),
                    }
                }
                Object::Array(items)
            }
            Token::DictStart => Object::Dict(self.dict_body(start, allow_refs)?),
            Token::Keyword(k) => match k.as_slice() {
                b"true" => Object::Bool(true),
                b"false" => Object::Bool(false),
                b"null" => Object::Null,
                _ => return Err(self.err(start, format!("unexpected keyword '{}'", String::from_utf8_lossy(&k)))),
            },
            Token::ArrayEnd | Token::DictEnd => return Err(self.err(start, "unbalanced delimiter")),
        })
    }

    pub fn dict_body(&mut self, start: usize, allow_refs: bool) -> Result<Dict> {
        let mut dict = Dict::new();
        loop {
            self.skip_ws();
            let at = self.pos;
            match self.next_token()? {
                None => return Err(self.err(start, "unterminated dictionary")),
                Some(Token::DictEnd) => break,
                Some(Token::Name(key)) => {
                    let value = self.parse_object(allow_refs)?;
                    dict.insert(key, value);
                }
                Some(_) => return Err(self.err(at, "dictionary key must be a name")),
            }
        }
        Ok(dict)
    }

    fn try_reference(&mut self, num: i64) -> Option<ObjRef> {
        let save = self.pos;
        let ok = (|| {
            let gen = match self.next_token().ok()?? {
                Token::Int(g) if (0..=u16::MAX as i64).contains(&g) => g,
                _ => return None,
            };
            match self.next_token().ok()?? {
                Token::Keyword(k) if k == b"R" => {}
                _ => return None,
            }
            if !(0..=u32::MAX as i64).contains(&num) {
                return None;
            }
            Some(ObjRef::new(num as u32, gen as u16))
        })();
        if ok.is_none() {
            self.pos = save;
        }
        ok
    }

    /// Expects the keyword `kw` next.
    pub fn expect_keyword(&mut self, kw: &[u8]) -> Result<()> {
        self.skip_ws();
        let at = self.pos;
        match self.next_token()? {
            Some(Token::Keyword(k)) if k == kw => Ok(()),
            _ => Err(self.err(at, format!("expected '{}'", String::from_utf8_lossy(kw)))),
        }
    }
}

fn hex_val(b: u8) -> u8 {
    match b {
        b'0'..=b'9' => b - b'0',
        b'a'..=b'f' => b - b'a' + 10,
        _ => b - b'A' + 10,
    }
}

fn number(word: &[u8]) -> Option<Token> {
    let s = std::str::from_utf8(word).ok()?;
    let first = *word.first()?;
    if !(first.is_ascii_digit() || matches!(first, b'+' | b'-' | b'.')) {
        return None;
    }
    if let Ok(i) = s.parse::<i64>() {
        return Some(Token::Int(i));
    }
    if s.bytes().all(|b| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.')) {
        // Producers emit oddities like "-.5" and "4." which Rust accepts, and
        // "--3" which it does not; treat the latter as zero like most readers.
        return Some(Token::Real(s.parse::<f64>().unwrap_or(0.0)));
    }
    None
}
