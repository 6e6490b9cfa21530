use std::io::Read;

use flate2::read::ZlibDecoder;

use crate::error::{PdfError, Result};
use crate::object::{Dict, Object, Stream};

fn filter_err(filter: &str, message: impl Into<String>) -> PdfError {
    PdfError::Filter { filter: filter.to_string(), message: message.into() }
}

/// Filter names and their parameter dictionaries, in application order.
fn filter_chain(dict: &Dict) -> Vec<(String, Option<Dict>)> {
    let names: Vec<String> = match dict.get("Filter") {
        Some(Object::Name(n)) => vec![n.clone()],
        Some(Object::Array(a)) => a.iter().filter_map(|o| o.as_name().map(str::to_string)).collect(),
        _ => Vec::new(),
    };
    let params: Vec<Option<Dict>> = match dict.get("DecodeParms") {
        Some(Object::Dict(d)) => vec![Some(d.clone())],
        Some(Object::Array(a)) => a.iter().map(|o| o.as_dict().cloned()).collect(),
        _ => Vec::new(),
    };
    names.into_iter().enumerate().map(|(i, n)| (n, params.get(i).cloned().flatten())).collect()
}

/// Image codecs are passed through untouched; nothing downstream needs pixels.
const PASS_THROUGH: [&str; 5] = ["DCTDecode", "JPXDecode", "CCITTFaxDecode", "JBIG2Decode", "RunLengthDecode"];

pub fn decode_stream(stream: &Stream) -> Result<Vec<u8>> {
    let mut data = stream.data.clone();
    for (name, params) in filter_chain(&stream.dict) {
        data = match name.as_str() {
            "FlateDecode" | "Fl" => {
                let raw = inflate(&data)?;
                apply_predictor(raw, params.as_ref())?
            }
            "ASCIIHexDecode" | "AHx" => ascii_hex(&data)?,
            "ASCII85Decode" | "A85" => ascii85(&data)?,
            n if PASS_THROUGH.contains(&n) => return Ok(data),
            other => return Err(PdfError::Unsupported(format!("stream filter {other}"))),
        };
    }
    Ok(data)
}

fn inflate(data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    match ZlibDecoder::new(data).read_to_end(&mut out) {
        Ok(_) => Ok(out),
        // Truncated streams are common; keep whatever decoded cleanly.
        Err(_) if !out.is_empty() => Ok(out),
        Err(e) => Err(filter_err("FlateDecode", e.to_string())),
    }
}

fn param(params: Option<&Dict>, key: &str, default: i64) -> i64 {
    params.and_then(|p| p.get(key)).and_then(Object::as_i64).unwrap_or(default)
}

fn apply_predictor(data: Vec<u8>, params: Option<&Dict>) -> Result<Vec<u8>> {
    let predictor = param(params, "Predictor", 1);
    if predictor < 10 {
        if predictor == 2 {
            return Err(PdfError::Unsupported("TIFF predictor".into()));
        }
        return Ok(data);
    }
    let colors = param(params, "Colors", 1).max(1) as usize;
    let bpc = param(params, "BitsPerComponent", 8).max(1) as usize;
    let columns = param(params, "Columns", 1).max(1) as usize;
    let bpp = (colors * bpc).div_ceil(8);
    let row_len = (colors * bpc * columns).div_ceil(8);
    let mut out = Vec::with_capacity(data.len());
    let mut prev = vec![0u8; row_len];
    for chunk in data.chunks(row_len + 1) {
        if chunk.len() < row_len + 1 {
            break;
        }
        let kind = chunk[0];
        let mut row = chunk[1..].to_vec();
        for i in 0..row_len {
            let left = if i >= bpp { row[i - bpp] } else { 0 };
            let up = prev[i];
            let up_left = if i >= bpp { prev[i - bpp] } else { 0 };
            let pred = match kind {
                0 => 0,
                1 => left,
                2 => up,
                3 => ((left as u16 + up as u16) / 2) as u8,
                4 => paeth(left, up, up_left),
                k => return Err(filter_err("FlateDecode", format!("bad PNG row filter {k}"))),
            };
            row[i] = row[i].wrapping_add(pred);
        }
        out.extend_from_slice(&row);
        prev = row;
    }
    Ok(out)
}

fn paeth(a: u8, b: u8, c: u8) -> u8 {
    let p = a as i16 + b as i16 - c as i16;
    let (pa, pb, pc) = ((p - a as i16).abs(), (p - b as i16).abs(), (p - c as i16).abs());
    if pa <= pb && pa <= pc {
        a
    } else if pb <= pc {
        b
    } else {
        c
    }
}

fn ascii_hex(data: &[u8]) -> Result<Vec<u8>> {
    let mut nibbles = Vec::new();
    for &b in data {
        match b {
            b'>' => break,
            b if b.is_ascii_hexdigit() => nibbles.push((b as char).to_digit(16).unwrap_or(0) as u8),
            b if crate::lexer::is_whitespace(b) => {}
            _ => return Err(filter_err("ASCIIHexDecode", format!("invalid byte 0x{b:02x}"))),
        }
    }
    if nibbles.len() % 2 == 1 {
        nibbles.push(0);
    }
    Ok(nibbles.chunks(2).map(|p| p[0] << 4 | p[1]).collect())
}

fn ascii85(data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut group = Vec::with_capacity(5);
    let body = data.strip_prefix(b"<~").unwrap_or(data);
    for &b in body {
        match b {
            b'~' => break,
            b'z' if group.is_empty() => out.extend_from_slice(&[0, 0, 0, 0]),
            b'!'..=b'u' => {
                group.push(b - b'!');
                if group.len() == 5 {
                    let v = group.iter().fold(0u64, |acc, &d| acc * 85 + d as u64);
                    out.extend_from_slice(&(v as u32).to_be_bytes());
                    group.clear();
                }
            }
            b if crate::lexer::is_whitespace(b) => {}
            _ => return Err(filter_err("ASCII85Decode", format!("invalid byte 0x{b:02x}"))),
        }
    }
    if !group.is_empty() {
        let n = group.len();
        while group.len() < 5 {
            group.push(84);
        }
        let v = group.iter().fold(0u64, |acc, &d| acc * 85 + d as u64);
        out.extend_from_slice(&(v as u32).to_be_bytes()[..n - 1]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use flate2::{write::ZlibEncoder, Compression};
    use std::io::Write;

    fn stream(filter: &str, data: Vec<u8>) -> Stream {
        let mut dict = Dict::new();
        dict.insert("Filter".into(), Object::Name(filter.into()));
        Stream { dict, data }
    }

    #[test]
    fn flate_roundtrip() {
        let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
        enc.write_all(b"BT /F1 12 Tf (Hola) Tj ET").unwrap();
        let s = stream("FlateDecode", enc.finish().unwrap());
        assert_eq!(decode_stream(&s).unwrap(), b"BT /F1 12 Tf (Hola) Tj ET");
    }

    #[test]
    fn png_up_predictor() {
        let rows = [2u8, 1, 2, 2, 1, 1];
        let mut params = Dict::new();
        params.insert("Predictor".into(), Object::Int(12));
        params.insert("Columns".into(), Object::Int(2));
        assert_eq!(apply_predictor(rows.to_vec(), Some(&params)).unwrap(), vec![1, 2, 2, 3]);
    }

    #[test]
    fn ascii_filters() {
        assert_eq!(ascii_hex(b"48 65 6c6c6f>").unwrap(), b"Hello");
        assert_eq!(ascii85(b"<~87cURDZ~>").unwrap(), b"Hello");
    }

    #[test]
    fn unknown_filter_is_unsupported() {
        let s = stream("LZWDecode", vec![1, 2, 3]);
        assert!(matches!(decode_stream(&s), Err(PdfError::Unsupported(_))));
    }
}
