//! Glyph widths and encodings for fonts that do not carry their own.
//!
//! The proportional table is the Helvetica AFM for the printable ASCII
//! range; Latin-1 letters take the width of their base letter. It stands in
//! for every non-monospaced standard face.

/// Ascent and descent (glyph units) assumed when a font has no descriptor.
pub const DEFAULT_ASCENT: f64 = 800.0;
pub const DEFAULT_DESCENT: f64 = -200.0;

const HELVETICA_ASCII: [u16; 95] = [
    278, 278, 355, 556, 556, 889, 667, 191, 333, 333, 389, 584, 278, 333, 278, 278, // space ../
    556, 556, 556, 556, 556, 556, 556, 556, 556, 556, // 0-9
    278, 278, 584, 584, 584, 556, 1015, // : ; < = > ? @
    667, 667, 722, 722, 667, 611, 778, 722, 278, 500, 667, 556, 833, // A-M
    722, 778, 667, 778, 722, 667, 611, 722, 667, 944, 667, 667, 611, // N-Z
    278, 278, 278, 469, 556, 333, // [ \ ] ^ _ `
    556, 556, 500, 556, 556, 278, 556, 556, 222, 222, 500, 222, 833, // a-m
    556, 556, 556, 556, 333, 500, 278, 556, 500, 722, 500, 500, 500, // n-z
    334, 260, 334, 584, // { | } ~
];

/// True for the Courier family, which is monospaced at 600 units.
pub fn is_monospace(font_name: &str) -> bool {
    font_name.to_ascii_lowercase().contains("courier")
}

/// Width in glyph units (1/1000 em) of `c` in a standard face.
pub fn standard_width(font_name: &str, c: char) -> f64 {
    if is_monospace(font_name) {
        return 600.0;
    }
    let w = match c {
        ' '..='~' => HELVETICA_ASCII[c as usize - 32],
        '\u{a0}' => 278,
        'á' | 'à' | 'â' | 'ä' | 'ã' | 'å' | 'é' | 'è' | 'ê' | 'ë' | 'ó' | 'ò' | 'ô' | 'ö' | 'õ' | 'ú' | 'ù' | 'û' | 'ü' | 'ñ'
        | 'ý' | 'ÿ' => base_width(c),
        'í' | 'ì' | 'î' | 'ï' => 278,
        'Á' | 'À' | 'Â' | 'Ä' | 'Ã' | 'Å' | 'É' | 'È' | 'Ê' | 'Ë' | 'Í' | 'Ì' | 'Î' | 'Ï' | 'Ó' | 'Ò' | 'Ô' | 'Ö' | 'Õ' | 'Ú'
        | 'Ù' | 'Û' | 'Ü' | 'Ñ' | 'Ç' | 'ç' | 'Ý' => base_width(c),
        '¿' => 611,
        '¡' => 333,
        'ª' => 370,
        'º' => 365,
        '°' => 400,
        '€' => 556,
        '–' => 556,
        '—' => 1000,
        '‘' | '’' | '‚' => 222,
        '“' | '”' | '„' => 333,
        '•' => 350,
        '…' => 1000,
        '«' | '»' => 556,
        '·' => 278,
        '§' => 556,
        _ => 556,
    };
    w as f64
}

fn base_width(c: char) -> u16 {
    let base = match c {
        'á' | 'à' | 'â' | 'ä' | 'ã' | 'å' => 'a',
        'é' | 'è' | 'ê' | 'ë' => 'e',
        'ó' | 'ò' | 'ô' | 'ö' | 'õ' => 'o',
        'ú' | 'ù' | 'û' | 'ü' => 'u',
        'ñ' => 'n',
        'ý' | 'ÿ' => 'y',
        'ç' => 'c',
        'Á' | 'À' | 'Â' | 'Ä' | 'Ã' | 'Å' => 'A',
        'É' | 'È' | 'Ê' | 'Ë' => 'E',
        'Í' | 'Ì' | 'Î' | 'Ï' => 'I',
        'Ó' | 'Ò' | 'Ô' | 'Ö' | 'Õ' => 'O',
        'Ú' | 'Ù' | 'Û' | 'Ü' => 'U',
        'Ñ' => 'N',
        'Ç' => 'C',
        'Ý' => 'Y',
        _ => return 556,
    };
    HELVETICA_ASCII[base as usize - 32]
}

/// Width of a whole string in points.
pub fn text_width(font_name: &str, size: f64, text: &str) -> f64 {
    text.chars().map(|c| standard_width(font_name, c)).sum::<f64>() * size / 1000.0
}

const WIN_ANSI_HIGH: [char; 32] = [
    '€', '\u{81}', '‚', 'ƒ', '„', '…', '†', '‡', 'ˆ', '‰', 'Š', '‹', 'Œ', '\u{8d}', 'Ž', '\u{8f}', '\u{90}', '‘', '’', '“', '”', '•',
    '–', '—', '˜', '™', 'š', '›', 'œ', '\u{9d}', 'ž', 'Ÿ',
];

/// WinAnsiEncoding (Windows-1252) byte to character.
pub fn win_ansi_char(b: u8) -> char {
    match b {
        0x80..=0x9f => WIN_ANSI_HIGH[(b - 0x80) as usize],
        _ => b as char,
    }
}

/// Character to WinAnsiEncoding byte, if representable.
pub fn win_ansi_byte(c: char) -> Option<u8> {
    let u = c as u32;
    if u < 0x80 || (0xa0..=0xff).contains(&u) {
        return Some(u as u8);
    }
    WIN_ANSI_HIGH.iter().position(|&h| h == c).map(|i| 0x80 + i as u8)
}

const GLYPH_NAMES: &[(&str, char)] = &[
    ("space", ' '),
    ("exclam", '!'),
    ("quotedbl", '"'),
    ("numbersign", '#'),
    ("dollar", '$'),
    ("percent", '%'),
    ("ampersand", '&'),
    ("quotesingle", '\''),
    ("parenleft", '('),
    ("parenright", ')'),
    ("asterisk", '*'),
    ("plus", '+'),
    ("comma", ','),
    ("hyphen", '-'),
    ("period", '.'),
    ("slash", '/'),
    ("zero", '0'),
    ("one", '1'),
    ("two", '2'),
    ("three", '3'),
    ("four", '4'),
    ("five", '5'),
    ("six", '6'),
    ("seven", '7'),
    ("eight", '8'),
    ("nine", '9'),
    ("colon", ':'),
    ("semicolon", ';'),
    ("less", '<'),
    ("equal", '='),
    ("greater", '>'),
    ("question", '?'),
    ("at", '@'),
    ("bracketleft", '['),
    ("backslash", '\\'),
    ("bracketright", ']'),
    ("asciicircum", '^'),
    ("underscore", '_'),
    ("grave", '`'),
    ("braceleft", '{'),
    ("bar", '|'),
    ("braceright", '}'),
    ("asciitilde", '~'),
    ("quoteleft", '‘'),
    ("quoteright", '’'),
    ("quotesinglbase", '‚'),
    ("quotedblleft", '“'),
    ("quotedblright", '”'),
    ("quotedblbase", '„'),
    ("endash", '–'),
    ("emdash", '—'),
    ("bullet", '•'),
    ("ellipsis", '…'),
    ("Euro", '€'),
    ("exclamdown", '¡'),
    ("questiondown", '¿'),
    ("ordfeminine", 'ª'),
    ("ordmasculine", 'º'),
    ("degree", '°'),
    ("section", '§'),
    ("guillemotleft", '«'),
    ("guillemotright", '»'),
    ("periodcentered", '·'),
    ("copyright", '©'),
    ("registered", '®'),
    ("nbspace", '\u{a0}'),
    ("Aacute", 'Á'),
    ("Agrave", 'À'),
    ("Adieresis", 'Ä'),
    ("Eacute", 'É'),
    ("Egrave", 'È'),
    ("Iacute", 'Í'),
    ("Oacute", 'Ó'),
    ("Odieresis", 'Ö'),
    ("Uacute", 'Ú'),
    ("Udieresis", 'Ü'),
    ("Ntilde", 'Ñ'),
    ("Ccedilla", 'Ç'),
    ("aacute", 'á'),
    ("agrave", 'à'),
    ("adieresis", 'ä'),
    ("eacute", 'é'),
    ("egrave", 'è'),
    ("iacute", 'í'),
    ("oacute", 'ó'),
    ("odieresis", 'ö'),
    ("uacute", 'ú'),
    ("udieresis", 'ü'),
    ("ntilde", 'ñ'),
    ("ccedilla", 'ç'),
];

/// Unicode text for a glyph name from an encoding `/Differences` array.
pub fn glyph_name_to_char(name: &str) -> Option<char> {
    if name.len() == 1 {
        return name.chars().next();
    }
    if let Some(hex) = name.strip_prefix("uni").filter(|h| h.len() == 4) {
        return u32::from_str_radix(hex, 16).ok().and_then(char::from_u32);
    }
    if let Some(hex) = name.strip_prefix('u').filter(|h| (4..=6).contains(&h.len())) {
        if let Some(c) = u32::from_str_radix(hex, 16).ok().and_then(char::from_u32) {
            return Some(c);
        }
    }
    GLYPH_NAMES.iter().find(|(n, _)| *n == name).map(|&(_, c)| c)
}
