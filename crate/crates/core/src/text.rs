//! Text cleanup applied to every extracted text block.

/// U+FFFF shows up in some producers' output where a space belongs.
const SPACE_SUBSTITUTE: char = '\u{FFFF}';

/// Characters treated as separators: Unicode whitespace plus U+FFFF.
pub fn is_separator(c: char) -> bool {
    c.is_whitespace() || c == SPACE_SUBSTITUTE
}

/// Replaces line breaks and U+FFFF with spaces, collapses whitespace runs and trims.
pub fn preprocess_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for tok in tokens(raw) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}

/// Maximal runs of non-separator characters.
pub fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(is_separator).filter(|t| !t.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(preprocess_text("Real\nDecreto"), "Real Decreto");
        assert_eq!(preprocess_text("BOE\u{FFFF}núm.\u{FFFF}12"), "BOE núm. 12");
        assert_eq!(preprocess_text("  a   b  "), "a b");
        assert_eq!(preprocess_text("\r\n\t"), "");
    }

    #[test]
    fn idempotent() {
        let s = "  x\u{FFFF}\u{FFFF}y \n z ";
        let once = preprocess_text(s);
        assert_eq!(preprocess_text(&once), once);
        assert_eq!(tokens(s).count(), 3);
    }
}
