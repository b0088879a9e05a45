//! The bundled single-syllable lexicon.
//!
//! 6,538 attested syllables in canonical spelling: NFC, modern tone
//! placement, one spelling per phonemic form. `tools/build_lexicon.py`
//! regenerates the file.

pub const LEXICON_TXT: &str = include_str!("../data/lexicon.txt");

/// The bundled syllables, in file order.
pub fn bundled() -> Vec<&'static str> {
    words(LEXICON_TXT)
}

/// Non-empty, non-comment lines of a word list.
pub fn words(text: &str) -> Vec<&str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}
