#![allow(dead_code)]

use vi_phonemic::phonology::PhonemeClass;
use vi_phonemic::tokenizer::parse_syllable;

pub const GOLDEN: &str = include_str!("../fixtures/golden_words.tsv");

pub struct GoldenRow {
    pub line: usize,
    pub word: String,
    pub class: PhonemeClass,
    pub written_form: String,
    pub ipa: String,
}

pub fn golden_rows() -> Vec<GoldenRow> {
    GOLDEN
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            let cols: Vec<&str> = l.split('\t').collect();
            let class = match cols[1] {
                "initial" => PhonemeClass::Initial,
                "glide" => PhonemeClass::Glide,
                "vowel" => PhonemeClass::Vowel,
                "final" => PhonemeClass::Final,
                other => panic!("line {}: class {other}", i + 1),
            };
            GoldenRow {
                line: i + 1,
                word: cols[0].to_string(),
                class,
                written_form: cols[2].to_string(),
                ipa: cols[3].to_string(),
            }
        })
        .collect()
}

/// `Err` describes the mismatch.
pub fn check_row(row: &GoldenRow) -> Result<(), String> {
    let parsed = parse_syllable(&row.word).map_err(|e| e.to_string())?;
    let s = parsed.syllable;
    let g = parsed.graphemes;
    let (form, phoneme) = match row.class {
        PhonemeClass::Initial => (g.initial, s.initial),
        PhonemeClass::Glide => (g.glide, s.glide),
        PhonemeClass::Vowel => (g.vowel, s.vowel),
        PhonemeClass::Final => (g.coda, s.coda),
    };
    let got = (
        form.unwrap_or_default(),
        phoneme.map(|p| p.ipa()).unwrap_or("∅"),
    );
    if got == (row.written_form.clone(), row.ipa.as_str()) {
        Ok(())
    } else {
        Err(format!(
            "{} ({}): expected {}/{}, got {}/{}",
            row.word, row.line, row.written_form, row.ipa, got.0, got.1
        ))
    }
}
