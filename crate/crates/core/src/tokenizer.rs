//! Text ↔ syllable conversion.
//!
//! Parsing strips the tone mark, then peels off initial, glide, vowel and
//! final in that order, each by a longest-first scan of its rule table. The
//! final must consume the rest of the word exactly. Rendering goes the other
//! way: every phoneme with more than one spelling picks its written form from
//! its neighbours, and the tone mark is placed on the nucleus.

use std::fmt;

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::phonology::{
    validate, GraphemeRule, Inventory, Phoneme, PhonemeClass, RuleContext, Syllable, Tone, Verdict,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TokenizeError {
    #[error("{word:?} carries more than one tone mark")]
    MultipleToneMarks { word: String },
    #[error("{word:?} is not a Vietnamese syllable (unparsed: {residue:?})")]
    ParseFailure { word: String, residue: String },
    #[error("word {index}: {source}")]
    AtWord {
        index: usize,
        #[source]
        source: Box<TokenizeError>,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RenderError {
    #[error("invalid syllable: {0}")]
    Invalid(Verdict),
    #[error("no written form for {0}")]
    NoWrittenForm(String),
    #[error("syllable {index}: {source}")]
    AtSyllable {
        index: usize,
        #[source]
        source: Box<RenderError>,
    },
}

/// A word with its tone mark removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedWord {
    /// Lowercase, canonically composed, free of the five tone marks.
    pub base_letters: String,
    pub tone: Tone,
}

/// Removes the tone mark from a word, wherever it sits in the combining
/// sequence. Other diacritics (breve, circumflex, horn, stroke) are kept.
pub fn strip_tone(word: &str) -> Result<NormalizedWord, TokenizeError> {
    let mut tone = Tone::Flat;
    let mut marks = 0;
    let mut rest = String::with_capacity(word.len());
    for c in word.nfd() {
        match Tone::from_mark(c) {
            Some(t) => {
                marks += 1;
                tone = t;
            }
            None => rest.push(c),
        }
    }
    if marks > 1 {
        return Err(TokenizeError::MultipleToneMarks {
            word: word.to_string(),
        });
    }
    Ok(NormalizedWord {
        base_letters: rest.nfc().collect(),
        tone,
    })
}

const VOWEL_LETTERS: &str = "aăâeêioôơuưy";

fn starts_with_vowel(s: &str) -> bool {
    s.chars().next().is_some_and(|c| VOWEL_LETTERS.contains(c))
}

/// Context visible to the matcher beyond the word itself.
#[derive(Debug, Clone, Copy, Default)]
struct MatchContext {
    after_q: bool,
}

fn context_holds(ctx: RuleContext, rest: &str, env: MatchContext) -> bool {
    let next = rest.chars().next();
    match ctx {
        RuleContext::None => true,
        RuleContext::GlideU => env.after_q || next.is_some_and(|c| "yêâơ".contains(c)),
        RuleContext::GlideO => next.is_some_and(|c| "aăe".contains(c)),
        RuleContext::BeforeYU => rest == "y" || rest == "u",
    }
}

/// Counts rule-table entries inspected while parsing. Each class is scanned
/// at most once, and only over rules sharing the word's next letter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanCounter {
    pub comparisons: usize,
}

fn scan<'w>(
    class: PhonemeClass,
    word: &'w str,
    env: MatchContext,
    counter: &mut ScanCounter,
) -> Option<(&'static GraphemeRule, &'w str)> {
    let first = word.chars().next()?;
    for rule in Inventory::builtin().candidates(class, first) {
        counter.comparisons += 1;
        if let Some(rest) = word.strip_prefix(rule.written_form.as_str()) {
            if context_holds(rule.context, rest, env) {
                return Some((rule, rest));
            }
        }
    }
    None
}

/// Longest-prefix match of one component class. Returns the phoneme and the
/// unmatched remainder; `(None, word)` when no rule applies.
pub fn match_component(word: &str, class: PhonemeClass) -> (Option<Phoneme>, &str) {
    let mut counter = ScanCounter::default();
    match scan(class, word, MatchContext::default(), &mut counter) {
        Some((rule, rest)) => (Some(rule.phoneme), rest),
        None => (None, word),
    }
}

/// Written forms matched for each component.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Graphemes {
    pub initial: Option<String>,
    pub glide: Option<String>,
    pub vowel: Option<String>,
    pub coda: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseResult {
    pub syllable: Syllable,
    /// The word as given.
    pub consumed: String,
    /// Always empty in a returned result; failures come back as errors.
    pub residue: String,
    pub graphemes: Graphemes,
    pub counter: ScanCounter,
}

/// Parses one lowercase word into its syllable.
pub fn parse_syllable(word: &str) -> Result<ParseResult, TokenizeError> {
    let normalized = strip_tone(word)?;
    let base = normalized.base_letters.as_str();
    let fail = |residue: &str| TokenizeError::ParseFailure {
        word: word.to_string(),
        residue: residue.to_string(),
    };
    let mut counter = ScanCounter::default();
    let mut graphemes = Graphemes::default();

    let (initial, rest) = match scan(
        PhonemeClass::Initial,
        base,
        MatchContext::default(),
        &mut counter,
    ) {
        Some((rule, rest)) => {
            graphemes.initial = Some(rule.written_form.clone());
            (Some(rule), rest)
        }
        None => (None, base),
    };
    let after_q = initial.is_some_and(|r| r.written_form == "q");

    // "gì", "gìn": the i of "gi" doubles as the nucleus
    let shared_i = initial.is_some_and(|r| r.written_form == "gi") && !starts_with_vowel(rest);

    let (glide, vowel, rest) = if shared_i {
        let i = Phoneme::from_ipa(PhonemeClass::Vowel, "i").expect("inventory has /i/");
        graphemes.vowel = Some("i".to_string());
        (None, Some(i), rest)
    } else {
        let (glide, rest) = match scan(
            PhonemeClass::Glide,
            rest,
            MatchContext { after_q },
            &mut counter,
        ) {
            Some((rule, rest)) => {
                graphemes.glide = Some(rule.written_form.clone());
                (Some(rule.phoneme), rest)
            }
            None => (None, rest),
        };
        if after_q && glide.is_none() {
            return Err(fail(rest));
        }
        let (vowel, rest) = match scan(
            PhonemeClass::Vowel,
            rest,
            MatchContext::default(),
            &mut counter,
        ) {
            Some((rule, rest)) => {
                graphemes.vowel = Some(rule.written_form.clone());
                (Some(rule.phoneme), rest)
            }
            None => (None, rest),
        };
        (glide, vowel, rest)
    };
    if vowel.is_none() {
        return Err(fail(rest));
    }

    let coda = if rest.is_empty() {
        None
    } else {
        let mut found = None;
        let first = rest.chars().next().expect("non-empty");
        for rule in Inventory::builtin().candidates(PhonemeClass::Final, first) {
            counter.comparisons += 1;
            if rule.written_form == rest {
                found = Some(rule);
                break;
            }
        }
        let rule = found.ok_or_else(|| fail(rest))?;
        graphemes.coda = Some(rule.written_form.clone());
        Some(rule.phoneme)
    };

    let syllable = Syllable {
        initial: initial.map(|r| r.phoneme),
        glide,
        vowel,
        coda,
        tone: normalized.tone,
    };
    if !validate(&syllable, false).is_ok() {
        return Err(fail(""));
    }
    Ok(ParseResult {
        syllable,
        consumed: word.to_string(),
        residue: String::new(),
        graphemes,
        counter,
    })
}

/// One syllable per whitespace-separated word, in order.
pub fn tokenize(transcript: &str) -> Result<Vec<Syllable>, TokenizeError> {
    transcript
        .split_whitespace()
        .enumerate()
        .map(|(index, word)| {
            parse_syllable(word)
                .map(|p| p.syllable)
                .map_err(|e| TokenizeError::AtWord {
                    index,
                    source: Box::new(e),
                })
        })
        .collect()
}

const FRONT_NUCLEI: [&str; 4] = ["i", "e", "ɛ", "ie"];

fn is_any(p: Option<Phoneme>, ipas: &[&str]) -> bool {
    p.is_some_and(|p| ipas.contains(&p.ipa()))
}

fn sole_form(p: Phoneme) -> Result<&'static str, RenderError> {
    match Inventory::builtin().written_forms(p).as_slice() {
        [one] => Ok(one),
        _ => Err(RenderError::NoWrittenForm(format!(
            "{} /{}/ without a spelling rule",
            p.class().name(),
            p.ipa()
        ))),
    }
}

/// Spelling of the initial. `None` means the initial is written together
/// with the nucleus (the /z/ + /i/ case, spelled "gi").
fn initial_form(
    s: &Syllable,
    initial: Phoneme,
    vowel: Phoneme,
) -> Result<&'static str, RenderError> {
    let front = s.glide.is_none() && FRONT_NUCLEI.contains(&vowel.ipa());
    Ok(match initial.ipa() {
        "k" if s.glide.is_some() => "q",
        "k" if front => "k",
        "k" => "c",
        "ɤ" if front => "gh",
        "ɤ" => "g",
        "ŋ" if front => "ngh",
        "ŋ" => "ng",
        "z" if s.glide.is_none() && vowel.is("i") => "g",
        "z" if s.glide.is_none() && vowel.is("ie") => {
            return Err(RenderError::NoWrittenForm(
                "initial /z/ before the diphthong /ie/".into(),
            ))
        }
        "z" => "gi",
        _ => sole_form(initial)?,
    })
}

fn glide_form(s: &Syllable, vowel: Phoneme) -> &'static str {
    if s.initial.is_some_and(|i| i.is("k")) {
        return "u";
    }
    if ["a", "ă", "ɛ"].contains(&vowel.ipa()) {
        "o"
    } else {
        "u"
    }
}

fn vowel_form(s: &Syllable, vowel: Phoneme) -> Result<&'static str, RenderError> {
    let glide = s.glide.is_some();
    let closed = s.coda.is_some();
    Ok(match vowel.ipa() {
        "ie" => match (glide, closed) {
            (true, true) => "yê",
            (true, false) => "ya",
            (false, true) if s.initial.is_none() => "yê",
            (false, true) => "iê",
            (false, false) => "ia",
        },
        "uo" if closed => "uô",
        "uo" => "ua",
        "ɯə" if closed => "ươ",
        "ɯə" => "ưa",
        "ă" if is_any(s.coda, &["i̯", "u̯"]) => "a",
        "ă" => "ă",
        "i" if glide => "y",
        "i" if s.initial.is_none() && !closed => "y",
        "i" => "i",
        _ => sole_form(vowel)?,
    })
}

fn coda_form(coda: Phoneme, vowel: Phoneme) -> Result<&'static str, RenderError> {
    Ok(match coda.ipa() {
        "i̯" if ["ă", "ə̆"].contains(&vowel.ipa()) => "y",
        "i̯" => "i",
        "u̯" if ["a", "ɛ"].contains(&vowel.ipa()) => "o",
        "u̯" => "u",
        _ => sole_form(coda)?,
    })
}

/// Index (in chars) of the nucleus letter that carries the tone mark.
fn tone_position(nucleus: &str) -> usize {
    nucleus
        .chars()
        .enumerate()
        .filter(|(_, c)| "êôơăâư".contains(*c))
        .last()
        .map_or(0, |(i, _)| i)
}

/// Writes a syllable in standard orthography, canonically composed.
pub fn render_syllable(s: &Syllable) -> Result<String, RenderError> {
    let verdict = validate(s, false);
    if !verdict.is_ok() {
        return Err(RenderError::Invalid(verdict));
    }
    let vowel = s.vowel.expect("validated");

    let mut out = String::new();
    if let Some(initial) = s.initial {
        out.push_str(initial_form(s, initial, vowel)?);
    }
    if s.glide.is_some() {
        out.push_str(glide_form(s, vowel));
    }
    let nucleus = vowel_form(s, vowel)?;
    let mark_at = tone_position(nucleus);
    for (i, c) in nucleus.chars().enumerate() {
        out.push(c);
        if i == mark_at {
            if let Some(mark) = s.tone.mark() {
                out.push(mark);
            }
        }
    }
    if let Some(coda) = s.coda {
        out.push_str(coda_form(coda, vowel)?);
    }
    Ok(out.nfc().collect())
}

/// Space-joined rendering of a syllable sequence.
pub fn detokenize(seq: &[Syllable]) -> Result<String, RenderError> {
    let words = seq
        .iter()
        .enumerate()
        .map(|(index, s)| {
            render_syllable(s).map_err(|e| RenderError::AtSyllable {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(words.join(" "))
}

/// One utterance in the interchange format: syllables separated by single
/// spaces, each as `initial|glide|vowel|final|Tone`.
pub struct PhonemeLine<'a>(pub &'a [Syllable]);

impl fmt::Display for PhonemeLine<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

pub fn parse_phoneme_line(
    line: &str,
) -> Result<Vec<Syllable>, (usize, crate::phonology::SyllableError)> {
    line.split_whitespace()
        .enumerate()
        .map(|(i, field)| field.parse().map_err(|e| (i, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ph(class: PhonemeClass, ipa: &str) -> Phoneme {
        Phoneme::from_ipa(class, ipa).unwrap()
    }

    #[test]
    fn strip_tone_examples() {
        let w = strip_tone("kiệm").unwrap();
        assert_eq!(w.base_letters, "kiêm");
        assert_eq!(w.tone, Tone::MidGlottalizedRaising);
        let w = strip_tone("ba").unwrap();
        assert_eq!((w.base_letters.as_str(), w.tone), ("ba", Tone::Flat));
        let w = strip_tone("hoàng").unwrap();
        assert_eq!(
            (w.base_letters.as_str(), w.tone),
            ("hoang", Tone::LowFalling)
        );
    }

    #[test]
    fn strip_tone_decomposed_input() {
        // e + circumflex + dot below, and dot below before circumflex
        for raw in ["kie\u{302}\u{323}m", "kie\u{323}\u{302}m"] {
            let w = strip_tone(raw).unwrap();
            assert_eq!(w.base_letters, "kiêm");
            assert_eq!(w.tone, Tone::MidGlottalizedRaising);
        }
    }

    #[test]
    fn strip_tone_rejects_two_marks() {
        assert!(matches!(
            strip_tone("hòá"),
            Err(TokenizeError::MultipleToneMarks { .. })
        ));
    }

    #[test]
    fn match_component_examples() {
        let (p, rest) = match_component("nghiêm", PhonemeClass::Initial);
        assert_eq!(p, Some(ph(PhonemeClass::Initial, "ŋ")));
        assert_eq!(rest, "iêm");
        assert_eq!(match_component("a", PhonemeClass::Initial), (None, "a"));
        let (p, rest) = match_component("uyên", PhonemeClass::Glide);
        assert_eq!(p, Some(ph(PhonemeClass::Glide, "u̯")));
        assert_eq!(rest, "yên");
        // "u" before "a" is the diphthong, not a glide, unless after "q"
        assert_eq!(match_component("ua", PhonemeClass::Glide), (None, "ua"));
    }

    #[test]
    fn parse_hoang() {
        let p = parse_syllable("hoàng").unwrap();
        assert_eq!(p.syllable.to_string(), "h|u̯|a|ŋ|LowFalling");
        assert_eq!(p.graphemes.glide.as_deref(), Some("o"));
        assert!(p.residue.is_empty());
    }

    #[test]
    fn parse_may_reads_short_a() {
        let p = parse_syllable("máy").unwrap();
        assert_eq!(p.syllable.to_string(), "m|∅|ă|i̯|MidRaising");
        assert_eq!(p.graphemes.vowel.as_deref(), Some("a"));
        assert_eq!(p.graphemes.coda.as_deref(), Some("y"));
    }

    #[test]
    fn parse_gi_shares_its_i() {
        assert_eq!(
            parse_syllable("gì").unwrap().syllable.to_string(),
            "z|∅|i|∅|LowFalling"
        );
        assert_eq!(
            parse_syllable("gìn").unwrap().syllable.to_string(),
            "z|∅|i|n|LowFalling"
        );
        assert_eq!(
            parse_syllable("giữ").unwrap().syllable.to_string(),
            "z|∅|ɯ|∅|MidGlottalizedFalling"
        );
        assert_eq!(
            parse_syllable("giếng").unwrap().syllable.to_string(),
            "z|∅|e|ŋ|MidRaising"
        );
    }

    #[test]
    fn parse_qu_is_k_plus_glide() {
        assert_eq!(
            parse_syllable("quê").unwrap().syllable.to_string(),
            "k|u̯|e|∅|Flat"
        );
        assert_eq!(
            parse_syllable("quốc").unwrap().syllable.to_string(),
            "k|u̯|o|k|MidRaising"
        );
        assert!(parse_syllable("qa").is_err());
    }

    #[test]
    fn parse_failures() {
        for w in ["xyz", "hello", "b", "", "bàà"] {
            assert!(parse_syllable(w).is_err(), "{w}");
        }
        match parse_syllable("xyz") {
            Err(TokenizeError::ParseFailure { residue, .. }) => assert_eq!(residue, "z"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("ba mẹ").unwrap().len(), 2);
        assert!(tokenize("").unwrap().is_empty());
        let s = tokenize("kiến thức").unwrap();
        assert_eq!(s[0].to_string(), "k|∅|ie|n|MidRaising");
        assert_eq!(s[1].to_string(), "tʰ|∅|ɯ|k|MidRaising");
        match tokenize("ba xyz mẹ") {
            Err(TokenizeError::AtWord { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn render_examples() {
        let que = Syllable::from_ipa(Some("k"), Some("u̯"), "e", None, Tone::Flat).unwrap();
        assert_eq!(render_syllable(&que).unwrap(), "quê");
        let khuya = Syllable::from_ipa(Some("x"), Some("u̯"), "ie", None, Tone::Flat).unwrap();
        assert_eq!(render_syllable(&khuya).unwrap(), "khuya");
        let hoa = Syllable::from_ipa(Some("h"), Some("u̯"), "a", None, Tone::LowFalling).unwrap();
        assert_eq!(render_syllable(&hoa).unwrap(), "hoà");
        let quy = Syllable::from_ipa(Some("k"), Some("u̯"), "i", None, Tone::MidRaising).unwrap();
        assert_eq!(render_syllable(&quy).unwrap(), "quý");
    }

    #[test]
    fn render_rejects_invalid_and_unspellable() {
        let a = ph(PhonemeClass::Vowel, "a");
        let mut s = Syllable::new(None, None, a, None, Tone::Flat).unwrap();
        s.vowel = None;
        assert!(matches!(render_syllable(&s), Err(RenderError::Invalid(_))));
        let zie = Syllable::from_ipa(Some("z"), None, "ie", None, Tone::Flat).unwrap();
        assert!(matches!(
            render_syllable(&zie),
            Err(RenderError::NoWrittenForm(_))
        ));
    }

    #[test]
    fn round_trips() {
        for w in [
            "chuyện", "giếng", "nước", "khuya", "quý", "gì", "yêu", "uyển", "xoong", "ngoèo",
            "khuỵu", "ươn", "ỉa", "oà", "thuở", "huơ", "au", "giặc",
        ] {
            let s = parse_syllable(w).unwrap().syllable;
            assert_eq!(render_syllable(&s).unwrap(), w);
        }
        assert_eq!(
            detokenize(&tokenize("giếng nước").unwrap()).unwrap(),
            "giếng nước"
        );
        assert_eq!(detokenize(&[]).unwrap(), "");
    }

    #[test]
    fn phoneme_line_format() {
        let seq = tokenize("hoàng gia").unwrap();
        let line = PhonemeLine(&seq).to_string();
        assert_eq!(line, "h|u̯|a|ŋ|LowFalling z|∅|a|∅|Flat");
        assert_eq!(parse_phoneme_line(&line).unwrap(), seq);
        assert_eq!(parse_phoneme_line("b|∅|a|∅|Flat nope").unwrap_err().0, 1);
    }
}
