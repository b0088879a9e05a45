//! Phoneme inventories, grapheme rules and the five-slot syllable model.
//!
//! The rule table ships as `data/rules.tsv` and is parsed once on first use.
//! Every other module reads phonemes and written forms through [`Inventory`].

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// The embedded rule table, exactly as shipped.
pub const RULES_TSV: &str = include_str!("../data/rules.tsv");

/// Marker for an absent component in textual output.
pub const EMPTY: &str = "∅";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tone {
    Flat,
    LowFalling,
    MidRaising,
    MidFalling,
    MidGlottalizedFalling,
    MidGlottalizedRaising,
}

impl Tone {
    pub const ALL: [Tone; 6] = [
        Tone::Flat,
        Tone::LowFalling,
        Tone::MidRaising,
        Tone::MidFalling,
        Tone::MidGlottalizedFalling,
        Tone::MidGlottalizedRaising,
    ];

    /// Combining diacritic that writes this tone; `None` for the flat tone.
    pub fn mark(self) -> Option<char> {
        match self {
            Tone::Flat => None,
            Tone::LowFalling => Some('\u{0300}'),
            Tone::MidRaising => Some('\u{0301}'),
            Tone::MidFalling => Some('\u{0309}'),
            Tone::MidGlottalizedFalling => Some('\u{0303}'),
            Tone::MidGlottalizedRaising => Some('\u{0323}'),
        }
    }

    pub fn from_mark(c: char) -> Option<Tone> {
        match c {
            '\u{0300}' => Some(Tone::LowFalling),
            '\u{0301}' => Some(Tone::MidRaising),
            '\u{0309}' => Some(Tone::MidFalling),
            '\u{0303}' => Some(Tone::MidGlottalizedFalling),
            '\u{0323}' => Some(Tone::MidGlottalizedRaising),
            _ => None,
        }
    }

    /// Pitch contour as given by the tone legend. The flat tone has none
    /// listed there; 33 is the conventional value.
    pub fn contour(self) -> &'static str {
        match self {
            Tone::Flat => "33",
            Tone::LowFalling => "22 11",
            Tone::MidRaising => "33 55",
            Tone::MidFalling => "33 11",
            Tone::MidGlottalizedFalling => "33ʔ55",
            Tone::MidGlottalizedRaising => "33ʔ11",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Tone::Flat => "Flat",
            Tone::LowFalling => "LowFalling",
            Tone::MidRaising => "MidRaising",
            Tone::MidFalling => "MidFalling",
            Tone::MidGlottalizedFalling => "MidGlottalizedFalling",
            Tone::MidGlottalizedRaising => "MidGlottalizedRaising",
        }
    }

    /// Tones allowed on syllables closed by /p t k c/.
    pub fn allowed_before_stop(self) -> bool {
        matches!(self, Tone::MidRaising | Tone::MidGlottalizedRaising)
    }
}

impl fmt::Display for Tone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tone {
    type Err = SyllableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Tone::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| SyllableError::UnknownTone(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhonemeClass {
    Initial,
    Glide,
    Vowel,
    Final,
}

impl PhonemeClass {
    pub const ALL: [PhonemeClass; 4] = [
        PhonemeClass::Initial,
        PhonemeClass::Glide,
        PhonemeClass::Vowel,
        PhonemeClass::Final,
    ];

    fn slot(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PhonemeClass::Initial => "initial",
            PhonemeClass::Glide => "glide",
            PhonemeClass::Vowel => "vowel",
            PhonemeClass::Final => "final",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VowelKind {
    Monophthong,
    Diphthong,
}

/// Read-side predicate attached to a rule. Rules without one match on the
/// written prefix alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleContext {
    None,
    /// "u" is a glide after "q", or before y, ê, â, ơ.
    GlideU,
    /// "o" is a glide before a, ă, e.
    GlideO,
    /// "a" reads as /ă/ when the rest of the word is the final "y" or "u".
    BeforeYU,
}

impl RuleContext {
    pub fn tag(self) -> &'static str {
        match self {
            RuleContext::None => "-",
            RuleContext::GlideU => "glide_u",
            RuleContext::GlideO => "glide_o",
            RuleContext::BeforeYU => "before_y_u",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        [
            RuleContext::None,
            RuleContext::GlideU,
            RuleContext::GlideO,
            RuleContext::BeforeYU,
        ]
        .into_iter()
        .find(|c| c.tag() == tag)
    }
}

/// A phoneme, identified by its class and its index in that class's inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phoneme {
    class: PhonemeClass,
    index: u8,
}

impl Phoneme {
    pub fn class(self) -> PhonemeClass {
        self.class
    }

    pub fn index(self) -> usize {
        self.index as usize
    }

    pub fn ipa(self) -> &'static str {
        &Inventory::builtin().phonemes(self.class)[self.index()].ipa
    }

    /// Shorthand used by the orthographic rules.
    pub fn is(self, ipa: &str) -> bool {
        self.ipa() == ipa
    }

    /// Looks up a phoneme of the built-in inventory by IPA symbol.
    pub fn from_ipa(class: PhonemeClass, ipa: &str) -> Option<Phoneme> {
        Inventory::builtin().phoneme(class, ipa)
    }
}

impl fmt::Display for Phoneme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.ipa())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeInfo {
    pub ipa: String,
    pub kind: Option<VowelKind>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphemeRule {
    pub written_form: String,
    pub ipa: String,
    pub class: PhonemeClass,
    pub vowel_kind: Option<VowelKind>,
    pub context: RuleContext,
    /// Length of the written form in letters; longer forms are tried first.
    pub match_priority: usize,
    pub note: Option<String>,
    pub phoneme: Phoneme,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("rule table line {line}: {message}")]
pub struct RuleTableError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Inventory {
    phonemes: [Vec<PhonemeInfo>; 4],
    rules: [Vec<GraphemeRule>; 4],
    /// Per class, rule indices keyed by the first letter of the written form.
    by_first_letter: [HashMap<char, Vec<usize>>; 4],
    /// Rules in file order, for dumping.
    file_order: Vec<GraphemeRule>,
}

impl Inventory {
    /// The inventory parsed from the embedded rule table.
    pub fn builtin() -> &'static Inventory {
        static BUILTIN: OnceLock<Inventory> = OnceLock::new();
        BUILTIN.get_or_init(|| Inventory::parse(RULES_TSV).expect("embedded rule table is valid"))
    }

    pub fn parse(text: &str) -> Result<Inventory, RuleTableError> {
        let mut phonemes: [Vec<PhonemeInfo>; 4] = Default::default();
        let mut file_order = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let err = |message: String| RuleTableError { line, message };
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').collect();
            if cols.len() < 4 || cols.len() > 5 {
                return Err(err(format!(
                    "expected 4 or 5 columns, found {}",
                    cols.len()
                )));
            }
            let (class, vowel_kind) = match cols[0] {
                "initial" => (PhonemeClass::Initial, None),
                "glide" => (PhonemeClass::Glide, None),
                "monophthong" => (PhonemeClass::Vowel, Some(VowelKind::Monophthong)),
                "diphthong" => (PhonemeClass::Vowel, Some(VowelKind::Diphthong)),
                "final" => (PhonemeClass::Final, None),
                other => return Err(err(format!("unknown class {other:?}"))),
            };
            let written = cols[1];
            if written.is_empty() || written.nfd().any(|c| Tone::from_mark(c).is_some()) {
                return Err(err(format!("bad written form {written:?}")));
            }
            let ipa = cols[2];
            if ipa.is_empty() {
                return Err(err("empty IPA symbol".into()));
            }
            let context = RuleContext::from_tag(cols[3])
                .ok_or_else(|| err(format!("unknown context {:?}", cols[3])))?;
            let note = cols
                .get(4)
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty());

            let table = &mut phonemes[class.slot()];
            let index = match table.iter().position(|p| p.ipa == ipa) {
                Some(i) => {
                    if table[i].kind != vowel_kind {
                        return Err(err(format!(
                            "{ipa} listed as both monophthong and diphthong"
                        )));
                    }
                    i
                }
                None => {
                    table.push(PhonemeInfo {
                        ipa: ipa.to_string(),
                        kind: vowel_kind,
                    });
                    table.len() - 1
                }
            };
            let rule = GraphemeRule {
                written_form: written.to_string(),
                ipa: ipa.to_string(),
                class,
                vowel_kind,
                context,
                match_priority: written.chars().count(),
                note,
                phoneme: Phoneme {
                    class,
                    index: u8::try_from(index).map_err(|_| err("too many phonemes".into()))?,
                },
            };
            if file_order.iter().any(|r: &GraphemeRule| {
                r.class == class && r.written_form == rule.written_form && r.context == context
            }) {
                return Err(err(format!(
                    "duplicate rule {written:?} in class {}",
                    class.name()
                )));
            }
            file_order.push(rule);
        }

        let mut rules: [Vec<GraphemeRule>; 4] = Default::default();
        let mut by_first_letter: [HashMap<char, Vec<usize>>; 4] = Default::default();
        for class in PhonemeClass::ALL {
            let mut list: Vec<GraphemeRule> = file_order
                .iter()
                .filter(|r| r.class == class)
                .cloned()
                .collect();
            // longest first; among equal lengths a contextual rule is tried
            // before the unconditional one
            list.sort_by_key(|r| {
                (
                    std::cmp::Reverse(r.match_priority),
                    r.context == RuleContext::None,
                )
            });
            for (i, r) in list.iter().enumerate() {
                let first = r.written_form.chars().next().expect("non-empty form");
                by_first_letter[class.slot()]
                    .entry(first)
                    .or_default()
                    .push(i);
            }
            rules[class.slot()] = list;
        }
        Ok(Inventory {
            phonemes,
            rules,
            by_first_letter,
            file_order,
        })
    }

    /// Rules of one class in matching order.
    pub fn rules(&self, class: PhonemeClass) -> &[GraphemeRule] {
        &self.rules[class.slot()]
    }

    /// Rules of one class whose written form starts with `first`, in
    /// matching order.
    pub fn candidates(
        &self,
        class: PhonemeClass,
        first: char,
    ) -> impl Iterator<Item = &GraphemeRule> + '_ {
        let rules = self.rules(class);
        self.by_first_letter[class.slot()]
            .get(&first)
            .into_iter()
            .flatten()
            .map(move |&i| &rules[i])
    }

    pub fn phonemes(&self, class: PhonemeClass) -> &[PhonemeInfo] {
        &self.phonemes[class.slot()]
    }

    pub fn phoneme(&self, class: PhonemeClass, ipa: &str) -> Option<Phoneme> {
        self.phonemes(class)
            .iter()
            .position(|p| p.ipa == ipa)
            .map(|i| Phoneme {
                class,
                index: i as u8,
            })
    }

    /// Distinct written forms of one phoneme, in matching order.
    pub fn written_forms(&self, phoneme: Phoneme) -> Vec<&str> {
        let mut forms: Vec<&str> = Vec::new();
        for rule in self.rules(phoneme.class) {
            if rule.phoneme == phoneme && !forms.contains(&rule.written_form.as_str()) {
                forms.push(&rule.written_form);
            }
        }
        forms
    }

    /// Re-serializes the table in the shipped format.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# class\twritten_form\tipa\tcontext\tnote\n");
        for r in &self.file_order {
            let class = match (r.class, r.vowel_kind) {
                (PhonemeClass::Vowel, Some(VowelKind::Diphthong)) => "diphthong",
                (PhonemeClass::Vowel, _) => "monophthong",
                (c, _) => c.name(),
            };
            out.push_str(&format!(
                "{class}\t{}\t{}\t{}\t{}\n",
                r.written_form,
                r.ipa,
                r.context.tag(),
                r.note.as_deref().unwrap_or("")
            ));
        }
        out
    }
}

/// The rule table of one class, longest written form first.
pub fn inventory(class: PhonemeClass) -> &'static [GraphemeRule] {
    Inventory::builtin().rules(class)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SyllableError {
    #[error("missing nucleus")]
    MissingNucleus,
    #[error("{slot} slot holds a {found} phoneme")]
    WrongClass {
        slot: &'static str,
        found: &'static str,
    },
    #[error("unknown {class} phoneme {ipa:?}")]
    UnknownPhoneme { class: &'static str, ipa: String },
    #[error("unknown tone {0:?}")]
    UnknownTone(String),
    #[error("expected 5 '|'-separated fields, found {0}")]
    FieldCount(usize),
}

/// One word as initial, glide, vowel, final and tone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Syllable {
    pub initial: Option<Phoneme>,
    pub glide: Option<Phoneme>,
    /// Always present in a well-formed syllable; `None` only in hand-built
    /// values that [`validate`] rejects.
    pub vowel: Option<Phoneme>,
    /// Final consonant or semivowel.
    pub coda: Option<Phoneme>,
    pub tone: Tone,
}

impl Syllable {
    pub fn new(
        initial: Option<Phoneme>,
        glide: Option<Phoneme>,
        vowel: Phoneme,
        coda: Option<Phoneme>,
        tone: Tone,
    ) -> Result<Syllable, SyllableError> {
        let s = Syllable {
            initial,
            glide,
            vowel: Some(vowel),
            coda,
            tone,
        };
        s.check_classes()?;
        Ok(s)
    }

    /// Builds a syllable from IPA symbols of the built-in inventory.
    pub fn from_ipa(
        initial: Option<&str>,
        glide: Option<&str>,
        vowel: &str,
        coda: Option<&str>,
        tone: Tone,
    ) -> Result<Syllable, SyllableError> {
        let look = |class: PhonemeClass, ipa: &str| {
            Phoneme::from_ipa(class, ipa).ok_or_else(|| SyllableError::UnknownPhoneme {
                class: class.name(),
                ipa: ipa.to_string(),
            })
        };
        Syllable::new(
            initial
                .map(|i| look(PhonemeClass::Initial, i))
                .transpose()?,
            glide.map(|g| look(PhonemeClass::Glide, g)).transpose()?,
            look(PhonemeClass::Vowel, vowel)?,
            coda.map(|c| look(PhonemeClass::Final, c)).transpose()?,
            tone,
        )
    }

    fn slots(&self) -> [(&'static str, PhonemeClass, Option<Phoneme>); 4] {
        [
            ("initial", PhonemeClass::Initial, self.initial),
            ("glide", PhonemeClass::Glide, self.glide),
            ("vowel", PhonemeClass::Vowel, self.vowel),
            ("final", PhonemeClass::Final, self.coda),
        ]
    }

    fn check_classes(&self) -> Result<(), SyllableError> {
        for (slot, class, p) in self.slots() {
            if let Some(p) = p {
                if p.class != class {
                    return Err(SyllableError::WrongClass {
                        slot,
                        found: p.class.name(),
                    });
                }
            }
        }
        if self.vowel.is_none() {
            return Err(SyllableError::MissingNucleus);
        }
        Ok(())
    }

    /// The rhyme as "glide|vowel|final" with ∅ for absent parts.
    pub fn rhyme_key(&self) -> String {
        format!(
            "{}|{}|{}",
            opt_ipa(self.glide),
            opt_ipa(self.vowel),
            opt_ipa(self.coda)
        )
    }
}

fn opt_ipa(p: Option<Phoneme>) -> &'static str {
    p.map_or(EMPTY, Phoneme::ipa)
}

/// `initial|glide|vowel|final|Tone`, with ∅ for absent components.
impl fmt::Display for Syllable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}|{}|{}|{}|{}",
            opt_ipa(self.initial),
            opt_ipa(self.glide),
            opt_ipa(self.vowel),
            opt_ipa(self.coda),
            self.tone
        )
    }
}

impl FromStr for Syllable {
    type Err = SyllableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fields: Vec<&str> = s.split('|').collect();
        if fields.len() != 5 {
            return Err(SyllableError::FieldCount(fields.len()));
        }
        fn opt(f: &str) -> Option<&str> {
            (f != EMPTY).then_some(f)
        }
        let vowel = opt(fields[2]).ok_or(SyllableError::MissingNucleus)?;
        Syllable::from_ipa(
            opt(fields[0]),
            opt(fields[1]),
            vowel,
            opt(fields[3]),
            fields[4].parse()?,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MissingNucleus,
    WrongClass {
        slot: &'static str,
        found: &'static str,
    },
    /// A syllable closed by /p t k c/ carrying a tone other than the two
    /// raising ones. Checked only in strict mode.
    StopFinalTone(Tone),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingNucleus => f.write_str("missing nucleus"),
            Violation::WrongClass { slot, found } => {
                write!(f, "wrong class: {slot} slot holds a {found} phoneme")
            }
            Violation::StopFinalTone(t) => write!(f, "stop-final tone: {t}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Verdict {
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

const STOP_FINALS: [&str; 4] = ["p", "t", "k", "c"];

/// Checks the structural rules of a syllable. `strict` adds the
/// stop-final tone constraint.
pub fn validate(syllable: &Syllable, strict: bool) -> Verdict {
    let mut violations = Vec::new();
    for (slot, class, p) in syllable.slots() {
        if let Some(p) = p {
            if p.class != class {
                violations.push(Violation::WrongClass {
                    slot,
                    found: p.class.name(),
                });
            }
        }
    }
    if syllable.vowel.is_none() {
        violations.push(Violation::MissingNucleus);
    }
    if strict {
        if let Some(coda) = syllable.coda {
            if coda.class == PhonemeClass::Final
                && STOP_FINALS.contains(&coda.ipa())
                && !syllable.tone.allowed_before_stop()
            {
                violations.push(Violation::StopFinalTone(syllable.tone));
            }
        }
    }
    Verdict { violations }
}
