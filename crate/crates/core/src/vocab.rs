//! Token spaces for the three syllable components and the id-triple codec.
//!
//! Each space starts with the control tokens `<pad>`, `<bos>`, `<eos>`
//! followed by its content tokens in byte order of their strings, so two
//! builds from the same lexicon agree on every id.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::phonology::{Inventory, Phoneme, PhonemeClass, Syllable, Tone, EMPTY};
use crate::tokenizer::{parse_syllable, TokenizeError};

pub const CONTROL_TOKENS: [&str; 3] = ["<pad>", "<bos>", "<eos>"];
pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;

/// Component counts stated for the reference vocabulary.
pub const REFERENCE_INITIALS: usize = 22;
pub const REFERENCE_RHYMES: usize = 145;
pub const REFERENCE_TONES: usize = 6;
pub const REFERENCE_TOTAL: usize = 163;

/// Written rhymes of standard orthography, parsed as zero-initial words.
/// Together with the lexicon they make up the rhyme space.
pub const STANDARD_RHYMES: &[&str] = &[
    "a", "ac", "ach", "ai", "am", "an", "ang", "anh", "ao", "ap", "at", "au", "ay", "ăc", "ăm",
    "ăn", "ăng", "ăp", "ăt", "âc", "âm", "ân", "âng", "âp", "ât", "âu", "ây", "e", "ec", "em",
    "en", "eng", "eo", "ep", "et", "ê", "êch", "êm", "ên", "ênh", "êp", "êt", "êu", "i", "ich",
    "im", "in", "inh", "ip", "it", "iu", "ia", "iếc", "iêm", "iên", "iêng", "iếp", "iết", "iêu",
    "o", "oc", "oi", "om", "on", "ong", "op", "ot", "ooc", "oong", "ô", "ôc", "ôi", "ôm", "ôn",
    "ông", "ôp", "ôt", "ơ", "ơi", "ơm", "ơn", "ơp", "ơt", "u", "uc", "ui", "um", "un", "ung", "up",
    "ut", "ua", "uôc", "uôi", "uôm", "uôn", "uông", "uôt", "ư", "ưc", "ưi", "ưm", "ưn", "ưng",
    "ưt", "ưu", "ưa", "ươc", "ươi", "ươm", "ươn", "ương", "ươp", "ươt", "ươu", "oa", "oac", "oach",
    "oai", "oam", "oan", "oang", "oanh", "oao", "oap", "oat", "oay", "oăc", "oăm", "oăn", "oăng",
    "oăt", "oe", "oen", "oeo", "oet", "uê", "uêch", "uênh", "uy", "uych", "uynh", "uyt", "uyu",
    "uya", "uyên", "uyêt", "uân", "uâng", "uât", "uây", "uơ",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VocabError {
    #[error("{space} token {token:?} is not in the vocabulary")]
    UnknownComponent { space: Space, token: String },
    #[error("{space} id {id} out of range (size {size})")]
    IdOutOfRange { space: Space, id: u32, size: usize },
    #[error("{space} id {id} is the control token {token}")]
    ControlToken {
        space: Space,
        id: u32,
        token: &'static str,
    },
    #[error("malformed {space} token {token:?}")]
    MalformedToken { space: Space, token: String },
    #[error("vocabulary table line {line}: {message}")]
    Table { line: usize, message: String },
    #[error(transparent)]
    Parse(#[from] TokenizeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Initial,
    Rhyme,
    Tone,
}

impl Space {
    pub const ALL: [Space; 3] = [Space::Initial, Space::Rhyme, Space::Tone];

    pub fn name(self) -> &'static str {
        match self {
            Space::Initial => "initial",
            Space::Rhyme => "rhyme",
            Space::Tone => "tone",
        }
    }

    fn from_name(s: &str) -> Option<Space> {
        Space::ALL.into_iter().find(|sp| sp.name() == s)
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One id space: control tokens, then sorted content tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSpace {
    space: Space,
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl TokenSpace {
    fn new(space: Space, content: impl IntoIterator<Item = String>) -> TokenSpace {
        let sorted: BTreeSet<String> = content.into_iter().collect();
        let tokens: Vec<String> = CONTROL_TOKENS
            .iter()
            .map(|t| t.to_string())
            .chain(sorted)
            .collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        TokenSpace {
            space,
            tokens,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn content_len(&self) -> usize {
        self.tokens.len() - CONTROL_TOKENS.len()
    }

    /// Content tokens in id order.
    pub fn content(&self) -> &[String] {
        &self.tokens[CONTROL_TOKENS.len()..]
    }

    pub fn id(&self, token: &str) -> Result<u32, VocabError> {
        self.index
            .get(token)
            .copied()
            .ok_or_else(|| VocabError::UnknownComponent {
                space: self.space,
                token: token.to_string(),
            })
    }

    /// The content token for `id`; control ids are an error.
    pub fn token(&self, id: u32) -> Result<&str, VocabError> {
        let tok = self
            .tokens
            .get(id as usize)
            .ok_or(VocabError::IdOutOfRange {
                space: self.space,
                id,
                size: self.tokens.len(),
            })?;
        if (id as usize) < CONTROL_TOKENS.len() {
            return Err(VocabError::ControlToken {
                space: self.space,
                id,
                token: CONTROL_TOKENS[id as usize],
            });
        }
        Ok(tok)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub initials: TokenSpace,
    pub rhymes: TokenSpace,
    pub tones: TokenSpace,
}

/// Ids of one syllable, one per space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SyllableIds {
    pub initial: u32,
    pub rhyme: u32,
    pub tone: u32,
}

impl From<(u32, u32, u32)> for SyllableIds {
    fn from((initial, rhyme, tone): (u32, u32, u32)) -> Self {
        SyllableIds {
            initial,
            rhyme,
            tone,
        }
    }
}

/// Splits "glide|vowel|final" back into phonemes.
pub fn decompose_rhyme(
    token: &str,
) -> Result<(Option<Phoneme>, Phoneme, Option<Phoneme>), VocabError> {
    let bad = || VocabError::MalformedToken {
        space: Space::Rhyme,
        token: token.to_string(),
    };
    let parts: Vec<&str> = token.split('|').collect();
    let [glide, vowel, coda] = parts[..] else {
        return Err(bad());
    };
    let look = |class, ipa: &str| -> Result<Option<Phoneme>, VocabError> {
        if ipa == EMPTY {
            Ok(None)
        } else {
            Phoneme::from_ipa(class, ipa).map(Some).ok_or_else(bad)
        }
    };
    Ok((
        look(PhonemeClass::Glide, glide)?,
        look(PhonemeClass::Vowel, vowel)?.ok_or_else(bad)?,
        look(PhonemeClass::Final, coda)?,
    ))
}

pub fn compose_rhyme(glide: Option<Phoneme>, vowel: Phoneme, coda: Option<Phoneme>) -> String {
    let ipa = |p: Option<Phoneme>| p.map_or(EMPTY, Phoneme::ipa);
    format!("{}|{}|{}", ipa(glide), vowel.ipa(), ipa(coda))
}

fn initial_token(p: Option<Phoneme>) -> &'static str {
    p.map_or(EMPTY, Phoneme::ipa)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VocabReport {
    pub initial_content: usize,
    pub initial_with_empty: usize,
    pub rhymes_in_lexicon: usize,
    pub rhymes_in_standard_table: usize,
    pub rhymes: usize,
    pub tones: usize,
    pub content_total: usize,
    pub control_tokens_per_space: usize,
    pub reference_initials: usize,
    pub reference_rhymes: usize,
    pub reference_tones: usize,
    pub reference_component_sum: usize,
    pub reference_stated_total: usize,
    pub notes: Vec<String>,
}

/// Builds the vocabulary from a word list and reports its sizes next to
/// the reference figures.
pub fn build_vocab<'a>(
    lexicon: impl IntoIterator<Item = &'a str>,
) -> Result<(Vocabulary, VocabReport), VocabError> {
    let mut lexicon_rhymes = BTreeSet::new();
    for word in lexicon {
        lexicon_rhymes.insert(parse_syllable(word)?.syllable.rhyme_key());
    }
    let mut table_rhymes = BTreeSet::new();
    for written in STANDARD_RHYMES {
        table_rhymes.insert(parse_syllable(written)?.syllable.rhyme_key());
    }
    let rhymes: BTreeSet<String> = lexicon_rhymes.union(&table_rhymes).cloned().collect();

    let initials = Inventory::builtin()
        .phonemes(PhonemeClass::Initial)
        .iter()
        .map(|p| p.ipa.clone())
        .chain([EMPTY.to_string()]);
    let vocab = Vocabulary {
        initials: TokenSpace::new(Space::Initial, initials),
        rhymes: TokenSpace::new(Space::Rhyme, rhymes.iter().cloned()),
        tones: TokenSpace::new(Space::Tone, Tone::ALL.iter().map(|t| t.name().to_string())),
    };

    let initial_content = vocab.initials.content_len() - 1;
    let content_total = initial_content + vocab.rhymes.content_len() + vocab.tones.content_len();
    let reference_component_sum = REFERENCE_INITIALS + REFERENCE_RHYMES + REFERENCE_TONES;
    let mut notes = vec![
        format!(
            "the empty initial {EMPTY} is an extra initial token so zero-initial syllables are representable"
        ),
        format!(
            "reference component counts sum to {reference_component_sum}, not the stated total {REFERENCE_TOTAL}"
        ),
    ];
    if vocab.rhymes.content_len() != REFERENCE_RHYMES {
        notes.push(format!(
            "{} rhymes here vs {REFERENCE_RHYMES} in the reference; the rhyme inventory depends on the word list used",
            vocab.rhymes.content_len()
        ));
    }
    let report = VocabReport {
        initial_content,
        initial_with_empty: vocab.initials.content_len(),
        rhymes_in_lexicon: lexicon_rhymes.len(),
        rhymes_in_standard_table: table_rhymes.len(),
        rhymes: vocab.rhymes.content_len(),
        tones: vocab.tones.content_len(),
        content_total,
        control_tokens_per_space: CONTROL_TOKENS.len(),
        reference_initials: REFERENCE_INITIALS,
        reference_rhymes: REFERENCE_RHYMES,
        reference_tones: REFERENCE_TONES,
        reference_component_sum,
        reference_stated_total: REFERENCE_TOTAL,
        notes,
    };
    Ok((vocab, report))
}

pub fn encode(s: &Syllable, vocab: &Vocabulary) -> Result<SyllableIds, VocabError> {
    let vowel = s.vowel.ok_or_else(|| VocabError::MalformedToken {
        space: Space::Rhyme,
        token: s.rhyme_key(),
    })?;
    Ok(SyllableIds {
        initial: vocab.initials.id(initial_token(s.initial))?,
        rhyme: vocab.rhymes.id(&compose_rhyme(s.glide, vowel, s.coda))?,
        tone: vocab.tones.id(s.tone.name())?,
    })
}

pub fn decode(ids: SyllableIds, vocab: &Vocabulary) -> Result<Syllable, VocabError> {
    let initial = match vocab.initials.token(ids.initial)? {
        t if t == EMPTY => None,
        t => Some(Phoneme::from_ipa(PhonemeClass::Initial, t).ok_or_else(|| {
            VocabError::MalformedToken {
                space: Space::Initial,
                token: t.to_string(),
            }
        })?),
    };
    let (glide, vowel, coda) = decompose_rhyme(vocab.rhymes.token(ids.rhyme)?)?;
    let tone_name = vocab.tones.token(ids.tone)?;
    let tone: Tone = tone_name.parse().map_err(|_| VocabError::MalformedToken {
        space: Space::Tone,
        token: tone_name.to_string(),
    })?;
    Ok(Syllable {
        initial,
        glide,
        vowel: Some(vowel),
        coda,
        tone,
    })
}

impl Vocabulary {
    /// `space<TAB>id<TAB>token` per line, control tokens included.
    pub fn to_table(&self) -> String {
        let mut out = String::from("# space\tid\ttoken\n");
        for space in Space::ALL {
            for (id, tok) in self.space(space).tokens.iter().enumerate() {
                out.push_str(&format!("{space}\t{id}\t{tok}\n"));
            }
        }
        out
    }

    pub fn from_table(text: &str) -> Result<Vocabulary, VocabError> {
        let mut content: [Vec<String>; 3] = Default::default();
        for (n, line) in text.lines().enumerate() {
            let err = |message: String| VocabError::Table {
                line: n + 1,
                message,
            };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [space, id, token] = cols[..] else {
                return Err(err(format!("expected 3 columns, found {}", cols.len())));
            };
            let space =
                Space::from_name(space).ok_or_else(|| err(format!("unknown space {space:?}")))?;
            let id: usize = id.parse().map_err(|_| err(format!("bad id {id:?}")))?;
            let list = &mut content[space as usize];
            if id != list.len() {
                return Err(err(format!(
                    "ids must be consecutive; expected {}",
                    list.len()
                )));
            }
            if id < CONTROL_TOKENS.len() && token != CONTROL_TOKENS[id] {
                return Err(err(format!("id {id} must be {}", CONTROL_TOKENS[id])));
            }
            list.push(token.to_string());
        }
        let build = |space: Space, list: &[String]| {
            let ts = TokenSpace::new(space, list.iter().skip(CONTROL_TOKENS.len()).cloned());
            if ts.tokens != list {
                return Err(VocabError::Table {
                    line: 0,
                    message: format!("{space} tokens are not in canonical order"),
                });
            }
            Ok(ts)
        };
        Ok(Vocabulary {
            initials: build(Space::Initial, &content[0])?,
            rhymes: build(Space::Rhyme, &content[1])?,
            tones: build(Space::Tone, &content[2])?,
        })
    }

    pub fn space(&self, space: Space) -> &TokenSpace {
        match space {
            Space::Initial => &self.initials,
            Space::Rhyme => &self.rhymes,
            Space::Tone => &self.tones,
        }
    }
}
