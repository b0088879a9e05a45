//! Transcript manifests: word cleaning, non-Vietnamese detection, filtering
//! and per-split statistics.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::tokenizer::{parse_syllable, render_syllable, strip_tone};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("manifest line {line}: {message}")]
    MalformedManifestLine { line: usize, message: String },
}

/// Lowercase, trim surrounding punctuation, compose.
pub fn clean_word(raw: &str) -> String {
    let lower: String = raw.nfc().flat_map(char::to_lowercase).collect();
    lower
        .trim_matches(|c: char| !c.is_alphanumeric())
        .nfc()
        .collect()
}

/// Cleaned words of a transcript; hyphens separate words.
pub fn split_words(transcript: &str) -> Vec<String> {
    transcript
        .split(|c: char| c.is_whitespace() || c == '-')
        .map(clean_word)
        .filter(|w| !w.is_empty())
        .collect()
}

/// A cleaned word is Vietnamese when it parses and renders back to the
/// same letters and tone. The tone mark may sit on either nucleus letter,
/// so "hòa" and "hoà" both pass.
pub fn is_vietnamese_word(word: &str) -> bool {
    if word.chars().any(|c| c.is_numeric()) {
        return false;
    }
    let Ok(parsed) = parse_syllable(word) else {
        return false;
    };
    let Ok(rendered) = render_syllable(&parsed.syllable) else {
        return false;
    };
    match (strip_tone(word), strip_tone(&rendered)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

/// Words of the transcript that are not Vietnamese, in order.
pub fn offending_words(transcript: &str) -> Vec<String> {
    split_words(transcript)
        .into_iter()
        .filter(|w| !is_vietnamese_word(w))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    #[serde(alias = "valid", alias = "validation")]
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

/// One manifest line. Fields other than id, transcript and split are kept
/// as they are and written back out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub id: String,
    pub transcript: String,
    pub split: Split,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl TranscriptRecord {
    pub fn new(id: impl Into<String>, transcript: impl Into<String>, split: Split) -> Self {
        TranscriptRecord {
            id: id.into(),
            transcript: transcript.into(),
            split,
            extra: Map::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordVerdict {
    Vietnamese,
    ContainsNonVietnamese,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckedRecord {
    pub record: TranscriptRecord,
    pub offending_words: Vec<String>,
}

impl CheckedRecord {
    pub fn check(record: TranscriptRecord) -> CheckedRecord {
        let offending_words = offending_words(&record.transcript);
        CheckedRecord {
            record,
            offending_words,
        }
    }

    pub fn verdict(&self) -> RecordVerdict {
        if self.offending_words.is_empty() {
            RecordVerdict::Vietnamese
        } else {
            RecordVerdict::ContainsNonVietnamese
        }
    }
}

pub fn read_manifest(text: &str) -> Result<Vec<TranscriptRecord>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record =
            serde_json::from_str(line).map_err(|e| CorpusError::MalformedManifestLine {
                line: i + 1,
                message: e.to_string(),
            })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_manifest<'a>(records: impl IntoIterator<Item = &'a TranscriptRecord>) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SplitStats {
    pub records: usize,
    pub discarded: usize,
}

impl SplitStats {
    pub fn percent(&self) -> f64 {
        if self.records == 0 {
            0.0
        } else {
            100.0 * self.discarded as f64 / self.records as f64
        }
    }

    fn add(&mut self, o: SplitStats) {
        self.records += o.records;
        self.discarded += o.discarded;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub train: SplitStats,
    pub dev: SplitStats,
    pub test: SplitStats,
}

impl CorpusStats {
    pub fn split(&self, s: Split) -> SplitStats {
        match s {
            Split::Train => self.train,
            Split::Dev => self.dev,
            Split::Test => self.test,
        }
    }

    fn split_mut(&mut self, s: Split) -> &mut SplitStats {
        match s {
            Split::Train => &mut self.train,
            Split::Dev => &mut self.dev,
            Split::Test => &mut self.test,
        }
    }

    pub fn overall(&self) -> SplitStats {
        let mut all = SplitStats::default();
        for s in Split::ALL {
            all.add(self.split(s));
        }
        all
    }

    pub fn merge(mut self, o: CorpusStats) -> CorpusStats {
        for s in Split::ALL {
            self.split_mut(s).add(o.split(s));
        }
        self
    }

    pub fn to_json(&self) -> Value {
        let entry = |s: SplitStats| {
            serde_json::json!({
                "records": s.records,
                "discarded": s.discarded,
                "percent": s.percent(),
            })
        };
        let mut m = Map::new();
        for s in Split::ALL {
            m.insert(s.name().into(), entry(self.split(s)));
        }
        m.insert("overall".into(), entry(self.overall()));
        Value::Object(m)
    }
}

impl Serialize for CorpusStats {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = Split::ALL
            .iter()
            .map(|&s| (s.name(), self.split(s)))
            .chain([("overall", self.overall())]);
        for (name, st) in rows {
            writeln!(
                f,
                "{name:<8} {:>8} records {:>6} discarded {:>6.2}%",
                st.records,
                st.discarded,
                st.percent()
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<CheckedRecord>,
    pub discarded: Vec<CheckedRecord>,
    pub stats: CorpusStats,
}

/// Splits records into kept and discarded, preserving input order in both.
pub fn filter_manifest(records: impl IntoIterator<Item = TranscriptRecord>) -> FilterOutcome {
    let mut out = FilterOutcome {
        kept: Vec::new(),
        discarded: Vec::new(),
        stats: CorpusStats::default(),
    };
    for record in records {
        let checked = CheckedRecord::check(record);
        let st = out.stats.split_mut(checked.record.split);
        st.records += 1;
        if checked.verdict() == RecordVerdict::Vietnamese {
            out.kept.push(checked);
        } else {
            st.discarded += 1;
            out.discarded.push(checked);
        }
    }
    out
}

/// Published percentages of transcripts with non-Vietnamese words.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePercentages {
    pub dataset: &'static str,
    pub train: Option<f64>,
    pub dev: Option<f64>,
    pub test: Option<f64>,
    pub overall: f64,
}

pub const REFERENCE_PERCENTAGES: [ReferencePercentages; 2] = [
    ReferencePercentages {
        dataset: "vivos",
        train: Some(0.87),
        dev: None,
        test: Some(0.79),
        overall: 0.70,
    },
    ReferencePercentages {
        dataset: "lsvsc",
        train: Some(9.19),
        dev: Some(9.98),
        test: Some(8.89),
        overall: 9.24,
    },
];

pub fn reference_percentages(dataset: &str) -> Option<ReferencePercentages> {
    REFERENCE_PERCENTAGES
        .into_iter()
        .find(|r| r.dataset.eq_ignore_ascii_case(dataset))
}

/// Side-by-side rows of (label, measured %, published %).
pub fn compare_with_reference(
    stats: &CorpusStats,
    reference: &ReferencePercentages,
) -> Vec<(&'static str, f64, Option<f64>)> {
    vec![
        ("train", stats.train.percent(), reference.train),
        ("dev", stats.dev.percent(), reference.dev),
        ("test", stats.test.percent(), reference.test),
        (
            "overall",
            stats.overall().percent(),
            Some(reference.overall),
        ),
    ]
}
