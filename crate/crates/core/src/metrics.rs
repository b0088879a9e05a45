//! Edit distance and the CER / WER / PER family of error rates.

use std::fmt;
use std::iter::Sum;
use std::ops::Add;

use serde::{Serialize, Serializer};
use unicode_normalization::UnicodeNormalization;

use crate::phonology::Syllable;
use crate::tokenizer::{tokenize, TokenizeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EditOp {
    Match,
    Substitute,
    Delete,
    Insert,
}

/// An error rate. Infinite when the reference is empty and the hypothesis
/// is not; displayed and serialized as "undefined" in that case.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Rate(pub f64);

impl Rate {
    pub fn from_counts(errors: usize, reference_length: usize) -> Rate {
        match (errors, reference_length) {
            (0, 0) => Rate(0.0),
            (_, 0) => Rate(f64::INFINITY),
            (e, n) => Rate(e as f64 / n as f64),
        }
    }

    pub fn is_defined(self) -> bool {
        self.0.is_finite()
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_defined() {
            match f.precision() {
                Some(p) => write!(f, "{:.*}", p, self.0),
                None => write!(f, "{}", self.0),
            }
        } else {
            f.write_str("undefined")
        }
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.is_defined() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str("undefined")
        }
    }
}

/// Counts from one minimum-cost alignment. Reports add up, so corpus totals
/// are a plain sum over utterances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ErrorRateReport {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_length: usize,
}

impl ErrorRateReport {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    pub fn rate(&self) -> Rate {
        Rate::from_counts(self.errors(), self.reference_length)
    }

    fn count(&mut self, op: EditOp) {
        match op {
            EditOp::Match => {}
            EditOp::Substitute => self.substitutions += 1,
            EditOp::Delete => self.deletions += 1,
            EditOp::Insert => self.insertions += 1,
        }
        if op != EditOp::Insert {
            self.reference_length += 1;
        }
    }
}

impl Add for ErrorRateReport {
    type Output = ErrorRateReport;

    fn add(self, o: ErrorRateReport) -> ErrorRateReport {
        ErrorRateReport {
            substitutions: self.substitutions + o.substitutions,
            deletions: self.deletions + o.deletions,
            insertions: self.insertions + o.insertions,
            reference_length: self.reference_length + o.reference_length,
        }
    }
}

impl Sum for ErrorRateReport {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ErrorRateReport::default(), Add::add)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub distance: usize,
    pub ops: Vec<EditOp>,
    pub report: ErrorRateReport,
}

/// Unit-cost Levenshtein alignment. On ties the backtrace prefers the
/// diagonal, then deletion, then insertion.
pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Alignment {
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for (j, cell) in d[..w].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        d[i * w] = i;
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = sub.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hypothesis[j - 1];
            if d[(i - 1) * w + j - 1] + usize::from(!same) == here {
                ops.push(if same {
                    EditOp::Match
                } else {
                    EditOp::Substitute
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * w + j] + 1 == here {
            ops.push(EditOp::Delete);
            i -= 1;
        } else {
            ops.push(EditOp::Insert);
            j -= 1;
        }
    }
    ops.reverse();

    let mut report = ErrorRateReport::default();
    for &op in &ops {
        report.count(op);
    }
    Alignment {
        distance: d[n * w + m],
        ops,
        report,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CerSpaces {
    #[default]
    Exclude,
    Include,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PerAlignment {
    /// Align whole syllables, then compare components along that alignment.
    #[default]
    Syllable,
    /// Align each component stream on its own.
    Stream,
}

pub fn wer(reference: &str, hypothesis: &str) -> ErrorRateReport {
    let r: Vec<&str> = reference.split_whitespace().collect();
    let h: Vec<&str> = hypothesis.split_whitespace().collect();
    edit_distance(&r, &h).report
}

fn cer_chars(s: &str, spaces: CerSpaces) -> Vec<char> {
    let words: Vec<&str> = s.split_whitespace().collect();
    let joined = match spaces {
        CerSpaces::Exclude => words.concat(),
        CerSpaces::Include => words.join(" "),
    };
    joined.nfc().collect()
}

pub fn cer(reference: &str, hypothesis: &str, spaces: CerSpaces) -> ErrorRateReport {
    edit_distance(
        &cer_chars(reference, spaces),
        &cer_chars(hypothesis, spaces),
    )
    .report
}

/// Per-component PER counts and their aggregate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PerReport {
    pub initial: ErrorRateReport,
    pub rhyme: ErrorRateReport,
    pub tone: ErrorRateReport,
}

impl PerReport {
    /// All three streams pooled: summed errors over summed lengths.
    pub fn total(&self) -> ErrorRateReport {
        self.initial + self.rhyme + self.tone
    }

    pub fn per(&self) -> Rate {
        self.total().rate()
    }

    pub fn per_i(&self) -> Rate {
        self.initial.rate()
    }

    pub fn per_r(&self) -> Rate {
        self.rhyme.rate()
    }

    pub fn per_t(&self) -> Rate {
        self.tone.rate()
    }
}

impl Add for PerReport {
    type Output = PerReport;

    fn add(self, o: PerReport) -> PerReport {
        PerReport {
            initial: self.initial + o.initial,
            rhyme: self.rhyme + o.rhyme,
            tone: self.tone + o.tone,
        }
    }
}

impl Sum for PerReport {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(PerReport::default(), Add::add)
    }
}

type Components = (
    Option<crate::phonology::Phoneme>,
    String,
    crate::phonology::Tone,
);

fn components(s: &Syllable) -> Components {
    (s.initial, s.rhyme_key(), s.tone)
}

pub fn per_syllables(
    reference: &[Syllable],
    hypothesis: &[Syllable],
    mode: PerAlignment,
) -> PerReport {
    let r: Vec<Components> = reference.iter().map(components).collect();
    let h: Vec<Components> = hypothesis.iter().map(components).collect();
    match mode {
        PerAlignment::Syllable => {
            let alignment = edit_distance(&r, &h);
            let mut out = PerReport::default();
            let (mut i, mut j) = (0, 0);
            for op in alignment.ops {
                match op {
                    EditOp::Match | EditOp::Substitute => {
                        let (a, b) = (&r[i], &h[j]);
                        let pick = |same: bool| {
                            if same {
                                EditOp::Match
                            } else {
                                EditOp::Substitute
                            }
                        };
                        out.initial.count(pick(a.0 == b.0));
                        out.rhyme.count(pick(a.1 == b.1));
                        out.tone.count(pick(a.2 == b.2));
                        i += 1;
                        j += 1;
                    }
                    EditOp::Delete | EditOp::Insert => {
                        for stream in [&mut out.initial, &mut out.rhyme, &mut out.tone] {
                            stream.count(op);
                        }
                        if op == EditOp::Delete {
                            i += 1;
                        } else {
                            j += 1;
                        }
                    }
                }
            }
            out
        }
        PerAlignment::Stream => {
            let initial_r: Vec<_> = r.iter().map(|c| c.0).collect();
            let initial_h: Vec<_> = h.iter().map(|c| c.0).collect();
            let rhyme_r: Vec<_> = r.iter().map(|c| &c.1).collect();
            let rhyme_h: Vec<_> = h.iter().map(|c| &c.1).collect();
            let tone_r: Vec<_> = r.iter().map(|c| c.2).collect();
            let tone_h: Vec<_> = h.iter().map(|c| c.2).collect();
            PerReport {
                initial: edit_distance(&initial_r, &initial_h).report,
                rhyme: edit_distance(&rhyme_r, &rhyme_h).report,
                tone: edit_distance(&tone_r, &tone_h).report,
            }
        }
    }
}

/// PER of two transcripts. Both sides must tokenize.
pub fn per_components(
    reference: &str,
    hypothesis: &str,
    mode: PerAlignment,
) -> Result<PerReport, TokenizeError> {
    Ok(per_syllables(
        &tokenize(reference)?,
        &tokenize(hypothesis)?,
        mode,
    ))
}

pub fn per(
    reference: &str,
    hypothesis: &str,
    mode: PerAlignment,
) -> Result<ErrorRateReport, TokenizeError> {
    Ok(per_components(reference, hypothesis, mode)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Plain exponential recursion, no table.
    fn brute(a: &[u8], b: &[u8]) -> usize {
        match (a, b) {
            ([], _) => b.len(),
            (_, []) => a.len(),
            ([x, ra @ ..], [y, rb @ ..]) if x == y => brute(ra, rb),
            ([_, ra @ ..], [_, rb @ ..]) => 1 + brute(ra, rb).min(brute(ra, b)).min(brute(a, rb)),
        }
    }

    fn apply(ops: &[EditOp], r: &[u8], h: &[u8]) -> Vec<u8> {
        let (mut i, mut j, mut out) = (0, 0, Vec::new());
        for op in ops {
            match op {
                EditOp::Match => {
                    assert_eq!(r[i], h[j]);
                    out.push(r[i]);
                    i += 1;
                    j += 1;
                }
                EditOp::Substitute => {
                    assert_ne!(r[i], h[j]);
                    out.push(h[j]);
                    i += 1;
                    j += 1;
                }
                EditOp::Delete => i += 1,
                EditOp::Insert => {
                    out.push(h[j]);
                    j += 1;
                }
            }
        }
        assert_eq!((i, j), (r.len(), h.len()));
        out
    }

    #[test]
    fn dp_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let a: Vec<u8> = (0..rng.random_range(0..=8))
                .map(|_| rng.random_range(0..4))
                .collect();
            let b: Vec<u8> = (0..rng.random_range(0..=8))
                .map(|_| rng.random_range(0..4))
                .collect();
            let al = edit_distance(&a, &b);
            assert_eq!(al.distance, brute(&a, &b), "{a:?} {b:?}");
            assert_eq!(al.report.errors(), al.distance);
            assert_eq!(al.report.reference_length, a.len());
            assert_eq!(apply(&al.ops, &a, &b), b);
        }
    }

    #[test]
    fn simple_cases() {
        let al = edit_distance(&["a", "b", "c"], &["a", "x", "c"]);
        assert_eq!((al.distance, al.report.substitutions), (1, 1));
        assert_eq!(edit_distance(&[1, 2], &[1, 2]).distance, 0);
        assert_eq!(wer("a b c", "a x c").rate(), Rate(1.0 / 3.0));
    }

    #[test]
    fn tie_break_prefers_substitution() {
        let al = edit_distance(&["a"], &["b"]);
        assert_eq!(al.ops, vec![EditOp::Substitute]);
        // "ab" -> "b": deleting the first is the only distance-1 path.
        assert_eq!(
            edit_distance(&["a", "b"], &["b"]).ops,
            vec![EditOp::Delete, EditOp::Match]
        );
    }

    #[test]
    fn rates_are_not_clamped() {
        let r = wer("a", "x y z");
        assert_eq!(r.rate(), Rate(3.0));
    }

    #[test]
    fn empty_reference() {
        assert_eq!(wer("", "").rate(), Rate(0.0));
        let r = wer("", "a");
        assert!(!r.rate().is_defined());
        assert_eq!(r.rate().to_string(), "undefined");
        assert_eq!(serde_json::to_string(&r.rate()).unwrap(), "\"undefined\"");
    }

    #[test]
    fn cer_space_policy() {
        assert_eq!(cer("ba mẹ", "bamẹ", CerSpaces::Exclude).errors(), 0);
        assert_eq!(cer("ba mẹ", "bamẹ", CerSpaces::Include).errors(), 1);
        assert_eq!(cer("ba  mẹ", "ba mẹ", CerSpaces::Include).errors(), 0);
        // Decomposed and composed input score the same.
        let nfd: String = "mẹ".nfd().collect();
        assert_eq!(cer("mẹ", &nfd, CerSpaces::Exclude).errors(), 0);
    }

    #[test]
    fn tone_only_error() {
        let p = per_components("ba", "bà", PerAlignment::Syllable).unwrap();
        assert_eq!(p.per_i(), Rate(0.0));
        assert_eq!(p.per_r(), Rate(0.0));
        assert_eq!(p.per_t(), Rate(1.0));
        assert_eq!(p.per(), Rate(1.0 / 3.0));
    }

    #[test]
    fn one_tone_flip_in_ten() {
        let r = "một hai ba bốn năm sáu bảy tám chín mười";
        let h = "một hai bà bốn năm sáu bảy tám chín mười";
        let p = per_components(r, h, PerAlignment::Syllable).unwrap();
        assert_eq!(p.per_t(), Rate(0.1));
        assert_eq!(p.per_i(), Rate(0.0));
    }

    #[test]
    fn deleted_syllable_hits_every_stream() {
        let p = per_components("ba mẹ con", "ba con", PerAlignment::Syllable).unwrap();
        for s in [p.initial, p.rhyme, p.tone] {
            assert_eq!((s.deletions, s.substitutions, s.insertions), (1, 0, 0));
            assert_eq!(s.reference_length, 3);
        }
    }

    #[test]
    fn stream_mode_can_differ() {
        // Streams may each pick their own alignment; tuples cannot.
        let s = per_components("bà ca", "cà", PerAlignment::Syllable).unwrap();
        let t = per_components("bà ca", "cà", PerAlignment::Stream).unwrap();
        assert_eq!(s.total().errors(), 4);
        assert_eq!(t.total().errors(), 3);
        assert_eq!(
            (t.per_i(), t.per_r(), t.per_t()),
            (Rate(0.5), Rate(0.5), Rate(0.5))
        );
    }

    #[test]
    fn per_propagates_parse_failure() {
        assert!(per("ba", "xyz", PerAlignment::Syllable).is_err());
    }

    fn seq() -> impl Strategy<Value = Vec<u8>> {
        proptest::collection::vec(0u8..4, 0..10)
    }

    proptest! {
        #[test]
        fn symmetric(a in seq(), b in seq()) {
            prop_assert_eq!(edit_distance(&a, &b).distance, edit_distance(&b, &a).distance);
        }

        #[test]
        fn triangle(a in seq(), b in seq(), c in seq()) {
            let ab = edit_distance(&a, &b).distance;
            let bc = edit_distance(&b, &c).distance;
            let ac = edit_distance(&a, &c).distance;
            prop_assert!(ac <= ab + bc);
        }

        #[test]
        fn zero_iff_equal(a in seq(), b in seq()) {
            prop_assert_eq!(edit_distance(&a, &b).distance == 0, a == b);
        }

        #[test]
        fn aggregation_is_associative(xs in proptest::collection::vec((seq(), seq()), 0..6)) {
            let reports: Vec<ErrorRateReport> =
                xs.iter().map(|(a, b)| edit_distance(a, b).report).collect();
            let left: ErrorRateReport = reports.iter().copied().sum();
            let right = reports.iter().rev().fold(ErrorRateReport::default(), |acc, r| *r + acc);
            prop_assert_eq!(left, right);
        }
    }
}
