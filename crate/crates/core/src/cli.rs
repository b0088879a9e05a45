//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 1 on data errors, 2 on usage errors.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;
use unicode_normalization::is_nfc;

use crate::corpus::{
    self, compare_with_reference, filter_manifest, read_manifest, reference_percentages,
    write_manifest,
};
use crate::head::{gradient_suite, GradCheckOptions, HeadParams, ResidualMode};
use crate::lexicon;
use crate::metrics::{
    cer, per_syllables, wer, CerSpaces, ErrorRateReport, PerAlignment, PerReport,
};
use crate::phonology::{validate, Inventory};
use crate::tokenizer::{
    detokenize, parse_phoneme_line, parse_syllable, render_syllable, PhonemeLine,
};
use crate::vocab::build_vocab;

#[derive(Debug, Parser)]
#[command(
    name = "vi-phonemic",
    version,
    about = "Vietnamese syllable tokenizer, vocabulary and error-rate tools"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, PartialEq, Eq)]
pub struct GlobalOpts {
    /// Reject syllables that break the stop-final tone rule.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Accept input that is not canonically composed.
    #[arg(long, global = true, default_value_t = true, action = clap::ArgAction::Set, value_name = "BOOL")]
    pub nfd_ok: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Text to phoneme lines, one line per input line.
    Tokenize(IoArgs),
    /// Phoneme lines back to text.
    Detokenize(IoArgs),
    /// Parse and re-render every word of a list; prints mismatches.
    Roundtrip {
        /// Word list, one per line. Defaults to the bundled lexicon.
        #[arg(long)]
        words: Option<PathBuf>,
    },
    /// Build the token spaces and report their sizes.
    Vocab {
        #[arg(long)]
        words: Option<PathBuf>,
        /// Write the id table here.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// CER, WER and PER of hypotheses against references.
    Score(ScoreArgs),
    /// Drop manifest records whose transcript has non-Vietnamese words.
    Filter(FilterArgs),
    /// Gradient check of the output heads on seeded toy configurations.
    DemoHead(DemoHeadArgs),
    /// Print the grapheme rule table.
    Rules,
}

#[derive(Debug, Args, Clone, PartialEq, Eq)]
pub struct IoArgs {
    /// Input file; standard input when absent.
    #[arg(long, short)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CerSpacesArg {
    Exclude,
    Include,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PerAlignmentArg {
    Syllable,
    Stream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ResidualArg {
    Normalized,
    Raw,
}

#[derive(Debug, Args, Clone, PartialEq, Eq)]
pub struct ScoreArgs {
    /// Reference transcripts, one per line.
    #[arg(long = "ref", requires = "hyp", conflicts_with = "pairs")]
    pub reference: Option<PathBuf>,
    /// Hypotheses, parallel to --ref.
    #[arg(long, requires = "reference")]
    pub hyp: Option<PathBuf>,
    /// JSONL with "ref" and "hyp" fields.
    #[arg(long, required_unless_present = "reference")]
    pub pairs: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = CerSpacesArg::Exclude)]
    pub cer_spaces: CerSpacesArg,
    #[arg(long, value_enum, default_value_t = PerAlignmentArg::Syllable)]
    pub per_alignment: PerAlignmentArg,
}

#[derive(Debug, Args, Clone, PartialEq, Eq)]
pub struct FilterArgs {
    /// JSONL manifest with id, transcript and split.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Kept records; standard output gets only the stats when set.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Discarded records with their offending words.
    #[arg(long)]
    pub discard_file: Option<PathBuf>,
    /// Compare with published percentages (vivos or lsvsc).
    #[arg(long)]
    pub dataset: Option<String>,
}

#[derive(Debug, Args, Clone, PartialEq)]
pub struct DemoHeadArgs {
    #[arg(long, default_value_t = 100)]
    pub configs: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ResidualArg::Normalized)]
    pub residual: ResidualArg,
    /// Add 1e-2 to one analytic partial; the check is expected to fail.
    #[arg(long)]
    pub corrupt: bool,
    /// Write the first configuration's parameters in the text format.
    #[arg(long)]
    pub dump_params: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn data_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| data_error(format!("{}: {e}", path.display())))
}

fn read_input(path: Option<&Path>) -> Result<String, Failure> {
    match path {
        Some(p) => read_file(p),
        None => {
            let mut s = String::new();
            io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| data_error(format!("stdin: {e}")))?;
            Ok(s)
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| data_error(format!("{}: {e}", path.display())))
}

fn io_fail(e: io::Error) -> Failure {
    data_error(format!("write: {e}"))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::Tokenize(io) => tokenize_cmd(g, io, out),
        Command::Detokenize(io) => detokenize_cmd(g, io, out),
        Command::Roundtrip { words } => roundtrip_cmd(g, words.as_deref(), out),
        Command::Vocab { words, table } => vocab_cmd(words.as_deref(), table.as_deref(), out),
        Command::Score(a) => score_cmd(g, a, out),
        Command::Filter(a) => filter_cmd(a, out),
        Command::DemoHead(a) => demo_head_cmd(a, out),
        Command::Rules => write!(out, "{}", Inventory::builtin().to_tsv()).map_err(io_fail),
    }
}

fn check_nfc(g: &GlobalOpts, n: usize, line: &str) -> Result<(), Failure> {
    if !g.nfd_ok && !is_nfc(line) {
        return Err(data_error(format!(
            "line {n}: input is not canonically composed"
        )));
    }
    Ok(())
}

fn tokenize_line(g: &GlobalOpts, line: &str) -> Result<Vec<crate::phonology::Syllable>, String> {
    let mut out = Vec::new();
    for word in corpus::split_words(line) {
        let s = parse_syllable(&word).map_err(|e| e.to_string())?.syllable;
        let verdict = validate(&s, g.strict);
        if !verdict.is_ok() {
            return Err(format!("{word:?}: {verdict}"));
        }
        out.push(s);
    }
    Ok(out)
}

fn tokenize_cmd(g: &GlobalOpts, io: &IoArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let text = read_input(io.input.as_deref())?;
    for (i, line) in text.lines().enumerate() {
        check_nfc(g, i + 1, line)?;
        let seq = tokenize_line(g, line).map_err(|m| data_error(format!("line {}: {m}", i + 1)))?;
        writeln!(out, "{}", PhonemeLine(&seq)).map_err(io_fail)?;
    }
    Ok(())
}

fn detokenize_cmd(g: &GlobalOpts, io: &IoArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let text = read_input(io.input.as_deref())?;
    for (i, line) in text.lines().enumerate() {
        let at = |m: String| data_error(format!("line {}: {m}", i + 1));
        let seq = parse_phoneme_line(line).map_err(|(k, e)| at(format!("syllable {k}: {e}")))?;
        for s in &seq {
            let verdict = validate(s, g.strict);
            if !verdict.is_ok() {
                return Err(at(format!("{s}: {verdict}")));
            }
        }
        let words = detokenize(&seq).map_err(|e| at(e.to_string()))?;
        writeln!(out, "{words}").map_err(io_fail)?;
    }
    Ok(())
}

fn word_list(path: Option<&Path>) -> Result<Vec<String>, Failure> {
    Ok(match path {
        Some(p) => lexicon::words(&read_file(p)?)
            .into_iter()
            .map(str::to_string)
            .collect(),
        None => lexicon::bundled().into_iter().map(str::to_string).collect(),
    })
}

fn roundtrip_cmd(g: &GlobalOpts, words: Option<&Path>, out: &mut dyn Write) -> Result<(), Failure> {
    let words = word_list(words)?;
    let mut failures = 0;
    let mut max_comparisons = 0;
    for w in &words {
        if !g.nfd_ok && !is_nfc(w) {
            failures += 1;
            writeln!(out, "{w}\tnot canonically composed").map_err(io_fail)?;
            continue;
        }
        let problem = match parse_syllable(w) {
            Err(e) => Some(e.to_string()),
            Ok(p) => {
                max_comparisons = max_comparisons.max(p.counter.comparisons);
                let verdict = validate(&p.syllable, g.strict);
                if !verdict.is_ok() {
                    Some(verdict.to_string())
                } else {
                    match render_syllable(&p.syllable) {
                        Err(e) => Some(e.to_string()),
                        Ok(r) if r != *w => Some(format!("renders as {r}")),
                        Ok(_) => None,
                    }
                }
            }
        };
        if let Some(p) = problem {
            failures += 1;
            writeln!(out, "{w}\t{p}").map_err(io_fail)?;
        }
    }
    writeln!(
        out,
        "{} words, {failures} mismatches, at most {max_comparisons} rule comparisons per word",
        words.len()
    )
    .map_err(io_fail)?;
    if failures > 0 {
        return Err(data_error(format!(
            "{failures} words failed the round trip"
        )));
    }
    Ok(())
}

fn vocab_cmd(
    words: Option<&Path>,
    table: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let words = word_list(words)?;
    let (vocab, report) =
        build_vocab(words.iter().map(String::as_str)).map_err(|e| data_error(e.to_string()))?;
    if let Some(path) = table {
        write_file(path, &vocab.to_table())?;
    }
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    writeln!(out, "{text}").map_err(io_fail)
}

#[derive(Deserialize)]
struct Pair {
    #[serde(alias = "reference")]
    r#ref: String,
    #[serde(alias = "hypothesis")]
    hyp: String,
}

fn score_cmd(g: &GlobalOpts, a: &ScoreArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let pairs: Vec<(String, String)> = match (&a.reference, &a.hyp, &a.pairs) {
        (Some(r), Some(h), _) => {
            let (r, h) = (read_file(r)?, read_file(h)?);
            let (r, h): (Vec<&str>, Vec<&str>) = (r.lines().collect(), h.lines().collect());
            if r.len() != h.len() {
                return Err(data_error(format!(
                    "{} reference lines but {} hypothesis lines",
                    r.len(),
                    h.len()
                )));
            }
            r.into_iter()
                .zip(h)
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect()
        }
        (_, _, Some(p)) => read_file(p)?
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str::<Pair>(l)
                    .map(|p| (p.r#ref, p.hyp))
                    .map_err(|e| data_error(format!("pairs line {}: {e}", i + 1)))
            })
            .collect::<Result<_, _>>()?,
        _ => unreachable!("clap enforces --ref/--hyp or --pairs"),
    };
    let spaces = match a.cer_spaces {
        CerSpacesArg::Exclude => CerSpaces::Exclude,
        CerSpacesArg::Include => CerSpaces::Include,
    };
    let mode = match a.per_alignment {
        PerAlignmentArg::Syllable => PerAlignment::Syllable,
        PerAlignmentArg::Stream => PerAlignment::Stream,
    };

    let mut c = ErrorRateReport::default();
    let mut w = ErrorRateReport::default();
    let mut p = PerReport::default();
    for (i, (r, h)) in pairs.iter().enumerate() {
        check_nfc(g, i + 1, r)?;
        check_nfc(g, i + 1, h)?;
        let (r, h) = (
            corpus::split_words(r).join(" "),
            corpus::split_words(h).join(" "),
        );
        c = c + cer(&r, &h, spaces);
        w = w + wer(&r, &h);
        let at = |side: &str, m: String| data_error(format!("pair {} {side}: {m}", i + 1));
        let rs = tokenize_line(g, &r).map_err(|m| at("reference", m))?;
        let hs = tokenize_line(g, &h).map_err(|m| at("hypothesis", m))?;
        p = p + per_syllables(&rs, &hs, mode);
    }
    let report = json!({
        "utterances": pairs.len(),
        "cer": c.rate(),
        "wer": w.rate(),
        "per": p.per(),
        "per_i": p.per_i(),
        "per_r": p.per_r(),
        "per_t": p.per_t(),
        "counts": {
            "cer": c,
            "wer": w,
            "per": p.total(),
            "per_i": p.initial,
            "per_r": p.rhyme,
            "per_t": p.tone,
        },
        "options": { "cer_spaces": spaces, "per_alignment": mode },
    });
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&report).expect("serializes")
    )
    .map_err(io_fail)
}

fn filter_cmd(a: &FilterArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let records = read_manifest(&read_file(&a.manifest)?).map_err(|e| data_error(e.to_string()))?;
    let result = filter_manifest(records);
    if let Some(path) = &a.discard_file {
        let mut text = String::new();
        for d in &result.discarded {
            text.push_str(&serde_json::to_string(d).expect("serializes"));
            text.push('\n');
        }
        write_file(path, &text)?;
    }
    let kept = write_manifest(result.kept.iter().map(|c| &c.record));
    let mut report = json!({ "stats": result.stats });
    if let Some(name) = &a.dataset {
        let reference = reference_percentages(name)
            .ok_or_else(|| data_error(format!("no published figures for dataset {name:?}")))?;
        let rows: Vec<_> = compare_with_reference(&result.stats, &reference)
            .into_iter()
            .map(|(split, ours, theirs)| json!({ "split": split, "measured": ours, "published": theirs }))
            .collect();
        report["published"] = json!({ "dataset": reference.dataset, "rows": rows });
    }
    match &a.out {
        Some(path) => {
            write_file(path, &kept)?;
            writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&report).expect("serializes")
            )
            .map_err(io_fail)
        }
        None => {
            write!(out, "{kept}").map_err(io_fail)?;
            writeln!(
                out,
                "{}",
                serde_json::to_string(&report).expect("serializes")
            )
            .map_err(io_fail)
        }
    }
}

fn demo_head_cmd(a: &DemoHeadArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let opts = GradCheckOptions {
        mode: match a.residual {
            ResidualArg::Normalized => ResidualMode::Normalized,
            ResidualArg::Raw => ResidualMode::Raw,
        },
        corrupt: a.corrupt.then_some((4, 0, 1e-2)),
        ..Default::default()
    };
    let report = gradient_suite(a.configs, a.seed, &opts).map_err(|e| data_error(e.to_string()))?;
    if let (Some(path), Some(first)) = (&a.dump_params, report.cases.first()) {
        write_file(
            path,
            &HeadParams::random(first.config, first.seed).to_text(),
        )?;
    }
    let summary = json!({
        "configs": report.cases.len(),
        "corrupted": a.corrupt,
        "max_rel_error": report.max_rel_error,
        "passed": report.passed,
        "options": report.options,
        "cases": report.cases,
    });
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&summary).expect("serializes")
    )
    .map_err(io_fail)?;
    if report.passed == a.corrupt {
        let what = if a.corrupt {
            "corrupted gradient was not detected"
        } else {
            "gradient check failed"
        };
        return Err(data_error(what));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("vi-phonemic").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    fn temp(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn default_config_snapshot() {
        let cli = Cli::try_parse_from(["vi-phonemic", "score", "--pairs", "p.jsonl"]).unwrap();
        assert_eq!(
            format!("{:?}", cli),
            "Cli { global: GlobalOpts { strict: false, nfd_ok: true }, command: Score(ScoreArgs { \
             reference: None, hyp: None, pairs: Some(\"p.jsonl\"), cer_spaces: Exclude, \
             per_alignment: Syllable }) }"
        );
        let cli = Cli::try_parse_from(["vi-phonemic", "demo-head"]).unwrap();
        assert_eq!(
            format!("{:?}", cli.command),
            "DemoHead(DemoHeadArgs { configs: 100, seed: 2024, residual: Normalized, corrupt: false, dump_params: None })"
        );
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(call(&["frobnicate"]).0, 2);
        assert_eq!(call(&["score"]).0, 2);
        assert_eq!(call(&["score", "--ref", "a"]).0, 2);
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn tokenize_and_back() {
        let f = temp("Xin chào, các bạn!\nquê hương\n");
        let (code, out, _) = call(&["tokenize", "-i", f.path().to_str().unwrap()]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 2);
        let g = temp(&out);
        let (code, back, _) = call(&["detokenize", "-i", g.path().to_str().unwrap()]);
        assert_eq!(code, 0);
        assert_eq!(back, "xin chào các bạn\nquê hương\n");
    }

    #[test]
    fn tokenize_data_error_exit_1() {
        let f = temp("ba hello\n");
        let (code, _, err) = call(&["tokenize", "-i", f.path().to_str().unwrap()]);
        assert_eq!(code, 1);
        assert!(err.contains("line 1"));
    }

    #[test]
    fn nfd_policy() {
        let f = temp("me\u{323}\n");
        let p = f.path().to_str().unwrap();
        assert_eq!(call(&["tokenize", "-i", p]).0, 0);
        assert_eq!(call(&["--nfd-ok", "false", "tokenize", "-i", p]).0, 1);
    }

    #[test]
    fn strict_rejects_stop_final_tone() {
        let f = temp("∅|∅|a|k|Flat\n");
        let p = f.path().to_str().unwrap();
        assert_eq!(call(&["detokenize", "-i", p]).0, 0);
        assert_eq!(call(&["--strict", "detokenize", "-i", p]).0, 1);
    }

    #[test]
    fn score_report() {
        let f = temp("{\"ref\":\"a b c\",\"hyp\":\"a x c\"}\n");
        let g = temp("{\"ref\":\"ba mẹ\",\"hyp\":\"bà mẹ\"}\n");
        let (code, out, _) = call(&["score", "--pairs", g.path().to_str().unwrap()]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["per_t"], 0.5);
        assert_eq!(v["per_i"], 0.0);
        assert_eq!(v["wer"], 0.5);
        // "a", "x" are not syllables, so PER fails on the first file.
        assert_eq!(call(&["score", "--pairs", f.path().to_str().unwrap()]).0, 1);
    }

    #[test]
    fn filter_writes_discards() {
        let m = temp(
            "{\"id\":\"1\",\"transcript\":\"ba mẹ\",\"split\":\"train\"}\n\
             {\"id\":\"2\",\"transcript\":\"okay\",\"split\":\"test\"}\n",
        );
        let d = tempfile::NamedTempFile::new().unwrap();
        let (code, out, _) = call(&[
            "filter",
            "--manifest",
            m.path().to_str().unwrap(),
            "--discard-file",
            d.path().to_str().unwrap(),
            "--dataset",
            "vivos",
        ]);
        assert_eq!(code, 0);
        assert!(out.starts_with("{\"id\":\"1\""));
        let discarded = fs::read_to_string(d.path()).unwrap();
        assert!(discarded.contains("okay"));
        let stats: serde_json::Value = serde_json::from_str(out.lines().last().unwrap()).unwrap();
        assert_eq!(stats["stats"]["overall"]["percent"], 50.0);
    }

    #[test]
    fn demo_head_small() {
        let (code, out, _) = call(&["demo-head", "--configs", "2"]);
        assert_eq!(code, 0);
        assert!(out.contains("\"passed\": true"));
        let (code, _, err) = call(&["demo-head", "--configs", "2", "--corrupt"]);
        assert_eq!(code, 0, "{err}");
    }
}
