use std::io::Write;
use std::process::{Command, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vi-phonemic"))
}

fn with_stdin(args: &[&str], input: &str) -> (i32, String, String) {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn tokenize_from_stdin() {
    let (code, out, _) = with_stdin(&["tokenize"], "quê hương\n");
    assert_eq!(code, 0);
    assert_eq!(out, "k|u̯|e|∅|Flat h|∅|ɯə|ŋ|Flat\n");
}

#[test]
fn detokenize_from_stdin() {
    let (code, out, _) = with_stdin(&["detokenize"], "k|u̯|e|∅|Flat h|∅|ɯə|ŋ|Flat\n");
    assert_eq!(code, 0);
    assert_eq!(out, "quê hương\n");
}

#[test]
fn exit_codes() {
    assert_eq!(with_stdin(&["tokenize"], "hello\n").0, 1);
    assert_eq!(with_stdin(&["no-such-command"], "").0, 2);
    assert_eq!(with_stdin(&["score", "--cer-spaces", "sometimes"], "").0, 2);
}

#[test]
fn bundled_round_trip() {
    let out = bin().arg("roundtrip").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains(" 0 mismatches"), "{text}");
}

#[test]
fn vocab_report_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("vocab.tsv");
    let out = bin()
        .args(["vocab", "--table"])
        .arg(&table)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["tones"], 6);
    assert_eq!(report["initial_content"], 22);
    let text = std::fs::read_to_string(&table).unwrap();
    assert!(vi_phonemic::vocab::Vocabulary::from_table(&text).is_ok());
}

#[test]
fn rules_dump_parses_back() {
    let out = bin().arg("rules").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let inv = vi_phonemic::phonology::Inventory::parse(&text).unwrap();
    assert_eq!(
        inv.to_tsv(),
        vi_phonemic::phonology::Inventory::builtin().to_tsv()
    );
    assert_eq!(
        inv.rules(vi_phonemic::phonology::PhonemeClass::Initial)
            .len(),
        26
    );
}
