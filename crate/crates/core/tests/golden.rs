mod common;

use common::{check_row, golden_rows};

#[test]
fn golden_table_has_enough_words() {
    let rows = golden_rows();
    assert!(rows.len() >= 120, "{}", rows.len());
}

#[test]
fn every_golden_word_parses_as_stated() {
    let failures: Vec<String> = golden_rows()
        .iter()
        .filter_map(|r| check_row(r).err())
        .collect();
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
