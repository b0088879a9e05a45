// Parse and re-render the bundled lexicon, counting rule comparisons.
//
// $ cargo run --release --example lexicon_round_trip

use std::collections::BTreeMap;
use std::time::Instant;

use vi_phonemic::lexicon;
use vi_phonemic::tokenizer::{parse_syllable, render_syllable};

fn main() {
    let words = lexicon::bundled();
    let start = Instant::now();
    let mut histogram = BTreeMap::new();
    let mut failures = 0;
    for w in &words {
        let p = parse_syllable(w).unwrap();
        *histogram.entry(p.counter.comparisons).or_insert(0) += 1;
        if render_syllable(&p.syllable).as_deref() != Ok(*w) {
            failures += 1;
            println!("mismatch: {w}");
        }
    }
    println!(
        "{} words, {failures} failures, {:.1} ms",
        words.len(),
        start.elapsed().as_secs_f64() * 1e3
    );
    println!("comparisons per word:");
    for (n, count) in histogram {
        println!("  {n:>2}  {count}");
    }
}
