// Split a sentence into syllables and show each component.
//
// $ cargo run --example tokenize -- "Quê hương là chùm khế ngọt"

use vi_phonemic::corpus::split_words;
use vi_phonemic::tokenizer::{parse_syllable, PhonemeLine};

fn main() {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "Quê hương là chùm khế ngọt".to_string());

    let mut line = Vec::new();
    for word in split_words(&text) {
        match parse_syllable(&word) {
            Ok(p) => {
                let g = &p.graphemes;
                println!(
                    "{word:<8} initial {:<4} glide {:<2} vowel {:<4} final {:<3} tone {}",
                    g.initial.as_deref().unwrap_or("-"),
                    g.glide.as_deref().unwrap_or("-"),
                    g.vowel.as_deref().unwrap_or("-"),
                    g.coda.as_deref().unwrap_or("-"),
                    p.syllable.tone,
                );
                line.push(p.syllable);
            }
            Err(e) => println!("{word:<8} {e}"),
        }
    }
    println!();
    println!("{}", PhonemeLine(&line));
}
