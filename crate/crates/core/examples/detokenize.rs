// Phoneme lines back to text, plus what the renderer refuses.
//
// $ cargo run --example detokenize

use vi_phonemic::phonology::{validate, Syllable};
use vi_phonemic::tokenizer::{detokenize, parse_phoneme_line, render_syllable};

fn main() {
    let line = "k|u̯|e|∅|Flat h|∅|ɯə|ŋ|Flat l|∅|a|∅|LowFalling";
    let seq = parse_phoneme_line(line).expect("well-formed line");
    println!("{line}\n  -> {}", detokenize(&seq).unwrap());

    // /z/ + /i/ is written with a single i.
    let gi: Syllable = "z|∅|i|∅|LowFalling".parse().unwrap();
    println!("{gi}  -> {}", render_syllable(&gi).unwrap());

    // Stop finals only take two tones. Rendering still works; strict
    // validation reports it.
    let odd: Syllable = "t|∅|ɛ|t|Flat".parse().unwrap();
    println!(
        "{odd}  -> {} (strict: {})",
        render_syllable(&odd).unwrap(),
        validate(&odd, true)
    );

    let none: Syllable = "z|∅|ie|∅|Flat".parse().unwrap();
    println!("{none}  -> {}", render_syllable(&none).unwrap_err());
}
