// Build the three token spaces and encode a sentence as id triples.
//
// $ cargo run --example vocab

use vi_phonemic::lexicon;
use vi_phonemic::tokenizer::tokenize;
use vi_phonemic::vocab::{build_vocab, decode, encode};

fn main() {
    let (vocab, report) = build_vocab(lexicon::bundled()).unwrap();
    println!("{}", serde_json::to_string_pretty(&report).unwrap());

    let sentence = "chúng tôi yêu tiếng việt";
    println!("\n{sentence}");
    for s in tokenize(sentence).unwrap() {
        let ids = encode(&s, &vocab).unwrap();
        assert_eq!(decode(ids, &vocab).unwrap(), s);
        println!(
            "  ({:>3}, {:>3}, {}) = {} + {} + {}",
            ids.initial,
            ids.rhyme,
            ids.tone,
            vocab.initials.token(ids.initial).unwrap(),
            vocab.rhymes.token(ids.rhyme).unwrap(),
            vocab.tones.token(ids.tone).unwrap()
        );
    }
}
