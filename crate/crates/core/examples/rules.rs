// The grapheme rule table, grouped by phoneme.
//
// $ cargo run --example rules

use vi_phonemic::phonology::{Inventory, PhonemeClass};

fn main() {
    let inv = Inventory::builtin();
    for class in PhonemeClass::ALL {
        let phonemes = inv.phonemes(class);
        println!(
            "{} ({} phonemes, {} written forms)",
            class.name(),
            phonemes.len(),
            inv.rules(class).len()
        );
        for info in phonemes {
            let p = inv.phoneme(class, &info.ipa).unwrap();
            println!("  /{}/  {}", info.ipa, inv.written_forms(p).join(", "));
        }
    }
}
