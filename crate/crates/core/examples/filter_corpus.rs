// Drop transcripts that contain non-Vietnamese words.
//
// $ cargo run --example filter_corpus

use vi_phonemic::corpus::{
    compare_with_reference, filter_manifest, read_manifest, reference_percentages,
};

const MANIFEST: &str = r#"{"id":"a1","transcript":"Xin chào các bạn!","split":"train","audio":"a1.wav"}
{"id":"a2","transcript":"tôi thích ăn phở","split":"train"}
{"id":"a3","transcript":"hẹn gặp lại vào năm 2025","split":"test"}
{"id":"a4","transcript":"mở file pdf giúp tôi","split":"test"}
{"id":"a5","transcript":"thời tiết hòa dịu","split":"dev"}
"#;

fn main() {
    let records = read_manifest(MANIFEST).unwrap();
    let out = filter_manifest(records);
    for c in &out.discarded {
        println!("drop {}: {:?}", c.record.id, c.offending_words);
    }
    for c in &out.kept {
        println!("keep {}: {}", c.record.id, c.record.transcript);
    }
    println!("\n{}", out.stats);

    let vivos = reference_percentages("vivos").unwrap();
    for (split, ours, published) in compare_with_reference(&out.stats, &vivos) {
        let published = published.map_or("-".to_string(), |p| format!("{p:.2}"));
        println!("{split:<8} {ours:>6.2}%  published {published}%");
    }
}
