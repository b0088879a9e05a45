// CER, WER and the per-component PER on a few hypotheses.
//
// $ cargo run --example score

use vi_phonemic::metrics::{cer, per_components, wer, CerSpaces, PerAlignment};

fn main() {
    let reference = "hôm nay trời đẹp quá";
    let hypotheses = [
        "hôm nay trời đẹp quá",
        "hôm này trời đẹp quá",
        "hôm nay chời đẹp",
        "hôm nay trời rất đẹp quá",
    ];
    println!("ref: {reference}");
    for hyp in hypotheses {
        let c = cer(reference, hyp, CerSpaces::Exclude);
        let w = wer(reference, hyp);
        let p = per_components(reference, hyp, PerAlignment::Syllable).unwrap();
        println!(
            "{hyp:<28} CER {:.3}  WER {:.3}  PER {:.3} (i {:.3} r {:.3} t {:.3})",
            c.rate(),
            w.rate(),
            p.per(),
            p.per_i(),
            p.per_r(),
            p.per_t()
        );
    }

    // Tuple alignment against stream alignment.
    let (r, h) = ("bà ca", "cà");
    for mode in [PerAlignment::Syllable, PerAlignment::Stream] {
        let p = per_components(r, h, mode).unwrap();
        println!("{r} / {h} {mode:?}: PER {:.3}", p.per());
    }
}
