// Forward pass of the three output heads, the composite loss, and a
// finite-difference check of the backward pass.
//
// $ cargo run --release --example head_gradcheck

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vi_phonemic::head::{
    backward, grad_check, head_logits, softmax, GradCheckOptions, Head, HeadConfig, HeadParams,
    ResidualMode, ToyBatch,
};

fn main() {
    let config = HeadConfig::new(6, 8, 9);
    let params = HeadParams::random(config, 1);
    let batch = ToyBatch::random(config, 4, &mut ChaCha8Rng::seed_from_u64(2));
    println!("{} parameters", params.num_params());

    let logits = head_logits(&batch.features[0], &params, ResidualMode::Normalized).unwrap();
    for h in Head::ALL {
        let p = softmax(&logits[h as usize]);
        let best = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        println!(
            "{:<5} {} classes, argmax {best} (p = {:.3})",
            h.name(),
            p.len(),
            p[best]
        );
    }

    let (loss, _) = backward(&params, &batch, ResidualMode::Normalized, &Head::ALL).unwrap();
    println!(
        "loss {:.4} = {:.4} + {:.4} + {:.4}",
        loss.total, loss.per_head[0], loss.per_head[1], loss.per_head[2]
    );

    let report = grad_check(&params, &batch, &GradCheckOptions::default()).unwrap();
    for t in &report.tensors {
        println!(
            "  {:<14} {:>4} checked  max rel err {:.2e}",
            t.name, t.checked, t.max_rel_error
        );
    }
    println!("passed: {}", report.passed);

    let broken = GradCheckOptions {
        corrupt: Some((4, 0, 1e-2)),
        ..Default::default()
    };
    println!(
        "with a corrupted partial: {}",
        grad_check(&params, &batch, &broken).unwrap().passed
    );
}
