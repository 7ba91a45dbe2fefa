//! Baseline versus attention-regularized training on the toy pronoun task.
//!
//! Usage: `cargo run --release --example toy_disambiguation -- [steps]`
//! (default 300; the acceptance suite uses 1000).

use ctxmt::synth::{run_disambiguation, DisambiguationConfig};

fn main() -> ctxmt::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let mut cfg = DisambiguationConfig::default();
    cfg.train.steps = steps;
    let r = run_disambiguation(&cfg, None)?;
    println!("monitored row: {} layer {} ({:?})", r.monitored.attn, r.monitored.layer, r.monitored.heads);
    println!(
        "{:<14} {:>8} {:>11} {:>9} {:>11} {:>10}",
        "regime", "accuracy", "supporting", "random", "dot before", "dot after"
    );
    for s in [&r.baseline, &r.regularized] {
        println!(
            "{:<14} {:>8.3} {:>11.3} {:>9.3} {:>11.3} {:>10.3}",
            s.regime.name(),
            s.accuracy,
            s.supporting_mask_accuracy,
            s.random_mask_accuracy,
            s.before.dot,
            s.after.dot
        );
    }
    Ok(())
}
