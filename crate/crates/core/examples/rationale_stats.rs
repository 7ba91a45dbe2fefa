//! Context-level counts and highlight-distance histogram of a rationale set,
//! round-tripped through the JSON-lines format.

use ctxmt::cli::scat_stats;
use ctxmt::report::to_json_lines;
use ctxmt::synth::{SynthConfig, ToyLanguage};

fn main() -> ctxmt::Result<()> {
    let lang = ToyLanguage::new(SynthConfig::default(), 1)?;
    let examples: Vec<_> = lang.documents(500, 9, "s")?.into_iter().map(|d| d.example).collect();
    let text = to_json_lines(&examples)?;
    let stats = scat_stats(&format!("{text}{{broken line\n"));
    println!("examples {} malformed {}", stats.total, stats.malformed);
    for (level, n) in &stats.levels {
        println!("context {level}: {n}");
    }
    for (d, n) in &stats.histogram.source {
        println!("distance {d}: {n} source highlights");
    }
    Ok(())
}
