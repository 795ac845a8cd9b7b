//! Greedy, beam search and nucleus sampling on a small scripted tree where
//! the locally best first unit leads to a less probable plan.
//!
//!     cargo run --example baselines

use std::path::Path;

use flowplan::decoder::{beam_decode, greedy_decode, nucleus_decode};
use flowplan::{DecoderConfig, ScriptedLm};

fn main() -> anyhow::Result<()> {
    let lm = ScriptedLm::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fixtures/misc/tree.toml"))?;
    let prompt = "Plan:\n";
    let cfg = DecoderConfig::default();

    let g = greedy_decode(&lm, prompt, &cfg)?;
    println!("greedy:\n{}\n", g.completion);

    let b = beam_decode(&lm, prompt, &cfg)?;
    println!("beam ({} beams), log p = {:.3}:\n{}\n", cfg.beams, b.log_prob.unwrap_or(f64::NAN), b.completion);

    println!("nucleus, top_p = 1.0, seeds 0..8:");
    for seed in 0..8 {
        let c = DecoderConfig {
            seed,
            top_p: 1.0,
            ..cfg.clone()
        };
        let n = nucleus_decode(&lm, prompt, &c)?;
        println!("  seed {seed}: {}", n.completion.replace('\n', " | "));
    }
    Ok(())
}
