//! The table-driven language model used for tests and offline runs.
//!
//!     cargo run --example scripted_lm -- [fixture.toml]

use flowplan::lm::tokenize;
use flowplan::{LanguageModel, ScriptedLm};

const INLINE: &str = r#"
fallback = "uniform"
vocab = ["[thought]", " hello"]

[[rules]]
match_suffix = "Plan:\n"
dist = { "[thought]" = 0.9, " hello" = 0.1 }

[[rules]]
after = "Plan:\n[thought]"
text = " Greet the customer [API] Start()"
"#;

fn main() -> anyhow::Result<()> {
    let lm = match std::env::args().nth(1) {
        Some(path) => ScriptedLm::load(path)?,
        None => ScriptedLm::from_fixture(INLINE)?,
    };
    println!("model: {:?}, {} rules", lm.info().model, lm.rules().len());

    let ctx = "Plan:\n";
    for e in lm.next_distribution(ctx, 5)?.entries() {
        println!("  p({:?}) = {:.2}", e.token, e.prob);
    }
    let r = lm.rollout_greedy(ctx, 32, "()")?;
    println!("greedy rollout: {:?} (stopped at \"()\": {})", r.text, r.stopped);
    println!("tokens: {:?}", tokenize(&r.text));

    // Unmatched contexts fall back to a uniform distribution over the vocabulary.
    println!("fallback: {:?}", lm.next_distribution("???", 5)?.entries());
    Ok(())
}
