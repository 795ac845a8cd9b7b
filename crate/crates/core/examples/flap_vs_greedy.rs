//! Greedy decoding versus lookahead-constrained decoding on a scripted model
//! that prefers to call APIs before their inputs exist.
//!
//!     cargo run --example flap_vs_greedy -- [query id] [lambda]

use std::path::Path;

use flowplan::decoder::{build_prompt, greedy_decode};
use flowplan::domain::shipped;
use flowplan::eval::Evaluator;
use flowplan::{flap_decode, parse_plan, DecoderConfig, LexicalSimilarity, ScriptedLm};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let id = args.next().unwrap_or_else(|| "trip-car-1".into());
    let lambda: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.7);

    let (domain, query) = shipped::all()
        .into_iter()
        .find_map(|d| d.query(&id).cloned().map(|q| (d, q)))
        .ok_or_else(|| anyhow::anyhow!("unknown query {id}"))?;
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("data/fixtures/adversarial/{id}.toml"));
    let lm = ScriptedLm::load(fixture)?;
    let sim = LexicalSimilarity::default();
    let cfg = DecoderConfig {
        lambda,
        ..DecoderConfig::default()
    };
    println!("query: {}\n", query.text);

    let prompt = build_prompt(&domain, &query, cfg.setting)?;
    let exemplars: String = prompt.exemplars.iter().map(|u| u.render() + "\n").collect();
    let greedy = greedy_decode(&lm, &prompt.text, &cfg)?;
    let flap = flap_decode(&lm, &sim, &domain, &query, &cfg)?;

    let ev = Evaluator::new(&domain, &sim)?;
    let flow = domain.flow(&query.intent).expect("shipped queries have flows");
    for (name, out) in [("greedy", &greedy), ("flap", &flap)] {
        let scores = ev.evaluate(&parse_plan(&(exemplars.clone() + &out.completion))?, flow);
        println!("== {name} ({:?}, {} tokens)", out.stop, out.tokens.len());
        println!("{}", out.completion);
        println!(
            "inconsistent APIs {:.1}%, inconsistent steps {:.1}%, API edits {}\n",
            scores.inconsistent_apis_pct, scores.inconsistent_steps_pct, scores.edits_apis
        );
    }

    println!("flap trace:");
    for t in &flap.trace {
        println!(
            "  #{:<2} {:<22} step {:<13} api {:<13} H={:.3} S={:.3}",
            t.unit_index,
            t.api,
            format!("{:?}", t.step_case),
            format!("{:?}", t.api_case),
            t.scores.h_combined,
            t.scores.total
        );
        for c in t.candidates.iter().filter(|_| t.candidates.len() > 1) {
            println!("       {:<14?} p={:.2} S={:.3}  {}", c.token, c.lm_p, c.total, c.lookahead.trim());
        }
    }
    Ok(())
}
