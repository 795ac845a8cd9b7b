//! Score gold plans and a hand-written faulty plan, then run the evaluation
//! harness over every shipped query with the gold replay decoder.
//!
//!     cargo run --example evaluate_gold -- [output dir]

use flowplan::domain::shipped;
use flowplan::eval::{gold_plan, Evaluator};
use flowplan::runner::{cmd_evaluate, summary_table, DecoderKind, RunConfig};
use flowplan::{parse_plan, LexicalSimilarity, Setting};

fn main() -> anyhow::Result<()> {
    let d = shipped::trip_booking();
    let sim = LexicalSimilarity::default();
    let ev = Evaluator::new(&d, &sim)?;
    let flow = d.flow("book flight").expect("shipped flow");

    let gold = ev.evaluate(&gold_plan(flow), flow);
    println!("gold plan of {:?}: {gold:?}\n", flow.intent);

    // Orders before confirming, repeats a search and calls an API that does not exist.
    let faulty = parse_plan(
        "[thought] Suggest flights to the customer [API] FindFlight()\n\
         [thought] Suggest flights to the customer [API] FindFlight()\n\
         [thought] Order the trip [API] OrderTrip()\n\
         [thought] Confirm and create the trip [API] BookEverything()\n\
         [thought] Finish processing request [API] Finish()",
    )?;
    let s = ev.evaluate(&faulty, flow);
    println!(
        "faulty plan: edits steps {} / APIs {}, inconsistent steps {:.1}% / APIs {:.1}%, \
         repetition {:.1}%, hallucination {:.1}%\n",
        s.edits_steps, s.edits_apis, s.inconsistent_steps_pct, s.inconsistent_apis_pct, s.repetition_pct, s.hallucination_pct
    );

    let cfg = RunConfig {
        decoders: vec![DecoderKind::Gold],
        settings: vec![Setting::AllFlows, Setting::RelevantFlow],
        output: std::env::args().nth(1).map(Into::into),
        ..RunConfig::default()
    };
    let report = cmd_evaluate(&cfg)?;
    println!("{} records", report.records.len());
    print!("{}", summary_table(&report.summary));
    Ok(())
}
