//! Build the API dependency graph and replay an API sequence against it.
//!
//!     cargo run --example dependency_graph -- trip_booking [--dot]

use flowplan::runner::load_domain;
use flowplan::{ApiGraph, FlowGraph};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "trip_booking".into());
    let dot = args.any(|a| a == "--dot");
    let d = load_domain(&name)?;
    let g = ApiGraph::build(&d)?;
    if dot {
        print!("{}", g.to_dot());
        return Ok(());
    }
    println!("{}: {} APIs, {} edges", d.name, g.nodes().len(), g.edges().len());
    print!("{}", g.to_table());

    let flows = FlowGraph::build(&d);
    println!("\nflow graph: {} flows, {} parent links", flows.flow_count(), flows.edge_count());

    // Each API is checked against what ran before it.
    let flow = &d.flows[0];
    let mut done: Vec<&str> = Vec::new();
    println!("\ngold APIs of {:?}:", flow.intent);
    for api in flow.gold_apis() {
        let ok = g.dependencies_met(api, |p| done.contains(&p));
        println!("  {api:<28} {}", if ok { "inputs available" } else { "MISSING INPUTS" });
        done.push(api);
    }
    Ok(())
}
