//! Load a domain (a TOML path or a shipped name) and report schema problems.
//!
//!     cargo run --example validate_domain -- banking
//!     cargo run --example validate_domain -- path/to/domain.toml

use flowplan::domain::{parse_domain, validate_domain};
use flowplan::runner::load_domain;

fn main() -> anyhow::Result<()> {
    let arg = std::env::args().nth(1).unwrap_or_else(|| "trip_booking".into());
    let d = load_domain(&arg)?;
    println!(
        "{}: {} APIs, {} flows, {} queries",
        d.name,
        d.apis.len(),
        d.flows.len(),
        d.queries.len()
    );
    for f in &d.flows {
        println!("  {:<28} {} steps, {} gold APIs", f.intent, f.steps.len(), f.gold_apis().len());
    }
    println!("issues: {}", validate_domain(&d).len());

    // A flow step that names an API the domain does not define.
    let broken = d.to_toml()?.replacen("gold_apis = [\"", "gold_apis = [\"NoSuchApi\", \"", 1);
    match parse_domain(&broken) {
        Ok(_) => println!("unexpectedly valid"),
        Err(e) => println!("edited copy rejected: {e}"),
    }
    Ok(())
}
