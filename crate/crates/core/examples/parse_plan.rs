//! The plan grammar: parse generated text into units, and check fragments.
//!
//!     cargo run --example parse_plan

use flowplan::grammar::{check_format, unit_end};
use flowplan::parse_plan;

const TEXT: &str = "\
[thought] Start processing the requests from the customer [API] Start()
[thought] Suggest flights to the customer [API] GetAirports()
some stray words the parser skips
[thought] Suggest flights to the customer [API] FindFlight()
[thought] Finish processing request [API] Finish()
[thought] Trailing partial unit [API] Get";

fn main() -> anyhow::Result<()> {
    let plan = parse_plan(TEXT)?;
    println!("{} units, terminated: {}", plan.steps.len(), plan.terminated);
    for s in &plan.steps {
        println!("  {:<56} -> {}", s.thought, s.api_name);
    }
    println!("\ncanonical form:\n{}", plan.serialize());

    for fragment in [
        "[thought] Order the trip [API] OrderTrip()",
        "[thought] [API] OrderTrip()",
        "[thought] Order the trip [API] OrderTrip",
        "[thought] a [API] A() [thought] b [API] B()",
    ] {
        println!("check_format({fragment:?}) = {}", check_format(fragment));
    }

    let partial = "[thought] Order the trip [API] OrderTrip() and more";
    let end = unit_end(partial).unwrap();
    println!("\nunit_end cuts {:?}", &partial[..end]);
    Ok(())
}
