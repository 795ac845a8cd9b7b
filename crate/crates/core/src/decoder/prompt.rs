use std::fmt::Write as _;

use super::{DecodeError, Setting};
use crate::domain::{DomainSpec, Query};
use crate::grammar::PlanStep;

const INSTRUCTION: &str = "You are an agent that plans how to serve a customer request. \
Write the plan as a sequence of steps, one per line, each of the form \
\"[thought] <what to do next> [API] <ApiName>()\". Follow the flow that matches the \
customer's intent, call an API only after the APIs that produce its inputs, and end \
with \"[API] Finish()\".";

/// Prompt text plus the bookkeeping the decoders need about it.
#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub text: String,
    /// Indices (into the domain's flows) of the flows shown in the prompt.
    pub flow_indices: Vec<usize>,
    /// Format exemplar units ending the prompt; they open every plan.
    pub exemplars: Vec<PlanStep>,
}

/// Instruction, API list, flows, query, then the exemplar units opening the plan.
pub fn build_prompt(domain: &DomainSpec, query: &Query, setting: Setting) -> Result<Prompt, DecodeError> {
    let flow_indices: Vec<usize> = match setting {
        Setting::AllFlows => (0..domain.flows.len()).collect(),
        Setting::RelevantFlow => {
            let i = domain
                .flow_index(&query.intent)
                .ok_or_else(|| DecodeError::UnknownIntent {
                    query: query.id.clone(),
                    intent: query.intent.clone(),
                })?;
            vec![i]
        }
    };

    let mut text = String::new();
    text.push_str(INSTRUCTION);
    text.push_str("\n\nAPIs:\n");
    for api in &domain.apis {
        let _ = writeln!(text, "- {}: {}", api.signature(), api.description);
    }
    text.push_str("\nFlows:\n");
    for &fi in &flow_indices {
        let flow = &domain.flows[fi];
        let _ = writeln!(text, "Flow for \"{}\":", flow.intent);
        for (n, step) in flow.steps.iter().enumerate() {
            let _ = writeln!(text, "{}. {}", n + 1, step.text);
        }
    }
    let _ = write!(text, "\nQuery: {}\nPlan:\n", query.text);

    let exemplars: Vec<PlanStep> = flow_indices
        .first()
        .and_then(|&fi| domain.flows[fi].steps.first())
        .map(|root| {
            root.gold_apis
                .iter()
                .map(|api| PlanStep::new(root.text.clone(), api.clone()))
                .collect()
        })
        .unwrap_or_default();
    for unit in &exemplars {
        text.push_str(&unit.render());
        text.push('\n');
    }

    Ok(Prompt {
        text,
        flow_indices,
        exemplars,
    })
}
