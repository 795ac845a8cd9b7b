//! Lookahead-heuristic constrained decoding.
//!
//! At each constrained position the top-k next tokens are extended by a
//! greedy rollout to the end of the current unit, each completed unit is
//! scored against the flow and dependency graphs, and the token maximizing
//! `(1 - lambda) * P(token) + lambda * H` is emitted.

use serde::Serialize;

use super::heuristics::{ApiCase, HeuristicBreakdown, Scorer, StepCase};
use super::prompt::build_prompt;
use super::{unit_is_terminal, DecodeError, Decoded, DecoderConfig, Generator, StopReason};
use crate::domain::{DomainSpec, Query};
use crate::grammar::{parse_plan, unit_end};
use crate::graph::{ApiGraph, ExecutionState, FlowGraph};
use crate::lm::{LanguageModel, TokenProb};
use crate::similarity::Similarity;

/// Stop pattern for lookahead rollouts: the end of an API call.
const ROLLOUT_STOP: &str = "()";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateTrace {
    pub token: String,
    pub lm_p: f64,
    pub h_combined: f64,
    pub total: f64,
    /// The unit as completed by lookahead.
    pub lookahead: String,
}

/// Scoring record for one generated unit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitTrace {
    pub unit_index: usize,
    pub thought: String,
    pub api: String,
    pub intended_step: String,
    pub step_similarity: f64,
    pub step_case: StepCase,
    pub nearest_api: String,
    pub api_similarity: f64,
    pub api_case: ApiCase,
    #[serde(flatten)]
    pub scores: HeuristicBreakdown,
    pub step_permitted: bool,
    /// Permitted APIs just before this unit was committed.
    pub permitted_apis: Vec<String>,
    /// The last constrained decision inside this unit that had a choice.
    pub candidates: Vec<CandidateTrace>,
}

struct Decision {
    token: String,
    prob: f64,
    candidates: Vec<CandidateTrace>,
}

fn select(
    lm: &dyn LanguageModel,
    scorer: &Scorer,
    state: &ExecutionState,
    gen: &Generator,
    entries: &[TokenProb],
    cfg: &DecoderConfig,
) -> Result<Decision, DecodeError> {
    let mut candidates = Vec::with_capacity(entries.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, entry) in entries.iter().enumerate() {
        let mut unit = format!("{}{}", gen.partial_unit(), entry.token);
        if unit_end(&unit).is_none() {
            let ctx = format!("{}{}", gen.context(), entry.token);
            let rollout = lm.rollout_greedy(&ctx, cfg.lookahead, ROLLOUT_STOP)?;
            unit.push_str(&rollout.text);
        }
        if let Some(end) = unit_end(&unit) {
            unit.truncate(end);
        }
        let (_, b) = scorer.score_unit(&unit, entry.prob, state);
        // entries arrive by descending probability then token, so keeping the
        // first maximum breaks ties the same way
        if best.is_none_or(|(_, s)| b.total > s) {
            best = Some((i, b.total));
        }
        candidates.push(CandidateTrace {
            token: entry.token.clone(),
            lm_p: entry.prob,
            h_combined: b.h_combined,
            total: b.total,
            lookahead: unit,
        });
    }
    let (i, _) = best.expect("select called with candidates");
    Ok(Decision {
        token: entries[i].token.clone(),
        prob: entries[i].prob,
        candidates,
    })
}

pub fn flap_decode(
    lm: &dyn LanguageModel,
    sim: &dyn Similarity,
    domain: &DomainSpec,
    query: &Query,
    cfg: &DecoderConfig,
) -> Result<Decoded, DecodeError> {
    cfg.validate()?;
    let prompt = build_prompt(domain, query, cfg.setting)?;
    let apis = ApiGraph::build(domain)?;
    let flows = FlowGraph::from_flows(prompt.flow_indices.iter().map(|&i| &domain.flows[i]));
    let scorer = Scorer::new(domain, &apis, &flows, sim, cfg, query);

    let mut state = ExecutionState::new();
    for unit in &prompt.exemplars {
        scorer.commit(&mut state, unit);
    }

    let mut gen = Generator::new(&prompt.text);
    let mut trace = Vec::new();
    let mut last: Option<Decision> = None;
    let mut unit_index = 0;
    let stop = loop {
        if let Some(stop) = gen.limit_reached(cfg) {
            break stop;
        }
        let constrained = gen.tokens().len().is_multiple_of(cfg.stride);
        let dist = lm.next_distribution(gen.context(), if constrained { cfg.top_k } else { 1 })?;
        if dist.is_empty() {
            break StopReason::Exhausted;
        }
        let (token, prob) = if constrained {
            let d = select(lm, &scorer, &state, &gen, dist.entries(), cfg)?;
            let chosen = (d.token.clone(), d.prob);
            if last.is_none() || d.candidates.len() > 1 {
                last = Some(d);
            }
            chosen
        } else {
            let top = &dist.entries()[0];
            (top.token.clone(), top.prob)
        };
        let Some(unit_text) = gen.push(&token) else {
            continue;
        };
        let index = unit_index;
        unit_index += 1;
        let candidates = last.take().map(|d| d.candidates).unwrap_or_default();
        let Some(step) = parse_plan(&unit_text).ok().and_then(|p| p.steps.into_iter().next()) else {
            log::debug!("unit {index} does not parse: {unit_text:?}");
            continue;
        };
        let permitted_apis: Vec<String> = state.permitted_apis(&apis).into_iter().collect();
        let (Some(scored), scores) = scorer.score_unit(&unit_text, prob, &state) else {
            continue;
        };
        let (_, outcome) = scorer.commit(&mut state, &step);
        trace.push(UnitTrace {
            unit_index: index,
            thought: scored.thought,
            api: scored.api_name,
            intended_step: scored.step.text,
            step_similarity: scored.step.similarity,
            step_case: scored.step.case,
            nearest_api: scored.api.nearest,
            api_similarity: scored.api.similarity,
            api_case: scored.api.case,
            scores,
            step_permitted: outcome.step_permitted,
            permitted_apis,
            candidates,
        });
        if unit_is_terminal(&unit_text) {
            state.finish();
            break StopReason::Finished;
        }
    };
    let mut out = gen.into_decoded(stop);
    out.trace = trace;
    Ok(out)
}
