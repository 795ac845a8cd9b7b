//! Heuristic scores for a lookahead unit against the flow and API graphs.

use serde::Serialize;

use super::DecoderConfig;
use crate::domain::{DomainSpec, Query};
use crate::grammar::{check_format, parse_plan, PlanStep};
use crate::graph::{ApiGraph, CommitOutcome, ExecutionState, FlowGraph, StepId};
use crate::similarity::{argmax_sim, Similarity};

/// How the intended step relates to the execution state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepCase {
    /// Same step as the one under execution.
    SameStep,
    /// Permitted next step within the flow being followed.
    InFlow,
    /// Permitted, but only in a flow other than the one being followed.
    Deviating,
    NotPermitted,
}

/// How the intended API relates to the dependency graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApiCase {
    Permitted,
    Executed,
    /// Known API whose inputs are not yet produced.
    NotPermitted,
    /// Name absent from the domain; scored against its nearest API.
    Hallucinated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepScore {
    #[serde(skip)]
    pub step: Option<StepId>,
    pub text: String,
    pub similarity: f64,
    pub case: StepCase,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiScore {
    pub nearest: String,
    pub similarity: f64,
    pub case: ApiCase,
    pub h: f64,
}

/// The four unweighted heuristic components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct HeuristicParts {
    pub h_step: f64,
    pub h_api: f64,
    pub h_intent: f64,
    pub h_thought_api: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct HeuristicBreakdown {
    #[serde(flatten)]
    pub parts: HeuristicParts,
    /// Weighted sum before the format gate.
    pub h_raw: f64,
    /// `h_raw` if the unit is well formed, else 0.
    pub h_combined: f64,
    pub lm_p: f64,
    /// `(1 - lambda) * lm_p + lambda * h_combined`.
    pub total: f64,
}

/// A candidate token's unit completed by lookahead, with its scores.
#[derive(Debug, Clone, PartialEq)]
pub struct LookaheadUnit {
    pub text: String,
    pub well_formed: bool,
    pub thought: String,
    pub api_name: String,
    pub step: StepScore,
    pub api: ApiScore,
}

pub fn combine(parts: HeuristicParts, well_formed: bool, lm_p: f64, cfg: &DecoderConfig) -> HeuristicBreakdown {
    let mut h_raw = cfg.scale_a * parts.h_step
        + cfg.scale_b * parts.h_api
        + cfg.scale_c * parts.h_intent
        + cfg.scale_d * parts.h_thought_api;
    if cfg.normalize_heuristic {
        let weights = cfg.scale_a + cfg.scale_b + cfg.scale_c + cfg.scale_d;
        if weights > 0.0 {
            h_raw /= weights;
        }
    }
    let h_combined = if well_formed { h_raw } else { 0.0 };
    HeuristicBreakdown {
        parts,
        h_raw,
        h_combined,
        lm_p,
        total: (1.0 - cfg.lambda) * lm_p + cfg.lambda * h_combined,
    }
}

/// Scores units for one query against the flows shown in the prompt.
pub struct Scorer<'a> {
    domain: &'a DomainSpec,
    apis: &'a ApiGraph,
    flows: &'a FlowGraph,
    sim: &'a dyn Similarity,
    cfg: &'a DecoderConfig,
    query: &'a Query,
    step_texts: Vec<&'a str>,
}

impl<'a> Scorer<'a> {
    pub fn new(
        domain: &'a DomainSpec,
        apis: &'a ApiGraph,
        flows: &'a FlowGraph,
        sim: &'a dyn Similarity,
        cfg: &'a DecoderConfig,
        query: &'a Query,
    ) -> Self {
        Self {
            domain,
            apis,
            flows,
            sim,
            cfg,
            query,
            step_texts: flows.texts(),
        }
    }

    /// Maps the thought to its closest in-context step and weighs it by how
    /// that step fits the execution state.
    pub fn score_thought_step(&self, thought: &str, state: &ExecutionState) -> StepScore {
        let Ok((i, similarity)) = argmax_sim(self.sim, thought, &self.step_texts) else {
            return StepScore {
                step: None,
                text: String::new(),
                similarity: 0.0,
                case: StepCase::NotPermitted,
                h: 0.0,
            };
        };
        let text = self.step_texts[i];
        let flows = self.flows;
        let (step, case) = if let Some(&id) = state
            .under_execution()
            .iter()
            .find(|&&id| flows.text(id) == text)
        {
            (id, StepCase::SameStep)
        } else {
            let permitted: Vec<StepId> = flows
                .instances_of(text)
                .filter(|&id| state.is_step_permitted(id, flows))
                .collect();
            let active = state.active_flows();
            if permitted.is_empty() {
                (flows.steps()[i], StepCase::NotPermitted)
            } else if let Some(&id) = permitted.iter().find(|id| active.contains(&id.flow)) {
                (id, StepCase::InFlow)
            } else if active.is_empty() {
                (permitted[0], StepCase::InFlow)
            } else {
                (permitted[0], StepCase::Deviating)
            }
        };
        let alpha = match case {
            StepCase::SameStep => self.cfg.alpha_c,
            StepCase::InFlow => self.cfg.alpha_a,
            StepCase::Deviating => self.cfg.alpha_b,
            StepCase::NotPermitted => 0.0,
        };
        StepScore {
            step: Some(step),
            text: text.to_string(),
            similarity,
            case,
            h: alpha * similarity,
        }
    }

    /// Weighs the API by whether its dependencies are met; unknown names are
    /// matched to the nearest domain API.
    pub fn score_api(&self, api: &str, state: &ExecutionState) -> ApiScore {
        let known = self.apis.contains(api);
        let (nearest, similarity) = if known {
            (api.to_string(), self.sim.sim(api, api))
        } else {
            match argmax_sim(self.sim, api, self.apis.nodes()) {
                Ok((j, s)) => (self.apis.nodes()[j].clone(), s),
                Err(_) => (String::new(), 0.0),
            }
        };
        let case = if !known {
            ApiCase::Hallucinated
        } else if state.is_api_executed(&nearest) {
            ApiCase::Executed
        } else if self
            .apis
            .dependencies_met(&nearest, |p| state.is_api_executed(p))
        {
            ApiCase::Permitted
        } else {
            ApiCase::NotPermitted
        };
        let beta = match case {
            ApiCase::Permitted => 1.0,
            ApiCase::Executed => 0.0,
            ApiCase::NotPermitted | ApiCase::Hallucinated => self.cfg.beta_soft,
        };
        ApiScore {
            nearest,
            similarity,
            case,
            h: beta * similarity,
        }
    }

    pub fn score_thought_intent(&self, thought: &str) -> f64 {
        self.sim.sim(thought, &self.query.text)
    }

    /// Similarity of the thought to the API description (or to the raw name
    /// for unknown APIs).
    pub fn score_thought_api(&self, thought: &str, api: &str) -> f64 {
        match self.domain.api(api) {
            Some(spec) => self.sim.sim(thought, &spec.description),
            None => self.sim.sim(thought, api),
        }
    }

    /// Scores one unit of text (a lookahead completion or a generated unit).
    pub fn score_unit(
        &self,
        text: &str,
        lm_p: f64,
        state: &ExecutionState,
    ) -> (Option<LookaheadUnit>, HeuristicBreakdown) {
        let well_formed = check_format(text);
        let parsed = parse_plan(text).ok().and_then(|p| p.steps.into_iter().next());
        let Some(unit) = parsed else {
            return (None, combine(HeuristicParts::default(), false, lm_p, self.cfg));
        };
        let step = self.score_thought_step(&unit.thought, state);
        let api = self.score_api(&unit.api_name, state);
        let parts = HeuristicParts {
            h_step: step.h,
            h_api: api.h,
            h_intent: self.score_thought_intent(&unit.thought),
            h_thought_api: self.score_thought_api(&unit.thought, &unit.api_name),
        };
        let breakdown = combine(parts, well_formed, lm_p, self.cfg);
        let lookahead = LookaheadUnit {
            text: text.to_string(),
            well_formed,
            thought: unit.thought,
            api_name: unit.api_name,
            step,
            api,
        };
        (Some(lookahead), breakdown)
    }

    /// Advances the execution state past a generated unit. The API is
    /// recorded even when its step is not permitted.
    pub fn commit(&self, state: &mut ExecutionState, unit: &PlanStep) -> (StepScore, CommitOutcome) {
        let step = self.score_thought_step(&unit.thought, state);
        let outcome = match step.step {
            Some(id) => {
                let mut outcome = state.commit_unit(id, Some(&unit.api_name), self.flows, self.apis);
                if !outcome.step_permitted {
                    outcome.api_recorded = state.record_api(&unit.api_name, self.apis);
                }
                outcome
            }
            None => CommitOutcome {
                step_permitted: false,
                api_recorded: state.record_api(&unit.api_name, self.apis),
            },
        };
        (step, outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::shipped;
    use crate::similarity::LexicalSimilarity;

    struct Fixture {
        domain: DomainSpec,
        apis: ApiGraph,
        flows: FlowGraph,
        cfg: DecoderConfig,
    }

    fn trip() -> Fixture {
        let domain = shipped::trip_booking();
        let apis = ApiGraph::build(&domain).unwrap();
        let flows = FlowGraph::build(&domain);
        Fixture {
            domain,
            apis,
            flows,
            cfg: DecoderConfig::default(),
        }
    }

    impl Fixture {
        fn scorer<'a>(&'a self, sim: &'a LexicalSimilarity) -> Scorer<'a> {
            let q = self.domain.queries.iter().find(|q| q.intent == "book flight").unwrap();
            Scorer::new(&self.domain, &self.apis, &self.flows, sim, &self.cfg, q)
        }
    }

    fn commit_all(s: &Scorer, state: &mut ExecutionState, units: &[(&str, &str)]) {
        for (t, a) in units {
            let (_, outcome) = s.commit(state, &PlanStep::new(*t, *a));
            assert!(outcome.step_permitted, "{t}");
        }
    }

    const START: &str = "Start processing the requests from the customer";

    #[test]
    fn getairports_after_start_is_permitted_and_scores_one() {
        let f = trip();
        let sim = LexicalSimilarity::default();
        let s = f.scorer(&sim);
        let mut st = ExecutionState::new();
        commit_all(&s, &mut st, &[(START, "InitSystem"), (START, "Start")]);
        let a = s.score_api("GetAirports", &st);
        assert_eq!(a.case, ApiCase::Permitted);
        assert_eq!(a.h, 1.0);
        let c = s.score_api("Confirm", &st);
        assert_eq!(c.case, ApiCase::Permitted);
        let o = s.score_api("OrderTrip", &st);
        assert_eq!(o.case, ApiCase::NotPermitted);
        assert!((o.h - 0.1).abs() < 1e-12);
    }

    #[test]
    fn executed_api_scores_zero() {
        let f = trip();
        let sim = LexicalSimilarity::default();
        let s = f.scorer(&sim);
        let mut st = ExecutionState::new();
        commit_all(
            &s,
            &mut st,
            &[
                (START, "InitSystem"),
                (START, "Start"),
                ("Suggest flights to the customer", "GetAirports"),
                ("Confirm and create the trip", "Confirm"),
            ],
        );
        let c = s.score_api("Confirm", &st);
        assert_eq!((c.case, c.h), (ApiCase::Executed, 0.0));
    }

    #[test]
    fn hallucinated_api_gets_soft_weight_times_nearest_similarity() {
        let f = trip();
        let sim = LexicalSimilarity::default();
        let s = f.scorer(&sim);
        let st = ExecutionState::new();
        let a = s.score_api("BookPlane", &st);
        assert_eq!(a.case, ApiCase::Hallucinated);
        // no API shares a content word with "book plane": nearest is the first node
        assert_eq!(a.similarity, 0.0);
        assert_eq!(a.h, 0.0);
        let b = s.score_api("FindFlightTicket", &st);
        assert_eq!(b.nearest, "FindFlight");
        // {find, flight, ticket} vs {find, flight}
        assert!((b.similarity - 2.0 / 3.0).abs() < 1e-12);
        assert!((b.h - 0.2 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn step_cases() {
        let f = trip();
        let sim = LexicalSimilarity::default();
        let s = f.scorer(&sim);
        let mut st = ExecutionState::new();
        let root = s.score_thought_step(START, &st);
        assert_eq!((root.case, root.h), (StepCase::InFlow, 0.5));
        commit_all(&s, &mut st, &[(START, "InitSystem")]);
        let same = s.score_thought_step(START, &st);
        assert_eq!((same.case, same.h), (StepCase::SameStep, 1.0));
        let jump = s.score_thought_step("Order the trip", &st);
        assert_eq!((jump.case, jump.h), (StepCase::NotPermitted, 0.0));
        commit_all(&s, &mut st, &[("Suggest flights to the customer", "GetAirports")]);
        assert_eq!(st.committed_flow(), Some(1));
        let next = s.score_thought_step("Confirm and create the trip", &st);
        assert_eq!((next.case, next.h), (StepCase::InFlow, 0.5));
        // "Suggest cars" follows the shared root, so it is permitted but leaves the flow
        let other = s.score_thought_step("Suggest cars to the customer", &st);
        assert_eq!((other.case, other.h), (StepCase::Deviating, 0.1));
    }

    #[test]
    fn deviation_into_parallel_flow_uses_alpha_b() {
        // two flows that share a first step, then diverge and share a later text
        let src = r#"
name = "Mini"
[[apis]]
name = "A"
inputs = []
outputs = []
description = "a"
[[flows]]
intent = "x"
[[flows.steps]]
text = "open the session"
gold_apis = ["A"]
[[flows.steps]]
text = "pick red"
gold_apis = ["A"]
[[flows]]
intent = "y"
[[flows.steps]]
text = "open the session"
gold_apis = ["A"]
[[flows.steps]]
text = "pick blue"
gold_apis = ["A"]
"#;
        let domain = crate::domain::parse_domain(src).unwrap();
        let apis = ApiGraph::build(&domain).unwrap();
        let flows = FlowGraph::build(&domain);
        let cfg = DecoderConfig::default();
        let sim = LexicalSimilarity::default();
        let q = Query {
            id: "q".into(),
            text: "red please".into(),
            intent: "x".into(),
            provenance: crate::domain::Provenance::Synthetic,
        };
        let s = Scorer::new(&domain, &apis, &flows, &sim, &cfg, &q);
        let mut st = ExecutionState::new();
        commit_all(&s, &mut st, &[("open the session", "A")]);
        assert_eq!(st.active_flows().len(), 2);
        let red = s.score_thought_step("pick red", &st);
        assert_eq!(red.case, StepCase::InFlow);
        commit_all(&s, &mut st, &[("pick red", "A")]);
        assert_eq!(st.committed_flow(), Some(0));
        let blue = s.score_thought_step("pick blue", &st);
        assert_eq!(blue.case, StepCase::Deviating);
        assert!((blue.h - 0.1 * blue.similarity).abs() < 1e-12);
    }

    #[test]
    fn format_gate_zeroes_heuristic() {
        let cfg = DecoderConfig::default();
        let parts = HeuristicParts {
            h_step: 0.5,
            h_api: 1.0,
            h_intent: 0.2,
            h_thought_api: 0.3,
        };
        let ok = combine(parts, true, 0.4, &cfg);
        assert!((ok.h_raw - 2.0).abs() < 1e-12);
        assert!((ok.total - (0.3 * 0.4 + 0.7 * 2.0)).abs() < 1e-12);
        let bad = combine(parts, false, 0.4, &cfg);
        assert_eq!(bad.h_combined, 0.0);
        assert!((bad.total - 0.3 * 0.4).abs() < 1e-12);
        let norm = combine(parts, true, 0.4, &DecoderConfig { normalize_heuristic: true, ..cfg });
        assert!((norm.h_combined - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unit_scoring_matches_components() {
        let f = trip();
        let sim = LexicalSimilarity::default();
        let s = f.scorer(&sim);
        let mut st = ExecutionState::new();
        commit_all(&s, &mut st, &[(START, "InitSystem"), (START, "Start")]);
        let text = "[thought] Suggest flights to the customer [API] GetAirports()";
        let (unit, b) = s.score_unit(text, 0.25, &st);
        let unit = unit.unwrap();
        assert!(unit.well_formed);
        assert_eq!(unit.step.case, StepCase::InFlow);
        assert_eq!(b.parts.h_step, 0.5);
        assert_eq!(b.parts.h_api, 1.0);
        let expect = 0.5 + 1.0 + b.parts.h_intent + b.parts.h_thought_api;
        assert!((b.h_combined - expect).abs() < 1e-12);
        let (none, b2) = s.score_unit("no unit here", 0.25, &st);
        assert!(none.is_none());
        assert!((b2.total - 0.075).abs() < 1e-12);
    }
}
