//! Plan-quality metrics against gold plans and the dependency graphs.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::domain::{DomainSpec, Flow};
use crate::grammar::{parse_plan, Plan, PlanStep, FINISH_API};
use crate::graph::{ApiGraph, FlowGraph, GraphError};
use crate::similarity::{argmax_sim, Similarity};

/// Units that open and close every plan regardless of intent.
pub const DUMMY_APIS: [&str; 3] = ["InitSystem", "Start", FINISH_API];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("nothing to aggregate")]
    Empty,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn counts<'a>(items: impl IntoIterator<Item = &'a str>) -> BTreeMap<&'a str, usize> {
    let mut m = BTreeMap::new();
    for i in items {
        *m.entry(i).or_insert(0) += 1;
    }
    m
}

/// Size of the multiset symmetric difference.
pub fn multiset_edits(a: &[&str], b: &[&str]) -> usize {
    let ca = counts(a.iter().copied());
    let cb = counts(b.iter().copied());
    let keys: BTreeSet<&str> = ca.keys().chain(cb.keys()).copied().collect();
    keys.into_iter()
        .map(|k| ca.get(k).copied().unwrap_or(0).abs_diff(cb.get(k).copied().unwrap_or(0)))
        .sum()
}

/// API additions plus deletions needed to turn the plan into the gold plan.
pub fn edits_apis(plan_apis: &[&str], gold_apis: &[&str]) -> usize {
    multiset_edits(plan_apis, gold_apis)
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Share of known-API occurrences whose inputs were not produced earlier in
/// the plan. Unknown names are skipped entirely.
pub fn inconsistent_apis(plan_apis: &[&str], g: &ApiGraph) -> f64 {
    let mut executed: BTreeSet<&str> = BTreeSet::new();
    let mut known = 0;
    let mut bad = 0;
    for &api in plan_apis {
        if !g.contains(api) {
            continue;
        }
        known += 1;
        if !g.dependencies_met(api, |p| executed.contains(p)) {
            bad += 1;
        }
        executed.insert(api);
    }
    pct(bad, known)
}

pub fn hallucination_pct(plan_apis: &[&str], d: &DomainSpec) -> f64 {
    let unknown = plan_apis.iter().filter(|a| !d.has_api(a)).count();
    pct(unknown, plan_apis.len())
}

/// Share of API occurrences repeating an earlier occurrence of the same name.
pub fn repetition_pct(plan_apis: &[&str]) -> f64 {
    let mut seen = BTreeSet::new();
    let repeats = plan_apis.iter().filter(|a| !seen.insert(**a)).count();
    pct(repeats, plan_apis.len())
}

/// Share of raw outputs that contain at least one well-formed unit.
pub fn parsability<S: AsRef<str>>(texts: &[S]) -> f64 {
    let ok = texts.iter().filter(|t| parse_plan(t.as_ref()).is_ok()).count();
    pct(ok, texts.len())
}

/// Maps each thought to its most similar step text, merging consecutive
/// thoughts that land on the same step.
pub fn map_thoughts<'s>(thoughts: &[&str], step_texts: &[&'s str], sim: &dyn Similarity) -> Vec<&'s str> {
    let mut out: Vec<&'s str> = Vec::new();
    for t in thoughts {
        let Ok((i, _)) = argmax_sim(sim, t, step_texts) else {
            continue;
        };
        if out.last() != Some(&step_texts[i]) {
            out.push(step_texts[i]);
        }
    }
    out
}

/// Step additions plus deletions against the gold flow, on mapped steps.
pub fn edits_steps(mapped: &[&str], gold_flow: &Flow) -> usize {
    let gold: Vec<&str> = gold_flow.steps.iter().map(|s| s.text.as_str()).collect();
    multiset_edits(mapped, &gold)
}

/// Share of mapped step occurrences that are neither a flow root nor preceded
/// by their parent step.
pub fn inconsistent_steps(mapped: &[&str], g: &FlowGraph) -> f64 {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut bad = 0;
    for &t in mapped {
        let ok = g
            .instances_of(t)
            .any(|id| g.parent(id).is_none_or(|p| seen.contains(g.text(p))));
        if !ok {
            bad += 1;
        }
        seen.insert(t);
    }
    pct(bad, mapped.len())
}

/// Metrics of one parsable plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanScores {
    pub thought_count: usize,
    pub api_count: usize,
    pub repetition_pct: f64,
    pub hallucination_pct: f64,
    pub edits_steps: usize,
    pub edits_apis: usize,
    pub inconsistent_steps_pct: f64,
    pub inconsistent_apis_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanMetrics {
    pub parsable: bool,
    /// Absent for unparsable plans.
    pub scores: Option<PlanScores>,
}

/// The gold plan of a flow: one unit per gold API, thought = step text.
pub fn gold_plan(flow: &Flow) -> Plan {
    Plan::from_steps(
        flow.steps
            .iter()
            .flat_map(|s| s.gold_apis.iter().map(move |a| PlanStep::new(s.text.clone(), a.clone())))
            .collect(),
    )
}

/// Scores plans of one domain.
pub struct Evaluator<'a> {
    domain: &'a DomainSpec,
    sim: &'a dyn Similarity,
    apis: ApiGraph,
    flows: FlowGraph,
    /// Leave `InitSystem`, `Start` and `Finish` units out of the per-plan counts.
    pub strip_dummies: bool,
}

impl<'a> Evaluator<'a> {
    pub fn new(domain: &'a DomainSpec, sim: &'a dyn Similarity) -> Result<Self, EvalError> {
        Ok(Self {
            domain,
            sim,
            apis: ApiGraph::build(domain)?,
            flows: FlowGraph::build(domain),
            strip_dummies: false,
        })
    }

    pub fn evaluate_text(&self, text: &str, gold_flow: &Flow) -> PlanMetrics {
        match parse_plan(text) {
            Ok(plan) => PlanMetrics {
                parsable: true,
                scores: Some(self.evaluate(&plan, gold_flow)),
            },
            Err(_) => PlanMetrics {
                parsable: false,
                scores: None,
            },
        }
    }

    pub fn evaluate(&self, plan: &Plan, gold_flow: &Flow) -> PlanScores {
        let apis = plan.api_names();
        let gold_apis = gold_flow.gold_apis();
        let step_texts = self.flows.texts();
        let mapped = map_thoughts(&plan.thoughts(), &step_texts, self.sim);
        let counted = plan
            .steps
            .iter()
            .filter(|s| !(self.strip_dummies && DUMMY_APIS.contains(&s.api_name.as_str())))
            .count();
        PlanScores {
            thought_count: counted,
            api_count: counted,
            repetition_pct: repetition_pct(&apis),
            hallucination_pct: hallucination_pct(&apis, self.domain),
            edits_steps: edits_steps(&mapped, gold_flow),
            edits_apis: edits_apis(&apis, &gold_apis),
            inconsistent_steps_pct: inconsistent_steps(&mapped, &self.flows),
            inconsistent_apis_pct: inconsistent_apis(&apis, &self.apis),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(xs: &[f64]) -> Option<MeanStd> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() < 2 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some(MeanStd { mean, std })
}

/// Mean and sample standard deviation of each metric over the parsable plans.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub plans: usize,
    pub parsable_pct: f64,
    pub thought_count: Option<MeanStd>,
    pub api_count: Option<MeanStd>,
    pub repetition_pct: Option<MeanStd>,
    pub hallucination_pct: Option<MeanStd>,
    pub edits_steps: Option<MeanStd>,
    pub edits_apis: Option<MeanStd>,
    pub inconsistent_steps_pct: Option<MeanStd>,
    pub inconsistent_apis_pct: Option<MeanStd>,
}

pub fn aggregate(reports: &[PlanMetrics]) -> Result<Aggregate, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::Empty);
    }
    let scores: Vec<&PlanScores> = reports.iter().filter_map(|r| r.scores.as_ref()).collect();
    let col = |f: fn(&PlanScores) -> f64| mean_std(&scores.iter().map(|s| f(s)).collect::<Vec<_>>());
    Ok(Aggregate {
        plans: reports.len(),
        parsable_pct: pct(reports.iter().filter(|r| r.parsable).count(), reports.len()),
        thought_count: col(|s| s.thought_count as f64),
        api_count: col(|s| s.api_count as f64),
        repetition_pct: col(|s| s.repetition_pct),
        hallucination_pct: col(|s| s.hallucination_pct),
        edits_steps: col(|s| s.edits_steps as f64),
        edits_apis: col(|s| s.edits_apis as f64),
        inconsistent_steps_pct: col(|s| s.inconsistent_steps_pct),
        inconsistent_apis_pct: col(|s| s.inconsistent_apis_pct),
    })
}
