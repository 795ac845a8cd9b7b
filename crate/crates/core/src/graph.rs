//! API and flow-step dependency graphs, plus the execution state tracked
//! while a plan is being generated.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::domain::DomainSpec;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("dependency cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiEdge {
    pub consumer: String,
    pub producer: String,
    pub parameter: String,
    pub slot: usize,
}

/// Input-output parameter dependencies among the APIs of one domain.
#[derive(Debug, Clone)]
pub struct ApiGraph {
    domain: String,
    nodes: Vec<String>,
    edges: Vec<ApiEdge>,
    /// Per API, one producer set per input slot.
    slots: BTreeMap<String, Vec<BTreeSet<String>>>,
}

impl ApiGraph {
    pub fn build(d: &DomainSpec) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        let mut slots = BTreeMap::new();
        for consumer in &d.apis {
            let mut per_slot = Vec::with_capacity(consumer.inputs.len());
            for (slot_idx, slot) in consumer.inputs.iter().enumerate() {
                let mut producers = BTreeSet::new();
                for producer in &d.apis {
                    for param in &slot.alternatives {
                        if producer.produces(param) {
                            producers.insert(producer.name.clone());
                            edges.push(ApiEdge {
                                consumer: consumer.name.clone(),
                                producer: producer.name.clone(),
                                parameter: param.clone(),
                                slot: slot_idx,
                            });
                        }
                    }
                }
                per_slot.push(producers);
            }
            slots.insert(consumer.name.clone(), per_slot);
        }
        let graph = Self {
            domain: d.name.clone(),
            nodes: d.apis.iter().map(|a| a.name.clone()).collect(),
            edges,
            slots,
        };
        if let Some(cycle) = graph.find_cycle() {
            return Err(GraphError::Cycle(cycle));
        }
        Ok(graph)
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[ApiEdge] {
        &self.edges
    }

    pub fn contains(&self, api: &str) -> bool {
        self.slots.contains_key(api)
    }

    /// Producer sets of `api`'s input slots; `None` for unknown APIs.
    pub fn slots(&self, api: &str) -> Option<&[BTreeSet<String>]> {
        self.slots.get(api).map(Vec::as_slice)
    }

    /// Whether every input slot of `api` is either unproducible or has a
    /// producer for which `executed` holds.
    pub fn dependencies_met(&self, api: &str, executed: impl Fn(&str) -> bool) -> bool {
        match self.slots.get(api) {
            Some(slots) => slots
                .iter()
                .all(|producers| producers.is_empty() || producers.iter().any(|p| executed(p))),
            None => false,
        }
    }

    fn find_cycle(&self) -> Option<Vec<String>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let index: BTreeMap<&str, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            let c = index[e.consumer.as_str()];
            let p = index[e.producer.as_str()];
            if !parents[c].contains(&p) {
                parents[c].push(p);
            }
        }
        let mut marks = vec![Mark::New; self.nodes.len()];
        for root in 0..self.nodes.len() {
            if marks[root] != Mark::New {
                continue;
            }
            // Iterative DFS; the stack doubles as the current path.
            let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
            marks[root] = Mark::Active;
            while let Some(&mut (node, ref mut next)) = stack.last_mut() {
                if let Some(&p) = parents[node].get(*next) {
                    *next += 1;
                    match marks[p] {
                        Mark::New => {
                            marks[p] = Mark::Active;
                            stack.push((p, 0));
                        }
                        Mark::Active => {
                            let start = stack.iter().position(|(n, _)| *n == p).unwrap();
                            let mut cycle: Vec<String> = stack[start..]
                                .iter()
                                .map(|(n, _)| self.nodes[*n].clone())
                                .collect();
                            cycle.push(self.nodes[p].clone());
                            return Some(cycle);
                        }
                        Mark::Done => {}
                    }
                } else {
                    marks[node] = Mark::Done;
                    stack.pop();
                }
            }
        }
        None
    }

    /// Graphviz rendering, edges drawn producer -> consumer.
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph {} {{", quote(&self.domain));
        let _ = writeln!(out, "  rankdir=LR;");
        for n in &self.nodes {
            let _ = writeln!(out, "  {};", quote(n));
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  {} -> {} [label={}];",
                quote(&e.producer),
                quote(&e.consumer),
                quote(&e.parameter)
            );
        }
        out.push_str("}\n");
        out
    }

    /// Tab-separated `consumer producer parameter slot` rows with a header.
    pub fn to_table(&self) -> String {
        let mut out = String::from("consumer\tproducer\tparameter\tslot\n");
        for e in &self.edges {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", e.consumer, e.producer, e.parameter, e.slot);
        }
        out
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// A flow step addressed by flow index and position within the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct StepId {
    pub flow: usize,
    pub index: usize,
}

#[derive(Debug, Clone)]
struct FlowChain {
    intent: String,
    steps: Vec<String>,
}

/// Flow steps as independent linear chains, one per flow.
#[derive(Debug, Clone)]
pub struct FlowGraph {
    flows: Vec<FlowChain>,
    /// Every step in flow order, the candidate set for thought-to-step mapping.
    order: Vec<StepId>,
}

impl FlowGraph {
    pub fn build(d: &DomainSpec) -> Self {
        Self::from_flows(d.flows.iter())
    }

    /// Graph over a subset of flows, e.g. only the flow placed in the prompt.
    pub fn from_flows<'a>(flows: impl IntoIterator<Item = &'a crate::domain::Flow>) -> Self {
        let flows: Vec<FlowChain> = flows
            .into_iter()
            .map(|f| FlowChain {
                intent: f.intent.clone(),
                steps: f.steps.iter().map(|s| s.text.clone()).collect(),
            })
            .collect();
        let order = flows
            .iter()
            .enumerate()
            .flat_map(|(fi, f)| (0..f.steps.len()).map(move |index| StepId { flow: fi, index }))
            .collect();
        Self { flows, order }
    }

    pub fn flow_count(&self) -> usize {
        self.flows.len()
    }

    pub fn intent(&self, flow: usize) -> &str {
        &self.flows[flow].intent
    }

    pub fn flow_len(&self, flow: usize) -> usize {
        self.flows[flow].steps.len()
    }

    pub fn steps(&self) -> &[StepId] {
        &self.order
    }

    pub fn text(&self, id: StepId) -> &str {
        &self.flows[id.flow].steps[id.index]
    }

    pub fn texts(&self) -> Vec<&str> {
        self.order.iter().map(|&id| self.text(id)).collect()
    }

    pub fn parent(&self, id: StepId) -> Option<StepId> {
        (id.index > 0).then(|| StepId {
            flow: id.flow,
            index: id.index - 1,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.flows.iter().map(|f| f.steps.len().saturating_sub(1)).sum()
    }

    /// All steps (in any flow) whose text equals `text`.
    pub fn instances_of<'a>(&'a self, text: &'a str) -> impl Iterator<Item = StepId> + 'a {
        self.order.iter().copied().filter(move |&id| self.text(id) == text)
    }
}

/// Result of [`ExecutionState::commit_unit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommitOutcome {
    /// The intended step was permitted and the step state advanced (or stayed on the same step).
    pub step_permitted: bool,
    /// The API was a known domain API and is now recorded as executed.
    pub api_recorded: bool,
}

/// What has run so far during one plan generation.
///
/// Steps sharing the same text in several flows (such as the common opening
/// step) are committed together; the flows they belong to form the active
/// set, which narrows as the plan proceeds into flow-specific steps.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecutionState {
    executed_apis: BTreeSet<String>,
    executed_steps: BTreeSet<StepId>,
    under_execution: BTreeSet<StepId>,
    active_flows: BTreeSet<usize>,
}

impl ExecutionState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn executed_apis(&self) -> &BTreeSet<String> {
        &self.executed_apis
    }

    pub fn executed_steps(&self) -> &BTreeSet<StepId> {
        &self.executed_steps
    }

    pub fn is_api_executed(&self, api: &str) -> bool {
        self.executed_apis.contains(api)
    }

    /// The step currently being worked on (first instance when shared across flows).
    pub fn under_execution_step(&self) -> Option<StepId> {
        self.under_execution.iter().next().copied()
    }

    pub fn under_execution(&self) -> &BTreeSet<StepId> {
        &self.under_execution
    }

    pub fn active_flows(&self) -> &BTreeSet<usize> {
        &self.active_flows
    }

    /// The flow being followed, once the committed steps single one out.
    pub fn committed_flow(&self) -> Option<usize> {
        (self.active_flows.len() == 1).then(|| *self.active_flows.iter().next().unwrap())
    }

    pub fn permitted_apis(&self, g: &ApiGraph) -> BTreeSet<String> {
        g.nodes()
            .iter()
            .filter(|a| !self.executed_apis.contains(*a))
            .filter(|a| g.dependencies_met(a, |p| self.executed_apis.contains(p)))
            .cloned()
            .collect()
    }

    pub fn is_step_permitted(&self, id: StepId, g: &FlowGraph) -> bool {
        if self.under_execution.contains(&id) {
            return true;
        }
        if self.executed_steps.contains(&id) {
            return false;
        }
        match g.parent(id) {
            None => true,
            Some(p) => self.executed_steps.contains(&p) || self.under_execution.contains(&p),
        }
    }

    pub fn permitted_steps(&self, g: &FlowGraph) -> BTreeSet<StepId> {
        g.steps()
            .iter()
            .copied()
            .filter(|&id| self.is_step_permitted(id, g))
            .collect()
    }

    /// Permitted instances of `text`, preferring the active flows when any match there.
    fn permitted_instances(&self, text: &str, g: &FlowGraph) -> Vec<StepId> {
        let permitted: Vec<StepId> = g
            .instances_of(text)
            .filter(|&id| self.is_step_permitted(id, g))
            .collect();
        let in_active: Vec<StepId> = permitted
            .iter()
            .copied()
            .filter(|id| self.active_flows.contains(&id.flow))
            .collect();
        if in_active.is_empty() {
            permitted
        } else {
            in_active
        }
    }

    /// Records one thought+API unit: moves to `intended` (finishing the
    /// previous step) unless it is the step already under execution, and
    /// records `api` when it names a domain API.
    ///
    /// A non-permitted step leaves the state untouched and is reported in the
    /// outcome; the caller may still record the API with [`Self::record_api`].
    pub fn commit_unit(
        &mut self,
        intended: StepId,
        api: Option<&str>,
        flows: &FlowGraph,
        apis: &ApiGraph,
    ) -> CommitOutcome {
        let text = flows.text(intended);
        let same_step = self
            .under_execution
            .iter()
            .any(|&id| flows.text(id) == text);
        if !same_step {
            let instances = self.permitted_instances(text, flows);
            if instances.is_empty() {
                return CommitOutcome {
                    step_permitted: false,
                    api_recorded: false,
                };
            }
            let previous = std::mem::take(&mut self.under_execution);
            self.executed_steps.extend(previous);
            self.active_flows = instances.iter().map(|id| id.flow).collect();
            self.under_execution = instances.into_iter().collect();
        }
        let api_recorded = api.is_some_and(|a| self.record_api(a, apis));
        CommitOutcome {
            step_permitted: true,
            api_recorded,
        }
    }

    /// Marks a known API executed; unknown (hallucinated) names are ignored.
    pub fn record_api(&mut self, api: &str, apis: &ApiGraph) -> bool {
        if apis.contains(api) {
            self.executed_apis.insert(api.to_string());
            true
        } else {
            false
        }
    }

    /// Ends the plan: the step under execution counts as executed.
    pub fn finish(&mut self) {
        let previous = std::mem::take(&mut self.under_execution);
        self.executed_steps.extend(previous);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{parse_domain, shipped};

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn step(g: &FlowGraph, intent: &str, text: &str) -> StepId {
        g.steps()
            .iter()
            .copied()
            .find(|&id| g.intent(id.flow) == intent && g.text(id) == text)
            .unwrap()
    }

    #[test]
    fn shipped_edge_counts() {
        let counts: Vec<usize> = shipped::all()
            .iter()
            .map(|d| ApiGraph::build(d).unwrap().edges().len())
            .collect();
        assert_eq!(counts, vec![13, 13, 15, 19]);
    }

    #[test]
    fn create_trip_has_or_slot_and_confirm_slot() {
        let g = ApiGraph::build(&shipped::trip_booking()).unwrap();
        let slots = g.slots("CreateTrip").unwrap();
        assert_eq!(slots.len(), 2);
        assert_eq!(slots[0], set(&["FindFlight", "FindHotel", "FindRentalCar"]));
        assert_eq!(slots[1], set(&["Confirm"]));
    }

    #[test]
    fn no_input_api_has_no_in_edges() {
        let g = ApiGraph::build(&shipped::trip_booking()).unwrap();
        assert!(g.edges().iter().all(|e| e.consumer != "GetAirports"));
        assert!(g.slots("GetAirports").unwrap().is_empty());
    }

    #[test]
    fn cycle_is_reported_by_name() {
        let src = r#"
name = "Loop"
[[apis]]
name = "A"
inputs = ["y"]
outputs = ["x"]
[[apis]]
name = "B"
inputs = ["x"]
outputs = ["y"]
[[flows]]
intent = "spin"
[[flows.steps]]
text = "Spin"
gold_apis = ["A"]
"#;
        let d = parse_domain(src).unwrap();
        match ApiGraph::build(&d).unwrap_err() {
            GraphError::Cycle(names) => {
                assert!(names.contains(&"A".to_string()) && names.contains(&"B".to_string()));
                assert_eq!(names.first(), names.last());
            }
        }
    }

    #[test]
    fn dot_lists_every_edge() {
        let g = ApiGraph::build(&shipped::trip_booking()).unwrap();
        let dot = g.to_dot();
        assert_eq!(dot.matches(" -> ").count(), 13);
        assert!(dot.contains("\"GetAirports\" -> \"FindFlight\" [label=\"airport_code\"];"));
        assert_eq!(g.to_table().lines().count(), 14);
    }

    #[test]
    fn flow_graph_is_linear() {
        let d = shipped::banking();
        let g = FlowGraph::build(&d);
        let report = d.flow_index("report problem").unwrap();
        assert_eq!(g.flow_len(report), 3);
        assert_eq!(g.parent(StepId { flow: report, index: 0 }), None);
        assert_eq!(
            g.parent(StepId { flow: report, index: 2 }),
            Some(StepId { flow: report, index: 1 })
        );
        let trip = FlowGraph::build(&shipped::trip_booking());
        // 6 + 5 + 5 steps, one chain each
        assert_eq!(trip.edge_count(), 5 + 4 + 4);
    }

    #[test]
    fn fresh_permitted_apis_are_the_producerless_ones() {
        let g = ApiGraph::build(&shipped::trip_booking()).unwrap();
        let state = ExecutionState::new();
        assert_eq!(
            state.permitted_apis(&g),
            set(&[
                "InitSystem",
                "FindRentalCar",
                "FindHotel",
                "GetPaymentInformation",
                "Confirm",
                "GetAirports"
            ])
        );
    }

    #[test]
    fn or_slot_satisfied_by_any_producer() {
        let g = ApiGraph::build(&shipped::trip_booking()).unwrap();
        let mut state = ExecutionState::new();
        for a in ["InitSystem", "Start", "Confirm", "FindHotel"] {
            state.record_api(a, &g);
        }
        let permitted = state.permitted_apis(&g);
        assert!(permitted.contains("CreateTrip"));
        assert!(!permitted.contains("OrderTrip"));
        assert!(!permitted.contains("Confirm"));
    }

    #[test]
    fn all_executed_leaves_nothing_permitted() {
        let g = ApiGraph::build(&shipped::trip_booking()).unwrap();
        let mut state = ExecutionState::new();
        for a in g.nodes().to_vec() {
            state.record_api(&a, &g);
        }
        assert!(state.permitted_apis(&g).is_empty());
    }

    #[test]
    fn fresh_state_permits_every_first_step() {
        let g = FlowGraph::build(&shipped::restaurant_ride());
        let permitted = ExecutionState::new().permitted_steps(&g);
        assert_eq!(permitted.len(), 4);
        assert!(permitted.iter().all(|id| id.index == 0));
    }

    #[test]
    fn commit_advances_and_keeps_current_step() {
        let d = shipped::trip_booking();
        let flows = FlowGraph::build(&d);
        let apis = ApiGraph::build(&d).unwrap();
        let mut state = ExecutionState::new();
        let start = step(&flows, "book flight", "Start processing the requests from the customer");
        let suggest = step(&flows, "book flight", "Suggest flights to the customer");

        assert!(state.commit_unit(start, Some("InitSystem"), &flows, &apis).step_permitted);
        // shared opening step: every flow stays active
        assert_eq!(state.active_flows().len(), 3);
        assert_eq!(state.committed_flow(), None);
        assert!(state.commit_unit(start, Some("Start"), &flows, &apis).step_permitted);
        assert!(state.executed_steps().is_empty());

        let out = state.commit_unit(suggest, Some("GetAirports"), &flows, &apis);
        assert!(out.step_permitted && out.api_recorded);
        assert!(state.executed_steps().contains(&start));
        assert_eq!(state.under_execution_step(), Some(suggest));
        assert_eq!(state.committed_flow(), Some(suggest.flow));
        assert!(state.is_step_permitted(suggest, &flows));
    }

    #[test]
    fn hallucinated_api_is_not_recorded() {
        let d = shipped::trip_booking();
        let flows = FlowGraph::build(&d);
        let apis = ApiGraph::build(&d).unwrap();
        let mut state = ExecutionState::new();
        let start = flows.steps()[0];
        let out = state.commit_unit(start, Some("BookPlane"), &flows, &apis);
        assert!(out.step_permitted);
        assert!(!out.api_recorded);
        assert!(state.executed_apis().is_empty());
    }

    #[test]
    fn non_permitted_step_leaves_state_unchanged() {
        let d = shipped::trip_booking();
        let flows = FlowGraph::build(&d);
        let apis = ApiGraph::build(&d).unwrap();
        let mut state = ExecutionState::new();
        let order = step(&flows, "book car", "Order the trip");
        let before = state.clone();
        let out = state.commit_unit(order, Some("OrderTrip"), &flows, &apis);
        assert!(!out.step_permitted);
        assert_eq!(state, before);
    }

    #[test]
    fn finishing_the_flow_leaves_no_permitted_step_in_it() {
        let d = shipped::banking();
        let flows = FlowGraph::build(&d);
        let apis = ApiGraph::build(&d).unwrap();
        let fi = d.flow_index("report problem").unwrap();
        let mut state = ExecutionState::new();
        for index in 0..flows.flow_len(fi) {
            assert!(state.commit_unit(StepId { flow: fi, index }, None, &flows, &apis).step_permitted);
        }
        state.finish();
        let permitted = state.permitted_steps(&flows);
        assert!(permitted.iter().all(|id| id.flow != fi));
    }

    #[test]
    fn gold_plans_replay_without_flags() {
        for d in shipped::all() {
            let flows = FlowGraph::build(&d);
            let apis = ApiGraph::build(&d).unwrap();
            for (fi, flow) in d.flows.iter().enumerate() {
                let mut state = ExecutionState::new();
                for (index, s) in flow.steps.iter().enumerate() {
                    for api in &s.gold_apis {
                        assert!(
                            state.permitted_apis(&apis).contains(api),
                            "{}: {api} not permitted",
                            flow.intent
                        );
                        let out = state.commit_unit(StepId { flow: fi, index }, Some(api), &flows, &apis);
                        assert!(out.step_permitted && out.api_recorded, "{}", flow.intent);
                    }
                }
            }
        }
    }
}
