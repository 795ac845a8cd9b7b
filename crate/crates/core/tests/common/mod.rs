#![allow(dead_code)]

use std::path::PathBuf;

use flowplan::domain::{shipped, ApiSpec, DomainSpec, Flow, FlowStep, InputSlot, Query};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn adversarial_dir() -> PathBuf {
    data_dir().join("fixtures/adversarial")
}

/// Query ids of the adversarial fixture family, in file-name order.
pub fn adversarial_ids() -> Vec<String> {
    let mut ids: Vec<String> = std::fs::read_dir(adversarial_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .map(|p| p.file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    ids.sort();
    ids
}

/// The shipped domain holding `query_id`, and the query itself.
pub fn find_query(query_id: &str) -> (DomainSpec, Query) {
    for d in shipped::all() {
        if let Some(q) = d.query(query_id) {
            let q = q.clone();
            return (d, q);
        }
    }
    panic!("no shipped query {query_id}");
}

pub fn fixture_path(query_id: &str) -> PathBuf {
    adversarial_dir().join(format!("{query_id}.toml"))
}

/// A random acyclic domain: API `i` consumes only parameters produced by
/// APIs with a lower index (or nothing produces them). Step texts use
/// disjoint words so lexical mapping of an exact step text is unambiguous;
/// some texts are shared between flows.
pub fn synthetic_domain(rng: &mut impl Rng) -> DomainSpec {
    let n_apis = rng.gen_range(3..8);
    let mut apis = Vec::new();
    for i in 0..n_apis {
        let mut inputs = Vec::new();
        for _ in 0..rng.gen_range(0..3) {
            let k = rng.gen_range(1..3);
            let alts: Vec<String> = (0..k)
                .map(|_| {
                    // "orphan" parameters are produced by nobody
                    if i == 0 || rng.gen_bool(0.2) {
                        format!("orphan{}", rng.gen_range(0..3))
                    } else {
                        format!("p{}", rng.gen_range(0..i))
                    }
                })
                .collect();
            inputs.push(InputSlot::new(alts));
        }
        apis.push(ApiSpec {
            name: format!("Api{i}"),
            inputs,
            outputs: vec![format!("p{i}")],
            returns_status: false,
            description: format!("api number {i}"),
        });
    }

    let mut flows: Vec<Flow> = Vec::new();
    let mut texts: Vec<String> = Vec::new();
    for f in 0..rng.gen_range(1..4) {
        let mut steps: Vec<FlowStep> = Vec::new();
        for s in 0..rng.gen_range(1..5) {
            let reuse = texts
                .iter()
                .filter(|t| steps.iter().all(|st| &st.text != *t))
                .cloned()
                .collect::<Vec<_>>();
            let text = if !reuse.is_empty() && rng.gen_bool(0.25) {
                reuse.choose(rng).unwrap().clone()
            } else {
                let t = format!("zeta{f}x{s} omega{f}y{s}");
                texts.push(t.clone());
                t
            };
            let gold_apis = (0..rng.gen_range(0..3))
                .map(|_| format!("Api{}", rng.gen_range(0..n_apis)))
                .collect();
            steps.push(FlowStep { text, gold_apis });
        }
        flows.push(Flow {
            intent: format!("intent {f}"),
            steps,
        });
    }
    DomainSpec {
        name: "Synthetic".into(),
        apis,
        flows,
        queries: Vec::new(),
        aliases: Default::default(),
    }
}

/// Random `(thought, api)` units: thoughts are step texts of the domain,
/// APIs are domain names or hallucinated ones.
pub fn synthetic_plan(rng: &mut impl Rng, d: &DomainSpec) -> Vec<(String, String)> {
    let texts: Vec<&str> = d
        .flows
        .iter()
        .flat_map(|f| f.steps.iter().map(|s| s.text.as_str()))
        .collect();
    (0..rng.gen_range(1..10))
        .map(|_| {
            let thought = texts.choose(rng).unwrap().to_string();
            let api = if rng.gen_bool(0.15) {
                format!("Ghost{}", rng.gen_range(0..2))
            } else {
                d.apis.choose(rng).unwrap().name.clone()
            };
            (thought, api)
        })
        .collect()
}
