//! Beam search and greedy decoding against exhaustive enumeration on random
//! token trees small enough to list every complete plan.

use flowplan::decoder::{beam_decode, greedy_decode, nucleus_decode};
use flowplan::{DecoderConfig, ScriptedLm};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Node {
    token: String,
    prob: f64,
    children: Vec<usize>,
}

/// Every token is one whole unit; internal units call `A_<id>()` so each
/// context ends in a unique suffix, leaves call `Finish()`.
struct Tree {
    nodes: Vec<Node>,
    roots: Vec<usize>,
}

fn random_tree(seed: u64) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::new();
    fn grow(rng: &mut ChaCha8Rng, nodes: &mut Vec<Node>, depth: usize) -> Vec<usize> {
        let n = rng.gen_range(1..=3);
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let mut ids = Vec::new();
        for w in weights {
            let id = nodes.len();
            let leaf = depth == 0 || rng.gen_bool(0.3);
            let api = if leaf { "Finish".to_string() } else { format!("A_{id}") };
            nodes.push(Node {
                token: format!("[thought] n{id} [API] {api}()"),
                prob: w / total,
                children: Vec::new(),
            });
            if !leaf {
                let kids = grow(rng, nodes, depth - 1);
                nodes[id].children = kids;
            }
            ids.push(id);
        }
        ids
    }
    let depth = rng.gen_range(1..=3);
    let roots = grow(&mut rng, &mut nodes, depth);
    Tree { nodes, roots }
}

impl Tree {
    fn fixture(&self) -> String {
        let mut out = String::from("fallback = \"none\"\n");
        let mut rule = |suffix: &str, kids: &[usize]| {
            let dist: Vec<String> = kids
                .iter()
                .map(|&k| format!("{:?} = {}", self.nodes[k].token, self.nodes[k].prob))
                .collect();
            out.push_str(&format!("\n[[rules]]\nmatch_suffix = {suffix:?}\ndist = {{ {} }}\n", dist.join(", ")));
        };
        rule("S", &self.roots);
        for (id, n) in self.nodes.iter().enumerate() {
            if !n.children.is_empty() {
                rule(&format!("A_{id}()"), &n.children);
            }
        }
        out
    }

    /// All root-to-leaf completions with their log-probabilities.
    fn paths(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        let mut stack: Vec<(usize, String, f64)> = self.roots.iter().map(|&r| (r, String::new(), 0.0)).collect();
        while let Some((id, text, lp)) = stack.pop() {
            let n = &self.nodes[id];
            let text = text + &n.token;
            let lp = lp + n.prob.ln();
            if n.children.is_empty() {
                out.push((text, lp));
            } else {
                stack.extend(n.children.iter().map(|&c| (c, text.clone(), lp)));
            }
        }
        out
    }

    fn greedy_path(&self) -> String {
        let mut text = String::new();
        let mut level = &self.roots;
        loop {
            // ties go to the lexicographically smaller token
            let best = *level
                .iter()
                .max_by(|&&a, &&b| {
                    let (a, b) = (&self.nodes[a], &self.nodes[b]);
                    a.prob.partial_cmp(&b.prob).unwrap().then_with(|| b.token.cmp(&a.token))
                })
                .unwrap();
            text.push_str(&self.nodes[best].token);
            if self.nodes[best].children.is_empty() {
                return text;
            }
            level = &self.nodes[best].children;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wide_beam_finds_most_probable_plan(seed in any::<u64>()) {
        let tree = random_tree(seed);
        let lm = ScriptedLm::from_fixture(&tree.fixture()).unwrap();
        let paths = tree.paths();
        let cfg = DecoderConfig { beams: paths.len().max(1), ..DecoderConfig::default() };
        let out = beam_decode(&lm, "S", &cfg).unwrap();
        let best = paths.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((out.log_prob.unwrap() - best).abs() < 1e-9);
        let matching = paths.iter().find(|p| p.0 == out.completion).unwrap();
        prop_assert!((matching.1 - best).abs() < 1e-9);
    }

    #[test]
    fn greedy_follows_local_argmax(seed in any::<u64>()) {
        let tree = random_tree(seed);
        let lm = ScriptedLm::from_fixture(&tree.fixture()).unwrap();
        let out = greedy_decode(&lm, "S", &DecoderConfig::default()).unwrap();
        prop_assert_eq!(out.completion, tree.greedy_path());
    }

    #[test]
    fn single_beam_scores_like_greedy(seed in any::<u64>()) {
        let tree = random_tree(seed);
        let lm = ScriptedLm::from_fixture(&tree.fixture()).unwrap();
        let g = greedy_decode(&lm, "S", &DecoderConfig::default()).unwrap();
        let greedy_lp = tree.paths().into_iter().find(|p| p.0 == g.completion).unwrap().1;
        let b = beam_decode(&lm, "S", &DecoderConfig { beams: 1, ..DecoderConfig::default() }).unwrap();
        prop_assert!((b.log_prob.unwrap() - greedy_lp).abs() < 1e-9);
    }

    #[test]
    fn nucleus_always_emits_a_complete_path(seed in any::<u64>(), top_p in 0.05f64..=1.0) {
        let tree = random_tree(seed);
        let lm = ScriptedLm::from_fixture(&tree.fixture()).unwrap();
        let cfg = DecoderConfig { seed, top_p, ..DecoderConfig::default() };
        let out = nucleus_decode(&lm, "S", &cfg).unwrap();
        prop_assert!(tree.paths().iter().any(|p| p.0 == out.completion));
        prop_assert_eq!(out.completion, nucleus_decode(&lm, "S", &cfg).unwrap().completion);
    }
}
