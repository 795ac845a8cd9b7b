//! The `[thought] ... [API] Name()` plan surface format.

use std::fmt::Write as _;
use std::ops::Range;

use thiserror::Error;

pub const THOUGHT_TAG: &str = "[thought]";
pub const API_TAG: &str = "[API]";
/// API name that ends a plan.
pub const FINISH_API: &str = "Finish";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanParseError {
    #[error("unparsable: no complete thought+API unit")]
    Unparsable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanStep {
    pub thought: String,
    pub api_name: String,
    /// Byte range of the unit in the text it was parsed from (arguments included).
    pub raw_span: Range<usize>,
}

impl PlanStep {
    pub fn new(thought: impl Into<String>, api_name: impl Into<String>) -> Self {
        Self {
            thought: thought.into(),
            api_name: api_name.into(),
            raw_span: 0..0,
        }
    }

    /// Canonical single-line form, without the trailing newline.
    pub fn render(&self) -> String {
        format!("{THOUGHT_TAG} {} {API_TAG} {}()", self.thought, self.api_name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    pub terminated: bool,
    pub raw_text: String,
}

impl Plan {
    pub fn from_steps(steps: Vec<PlanStep>) -> Self {
        let terminated = steps.last().is_some_and(is_terminal);
        let mut plan = Self {
            steps,
            terminated,
            raw_text: String::new(),
        };
        plan.raw_text = plan.serialize();
        plan
    }

    pub fn api_names(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.api_name.as_str()).collect()
    }

    pub fn thoughts(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.thought.as_str()).collect()
    }

    /// One canonical unit per line.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            let _ = writeln!(out, "{}", s.render());
        }
        out
    }
}

pub fn is_terminal(step: &PlanStep) -> bool {
    step.api_name == FINISH_API
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// A unit recognized at the start of `segment` (text following a `[thought]` tag).
struct UnitMatch<'a> {
    thought: &'a str,
    api_name: &'a str,
    /// Byte offset just past the closing parenthesis.
    end: usize,
}

fn match_unit(segment: &str) -> Option<UnitMatch<'_>> {
    let api_at = segment.find(API_TAG)?;
    let thought = segment[..api_at].trim();
    if thought.is_empty() {
        return None;
    }
    let after_tag = api_at + API_TAG.len();
    let rest = &segment[after_tag..];
    let name_at = after_tag + (rest.len() - rest.trim_start().len());
    let tail = &segment[name_at..];
    if !tail.starts_with(is_ident_start) {
        return None;
    }
    let name_len = tail.find(|c: char| !is_ident_char(c)).unwrap_or(tail.len());
    let api_name = &tail[..name_len];
    let after_name = &tail[name_len..];
    let paren = after_name.len() - after_name.trim_start().len();
    let args = after_name[paren..].strip_prefix('(')?;
    let close = args.find([')', '('])?;
    if !args[close..].starts_with(')') {
        return None;
    }
    let end = name_at + name_len + paren + 1 + close + 1;
    Some(UnitMatch {
        thought,
        api_name,
        end,
    })
}

/// Extracts every complete unit; text between units and a trailing partial unit are ignored.
pub fn parse_plan(text: &str) -> Result<Plan, PlanParseError> {
    let starts: Vec<usize> = text.match_indices(THOUGHT_TAG).map(|(i, _)| i).collect();
    let mut steps = Vec::new();
    for (k, &start) in starts.iter().enumerate() {
        let body = start + THOUGHT_TAG.len();
        let limit = starts.get(k + 1).copied().unwrap_or(text.len());
        if let Some(m) = match_unit(&text[body..limit]) {
            steps.push(PlanStep {
                thought: m.thought.to_string(),
                api_name: m.api_name.to_string(),
                raw_span: start..body + m.end,
            });
        }
    }
    if steps.is_empty() {
        return Err(PlanParseError::Unparsable);
    }
    let terminated = steps.last().is_some_and(is_terminal);
    Ok(Plan {
        steps,
        terminated,
        raw_text: text.to_string(),
    })
}

/// True iff `fragment` is exactly one well-formed unit with no stray tags.
pub fn check_format(fragment: &str) -> bool {
    let trimmed = fragment.trim();
    let Some(body) = trimmed.strip_prefix(THOUGHT_TAG) else {
        return false;
    };
    if trimmed.matches(THOUGHT_TAG).count() != 1 || trimmed.matches(API_TAG).count() != 1 {
        return false;
    }
    match match_unit(body) {
        Some(m) => body[m.end..].trim().is_empty(),
        None => false,
    }
}

/// Byte offset just past the unit that `text` completes, if any: the first
/// `(...)` closing after an `[API]` tag and a name.
pub fn unit_end(text: &str) -> Option<usize> {
    let api_at = text.find(API_TAG)?;
    let after = api_at + API_TAG.len();
    let open = text[after..].find('(')? + after;
    let close = text[open..].find(')')? + open;
    Some(close + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_units_parse() {
        let plan = parse_plan(
            "[thought] Find codes. [API] GetAirports()\n[thought] Suggest. [API] FindFlight()",
        )
        .unwrap();
        assert_eq!(plan.api_names(), vec!["GetAirports", "FindFlight"]);
        assert_eq!(plan.thoughts(), vec!["Find codes.", "Suggest."]);
        assert!(!plan.terminated);
    }

    #[test]
    fn prose_is_unparsable() {
        assert_eq!(
            parse_plan("The answer is GetAirports"),
            Err(PlanParseError::Unparsable)
        );
    }

    #[test]
    fn trailing_partial_unit_dropped() {
        let plan = parse_plan("[thought] a [API] X()\n[thought] dangling").unwrap();
        assert_eq!(plan.steps.len(), 1);
        assert_eq!(plan.steps[0].raw_span, 0..21);
    }

    #[test]
    fn arguments_are_kept_in_span_only() {
        let text = "[thought] find cars [API] FindRentalCar(location=\"Chicago\")";
        let plan = parse_plan(text).unwrap();
        assert_eq!(plan.steps[0].api_name, "FindRentalCar");
        assert_eq!(&text[plan.steps[0].raw_span.clone()], text);
    }

    #[test]
    fn finish_terminates() {
        let plan = parse_plan("[thought] done [API] Finish()").unwrap();
        assert!(plan.terminated);
        assert!(is_terminal(&PlanStep::new("x", "Finish")));
        assert!(!is_terminal(&PlanStep::new("x", "Confirm")));
        assert!(!is_terminal(&PlanStep::new("x", "finish")));
    }

    #[test]
    fn format_check_cases() {
        assert!(check_format("[thought] I confirm. [API] Confirm()"));
        assert!(check_format("\n[thought] I confirm. [API] Confirm()\n"));
        assert!(!check_format("[API] Confirm()"));
        assert!(!check_format("[thought] x [API] Confirm() extra [API]"));
        assert!(!check_format("[thought] x [API] Confirm() trailing words"));
        assert!(!check_format("[thought]   [API] Confirm()"));
        assert!(!check_format("[thought] x [API] Confirm("));
        assert!(!check_format("[thought] x [API] 9Lives()"));
        assert!(!check_format("[thought] a [thought] b [API] Confirm()"));
    }

    #[test]
    fn unit_end_finds_first_call() {
        assert_eq!(unit_end("[thought] a [API] X()\n[thought]"), Some(21));
        assert_eq!(unit_end("[thought] call f() first [API] X"), None);
        assert_eq!(unit_end("[thought] a [API] X(a=1) more"), Some(24));
    }

    fn thought_strategy() -> impl Strategy<Value = String> {
        proptest::collection::vec("[A-Za-z0-9,.']{1,8}", 1..6).prop_map(|w| w.join(" "))
    }

    fn step_strategy() -> impl Strategy<Value = PlanStep> {
        (thought_strategy(), "[A-Za-z_][A-Za-z0-9_]{0,12}")
            .prop_map(|(t, n)| PlanStep::new(t, n))
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(steps in proptest::collection::vec(step_strategy(), 1..8)) {
            let plan = Plan::from_steps(steps);
            let reparsed = parse_plan(&plan.serialize()).unwrap();
            prop_assert_eq!(reparsed.thoughts(), plan.thoughts());
            prop_assert_eq!(reparsed.api_names(), plan.api_names());
            prop_assert_eq!(reparsed.terminated, plan.terminated);
            prop_assert_eq!(reparsed.serialize(), plan.serialize());
        }

        #[test]
        fn rendered_step_passes_format_check(step in step_strategy()) {
            prop_assert!(check_format(&step.render()));
        }
    }
}
