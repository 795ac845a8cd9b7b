//! Static domain artifacts: API signatures, flows with gold API sequences,
//! and test queries.
//!
//! A domain lives in one TOML document. Input parameters that accept any of
//! several producers are written slash-separated (`flight_id/hotel_id`), and a
//! single string may also hold several comma-separated slots, which is how the
//! source tables list them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Output literal that denotes a boolean status rather than a consumable parameter.
pub const BOOLEAN_STATUS: &str = "True/False";

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema violation at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid domain: {}", format_issues(.0))]
    Invalid(Vec<Issue>),
    #[error("cannot serialize domain: {0}")]
    Serialize(String),
}

fn format_issues(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// One input position of an API, satisfiable by any of its alternatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputSlot {
    pub alternatives: Vec<String>,
}

impl InputSlot {
    pub fn new<I, S>(alternatives: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            alternatives: alternatives.into_iter().map(Into::into).collect(),
        }
    }

    fn parse(raw: &str) -> Self {
        Self::new(
            raw.split('/')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string),
        )
    }

    fn render(&self) -> String {
        self.alternatives.join("/")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiSpec {
    pub name: String,
    pub inputs: Vec<InputSlot>,
    /// Consumable output parameters.
    pub outputs: Vec<String>,
    /// The API additionally reports a `True/False` status, which nothing consumes.
    pub returns_status: bool,
    pub description: String,
}

impl ApiSpec {
    pub fn produces(&self, parameter: &str) -> bool {
        self.outputs.iter().any(|o| o == parameter)
    }

    /// `Name(inputs: a, b/c; outputs: d)` as shown to the model.
    pub fn signature(&self) -> String {
        let inputs = if self.inputs.is_empty() {
            "None".to_string()
        } else {
            self.inputs
                .iter()
                .map(InputSlot::render)
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut outputs: Vec<String> = self.outputs.clone();
        if self.returns_status {
            outputs.push(BOOLEAN_STATUS.to_string());
        }
        let outputs = if outputs.is_empty() {
            "None".to_string()
        } else {
            outputs.join(", ")
        };
        format!("{}(inputs: {inputs}; outputs: {outputs})", self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowStep {
    pub text: String,
    pub gold_apis: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    pub intent: String,
    pub steps: Vec<FlowStep>,
}

impl Flow {
    /// The gold API sequence: every step's APIs in order.
    pub fn gold_apis(&self) -> Vec<&str> {
        self.steps
            .iter()
            .flat_map(|s| s.gold_apis.iter().map(String::as_str))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Paper,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub id: String,
    pub text: String,
    pub intent: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainSpec {
    pub name: String,
    pub apis: Vec<ApiSpec>,
    pub flows: Vec<Flow>,
    pub queries: Vec<Query>,
    /// Abbreviated API name -> canonical name.
    pub aliases: BTreeMap<String, String>,
}

impl DomainSpec {
    pub fn api(&self, name: &str) -> Option<&ApiSpec> {
        self.apis.iter().find(|a| a.name == name)
    }

    pub fn has_api(&self, name: &str) -> bool {
        self.api(name).is_some()
    }

    pub fn flow(&self, intent: &str) -> Option<&Flow> {
        self.flows.iter().find(|f| f.intent == intent)
    }

    pub fn flow_index(&self, intent: &str) -> Option<usize> {
        self.flows.iter().position(|f| f.intent == intent)
    }

    pub fn query(&self, id: &str) -> Option<&Query> {
        self.queries.iter().find(|q| q.id == id)
    }

    pub fn resolve_alias<'a>(&'a self, name: &'a str) -> &'a str {
        self.aliases.get(name).map(String::as_str).unwrap_or(name)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DomainError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DomainError::Io {
            path: path.display().to_string(),
            source,
        })?;
        parse_domain(&text)
    }

    /// Canonical TOML rendering; `parse_domain` of the result reproduces `self`.
    pub fn to_toml(&self) -> Result<String, DomainError> {
        let raw = RawDomain::from(self);
        toml::to_string(&raw).map_err(|e| DomainError::Serialize(e.to_string()))
    }
}

/// Severity of a validation finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub severity: Severity,
    /// Where the problem is, e.g. `flows[2].steps[1]`.
    pub locus: String,
    pub message: String,
}

impl Issue {
    fn error(locus: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            locus: locus.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev} at {}: {}", self.locus, self.message)
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Checks every type invariant; an empty list means the domain is valid.
pub fn validate_domain(d: &DomainSpec) -> Vec<Issue> {
    let mut issues = Vec::new();

    if d.name.trim().is_empty() {
        issues.push(Issue::error("name", "empty domain name"));
    }

    let mut seen = BTreeSet::new();
    for (i, api) in d.apis.iter().enumerate() {
        let locus = format!("apis[{i}]");
        if !is_identifier(&api.name) {
            issues.push(Issue::error(&locus, format!("invalid api name {:?}", api.name)));
        }
        if !seen.insert(api.name.as_str()) {
            issues.push(Issue::error(&locus, format!("duplicate api {:?}", api.name)));
        }
        for (j, slot) in api.inputs.iter().enumerate() {
            if slot.alternatives.is_empty() {
                issues.push(Issue::error(
                    format!("{locus}.inputs[{j}]"),
                    "input slot without alternatives",
                ));
            }
            if slot.alternatives.iter().any(|a| a == BOOLEAN_STATUS) {
                issues.push(Issue::error(
                    format!("{locus}.inputs[{j}]"),
                    "boolean status used as an input",
                ));
            }
        }
    }

    if d.flows.is_empty() {
        issues.push(Issue::error("flows", "domain has no flow"));
    }
    let mut intents = BTreeSet::new();
    for (i, flow) in d.flows.iter().enumerate() {
        let locus = format!("flows[{i}]");
        if !intents.insert(flow.intent.as_str()) {
            issues.push(Issue::error(&locus, format!("duplicate intent {:?}", flow.intent)));
        }
        if flow.steps.is_empty() {
            issues.push(Issue::error(&locus, format!("empty flow {:?}", flow.intent)));
        }
        let mut texts = BTreeSet::new();
        for (j, step) in flow.steps.iter().enumerate() {
            let step_locus = format!("{locus}.steps[{j}]");
            if step.text.trim().is_empty() {
                issues.push(Issue::error(&step_locus, "empty step text"));
            }
            if !texts.insert(step.text.as_str()) {
                issues.push(Issue::error(
                    &step_locus,
                    format!("duplicate step {:?} in flow", step.text),
                ));
            }
            for api in &step.gold_apis {
                if !d.has_api(api) {
                    issues.push(Issue::error(
                        &step_locus,
                        format!("unknown api {api:?} in gold plan"),
                    ));
                }
            }
        }
    }

    let mut ids = BTreeSet::new();
    for (i, q) in d.queries.iter().enumerate() {
        let locus = format!("queries[{i}]");
        if !ids.insert(q.id.as_str()) {
            issues.push(Issue::error(&locus, format!("duplicate query id {:?}", q.id)));
        }
        if d.flow(&q.intent).is_none() {
            issues.push(Issue::error(&locus, format!("unknown intent {:?}", q.intent)));
        }
    }

    issues
}

/// Parses and validates a domain document.
pub fn parse_domain(source: &str) -> Result<DomainSpec, DomainError> {
    let raw: RawDomain = toml::from_str(source).map_err(|e| schema_error(source, &e))?;
    let domain = raw.into_domain();
    let issues = validate_domain(&domain);
    if issues.iter().any(|i| i.severity == Severity::Error) {
        return Err(DomainError::Invalid(issues));
    }
    Ok(domain)
}

fn schema_error(source: &str, err: &toml::de::Error) -> DomainError {
    let (line, column) = match err.span() {
        Some(span) => {
            let before = &source[..span.start.min(source.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    DomainError::Schema {
        line,
        column,
        message: err.message().to_string(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    name: String,
    #[serde(default)]
    aliases: BTreeMap<String, String>,
    apis: Vec<RawApi>,
    flows: Vec<RawFlow>,
    #[serde(default)]
    queries: Vec<RawQuery>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawApi {
    name: String,
    #[serde(default)]
    inputs: Vec<String>,
    #[serde(default)]
    outputs: Vec<String>,
    #[serde(default)]
    description: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFlow {
    intent: String,
    #[serde(default)]
    steps: Vec<RawStep>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStep {
    text: String,
    #[serde(default)]
    gold_apis: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuery {
    id: String,
    text: String,
    intent: String,
    provenance: Provenance,
}

fn strip_call(name: &str) -> &str {
    let name = name.trim();
    name.strip_suffix("()").unwrap_or(name)
}

impl RawDomain {
    fn into_domain(self) -> DomainSpec {
        let aliases = self.aliases;
        let canonical = |name: &str| -> String {
            let name = strip_call(name);
            aliases.get(name).cloned().unwrap_or_else(|| name.to_string())
        };
        let apis = self
            .apis
            .into_iter()
            .map(|a| {
                let inputs = a
                    .inputs
                    .iter()
                    .flat_map(|entry| entry.split(','))
                    .map(str::trim)
                    .filter(|s| !s.is_empty() && *s != "None")
                    .map(InputSlot::parse)
                    .collect();
                let mut returns_status = false;
                let mut outputs = Vec::new();
                for out in a.outputs.iter().map(|o| o.trim()) {
                    if out == BOOLEAN_STATUS {
                        returns_status = true;
                    } else if !out.is_empty() && out != "None" {
                        outputs.push(out.to_string());
                    }
                }
                ApiSpec {
                    name: canonical(&a.name),
                    inputs,
                    outputs,
                    returns_status,
                    description: a.description.trim().to_string(),
                }
            })
            .collect();
        let flows = self
            .flows
            .into_iter()
            .map(|f| Flow {
                intent: f.intent,
                steps: f
                    .steps
                    .into_iter()
                    .map(|s| FlowStep {
                        text: s.text.trim().to_string(),
                        gold_apis: s.gold_apis.iter().map(|g| canonical(g)).collect(),
                    })
                    .collect(),
            })
            .collect();
        let queries = self
            .queries
            .into_iter()
            .map(|q| Query {
                id: q.id,
                text: q.text,
                intent: q.intent,
                provenance: q.provenance,
            })
            .collect();
        DomainSpec {
            name: self.name,
            apis,
            flows,
            queries,
            aliases,
        }
    }
}

impl From<&DomainSpec> for RawDomain {
    fn from(d: &DomainSpec) -> Self {
        RawDomain {
            name: d.name.clone(),
            aliases: d.aliases.clone(),
            apis: d
                .apis
                .iter()
                .map(|a| {
                    let mut outputs = a.outputs.clone();
                    if a.returns_status {
                        outputs.push(BOOLEAN_STATUS.to_string());
                    }
                    RawApi {
                        name: a.name.clone(),
                        inputs: a.inputs.iter().map(InputSlot::render).collect(),
                        outputs,
                        description: a.description.clone(),
                    }
                })
                .collect(),
            flows: d
                .flows
                .iter()
                .map(|f| RawFlow {
                    intent: f.intent.clone(),
                    steps: f
                        .steps
                        .iter()
                        .map(|s| RawStep {
                            text: s.text.clone(),
                            gold_apis: s.gold_apis.clone(),
                        })
                        .collect(),
                })
                .collect(),
            queries: d
                .queries
                .iter()
                .map(|q| RawQuery {
                    id: q.id.clone(),
                    text: q.text.clone(),
                    intent: q.intent.clone(),
                    provenance: q.provenance,
                })
                .collect(),
        }
    }
}

/// The four domains shipped with the crate.
pub mod shipped {
    use super::{parse_domain, DomainSpec};

    pub const TRIP_BOOKING: &str = include_str!("../data/domains/trip_booking.toml");
    pub const INSURANCE: &str = include_str!("../data/domains/insurance.toml");
    pub const BANKING: &str = include_str!("../data/domains/banking.toml");
    pub const RESTAURANT_RIDE: &str = include_str!("../data/domains/restaurant_ride.toml");

    /// `(file stem, source)` for every shipped domain, in table order.
    pub const SOURCES: [(&str, &str); 4] = [
        ("trip_booking", TRIP_BOOKING),
        ("insurance", INSURANCE),
        ("banking", BANKING),
        ("restaurant_ride", RESTAURANT_RIDE),
    ];

    pub fn trip_booking() -> DomainSpec {
        parse_domain(TRIP_BOOKING).expect("shipped domain parses")
    }

    pub fn insurance() -> DomainSpec {
        parse_domain(INSURANCE).expect("shipped domain parses")
    }

    pub fn banking() -> DomainSpec {
        parse_domain(BANKING).expect("shipped domain parses")
    }

    pub fn restaurant_ride() -> DomainSpec {
        parse_domain(RESTAURANT_RIDE).expect("shipped domain parses")
    }

    pub fn all() -> Vec<DomainSpec> {
        vec![trip_booking(), insurance(), banking(), restaurant_ride()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GHOST: &str = r#"
name = "Ghostly"

[[apis]]
name = "Real"
outputs = ["x"]

[[flows]]
intent = "haunt"

[[flows.steps]]
text = "Do the thing"
gold_apis = ["Real", "Ghost()"]
"#;

    #[test]
    fn trip_booking_has_thirteen_apis() {
        let d = shipped::trip_booking();
        assert_eq!(d.apis.len(), 13);
        assert_eq!(d.flows.len(), 3);
    }

    #[test]
    fn shipped_counts_match_domain_table() {
        let counts: Vec<(usize, usize)> = shipped::all()
            .iter()
            .map(|d| (d.flows.len(), d.apis.len()))
            .collect();
        assert_eq!(counts, vec![(3, 13), (3, 15), (3, 14), (4, 22)]);
    }

    #[test]
    fn dangling_reference_names_offender() {
        let err = parse_domain(GHOST).unwrap_err();
        match err {
            DomainError::Invalid(issues) => {
                assert_eq!(issues.len(), 1);
                assert!(issues[0].message.contains("Ghost"), "{}", issues[0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn comma_list_becomes_separate_slots() {
        let d = shipped::trip_booking();
        let order = d.api("OrderTrip").unwrap();
        assert_eq!(order.inputs.len(), 3);
        assert!(order.inputs.iter().all(|s| s.alternatives.len() == 1));
        assert_eq!(order.inputs[1].alternatives, vec!["pay_info"]);
    }

    #[test]
    fn slash_list_becomes_or_slot() {
        let d = shipped::trip_booking();
        let create = d.api("CreateTrip").unwrap();
        assert_eq!(create.inputs.len(), 2);
        assert_eq!(
            create.inputs[0].alternatives,
            vec!["flight_id", "hotel_id", "car_id"]
        );
        let finish = shipped::insurance();
        let finish = finish.api("Finish").unwrap();
        assert_eq!(finish.inputs[0].alternatives.len(), 3);
        assert_eq!(finish.inputs[0].alternatives[1], "cancellation_status");
    }

    #[test]
    fn boolean_status_produces_nothing() {
        let d = shipped::trip_booking();
        let start = d.api("Start").unwrap();
        assert!(start.outputs.is_empty());
        assert!(start.returns_status);
        assert_eq!(start.signature(), "Start(inputs: init_status; outputs: True/False)");
    }

    #[test]
    fn aliases_resolve_to_canonical_names() {
        let src = TRIP_WITH_ALIAS;
        let d = parse_domain(src).unwrap();
        assert_eq!(d.flows[0].steps[0].gold_apis, vec!["GetPaymentInformation"]);
        assert_eq!(d.resolve_alias("GetPayInfo"), "GetPaymentInformation");
    }

    const TRIP_WITH_ALIAS: &str = r#"
name = "Alias"

[aliases]
GetPayInfo = "GetPaymentInformation"

[[apis]]
name = "GetPaymentInformation"
outputs = ["pay_info"]

[[flows]]
intent = "pay"

[[flows.steps]]
text = "Pay"
gold_apis = ["GetPayInfo()"]
"#;

    #[test]
    fn shipped_banking_validates_clean() {
        assert!(validate_domain(&shipped::banking()).is_empty());
        for d in shipped::all() {
            assert_eq!(validate_domain(&d), vec![], "{}", d.name);
        }
    }

    #[test]
    fn duplicate_api_is_one_issue() {
        let mut d = shipped::banking();
        let dup = d.apis[0].clone();
        d.apis.push(dup);
        let issues = validate_domain(&d);
        assert_eq!(issues.len(), 1);
        assert!(issues[0].message.contains("duplicate api"));
    }

    #[test]
    fn empty_flow_is_one_issue() {
        let mut d = shipped::banking();
        d.flows[1].steps.clear();
        let issues = validate_domain(&d);
        assert_eq!(issues.len(), 1);
        assert!(issues[0].message.contains("empty flow"));
    }

    #[test]
    fn schema_error_reports_line() {
        let src = "name = \"x\"\napis = 3\nflows = []\n";
        match parse_domain(src).unwrap_err() {
            DomainError::Schema { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn serialize_round_trip_is_fixpoint() {
        for (stem, src) in shipped::SOURCES {
            let first = parse_domain(src).unwrap();
            let rendered = first.to_toml().unwrap();
            let second = parse_domain(&rendered).unwrap();
            assert_eq!(first, second, "{stem}");
            assert_eq!(rendered, second.to_toml().unwrap(), "{stem}");
        }
    }

    #[test]
    fn query_intents_resolve() {
        for d in shipped::all() {
            assert!(d.queries.iter().any(|q| q.provenance == Provenance::Paper));
            for q in &d.queries {
                assert!(d.flow(&q.intent).is_some(), "{}", q.id);
            }
        }
    }
}
