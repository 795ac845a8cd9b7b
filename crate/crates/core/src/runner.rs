//! Experiment runner: resolves a run configuration into backends and decoders,
//! evaluates every (query, decoder, setting) combination and writes reports.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::{
    beam_decode, build_prompt, flap_decode, greedy_decode, nucleus_decode, DecodeError, Decoded, DecoderConfig,
    Setting, StopReason,
};
use crate::domain::{shipped, validate_domain, DomainError, DomainSpec, Issue, Query, Severity};
use crate::eval::{aggregate, gold_plan, Aggregate, EvalError, Evaluator, PlanScores};
use crate::grammar::parse_plan;
use crate::graph::{ApiGraph, GraphError};
use crate::lm::{LanguageModel, LmError, RemoteLm, ScriptedLm};
use crate::similarity::{LexicalSimilarity, RemoteSimilarity, Similarity};

/// Environment variable that, when set, points every run at a remote logits server.
pub const BACKEND_URL_ENV: &str = "FLOWPLAN_BACKEND_URL";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write report: {0}")]
    Report(String),
}

impl From<DecodeError> for RunError {
    fn from(e: DecodeError) -> Self {
        match e {
            DecodeError::Lm(e) => RunError::Lm(e),
            DecodeError::Graph(e) => RunError::Graph(e),
            DecodeError::Config(m) => RunError::Usage(m),
            e @ DecodeError::UnknownIntent { .. } => RunError::Usage(e.to_string()),
        }
    }
}

impl RunError {
    /// 1 validation failure, 2 usage error, 3 backend failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => 2,
            RunError::Lm(LmError::Transport(_) | LmError::Protocol(_)) => 3,
            RunError::Lm(_) => 2,
            RunError::Domain(_) | RunError::Graph(_) | RunError::Eval(_) => 1,
            RunError::Io { .. } | RunError::Report(_) => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Greedy,
    Beam,
    Nucleus,
    Flap,
    /// Replays the gold plan; a reference row for the metrics.
    Gold,
}

impl DecoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DecoderKind::Greedy => "greedy",
            DecoderKind::Beam => "beam",
            DecoderKind::Nucleus => "nucleus",
            DecoderKind::Flap => "flap",
            DecoderKind::Gold => "gold",
        }
    }
}

impl FromStr for DecoderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "greedy" => Ok(DecoderKind::Greedy),
            "beam" => Ok(DecoderKind::Beam),
            "nucleus" => Ok(DecoderKind::Nucleus),
            "flap" => Ok(DecoderKind::Flap),
            "gold" => Ok(DecoderKind::Gold),
            other => Err(format!("unknown decoder {other:?} (greedy | beam | nucleus | flap | gold)")),
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where next-token distributions come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    /// A fixture file, or a directory holding `<query id>.toml` files and an
    /// optional `default.toml`.
    Scripted(PathBuf),
    Remote(String),
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(p) = s.strip_prefix("scripted:") {
            Ok(BackendSpec::Scripted(PathBuf::from(p)))
        } else if let Some(u) = s.strip_prefix("remote:") {
            Ok(BackendSpec::Remote(u.to_string()))
        } else {
            Err(format!("backend {s:?} must be scripted:<path> or remote:<url>"))
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Scripted(p) => write!(f, "scripted:{}", p.display()),
            BackendSpec::Remote(u) => write!(f, "remote:{u}"),
        }
    }
}

impl BackendSpec {
    pub fn open(&self, query_id: &str) -> Result<Box<dyn LanguageModel>, RunError> {
        match self {
            BackendSpec::Remote(url) => Ok(Box::new(RemoteLm::new(url.clone()))),
            BackendSpec::Scripted(path) if path.is_dir() => {
                let own = path.join(format!("{query_id}.toml"));
                let fallback = path.join("default.toml");
                let file = if own.is_file() {
                    own
                } else if fallback.is_file() {
                    fallback
                } else {
                    return Err(RunError::Usage(format!(
                        "no fixture for query {query_id:?} in {}",
                        path.display()
                    )));
                };
                Ok(Box::new(ScriptedLm::load(file)?))
            }
            BackendSpec::Scripted(path) => Ok(Box::new(ScriptedLm::load(path)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimilaritySpec {
    Lexical,
    Remote(String),
}

impl FromStr for SimilaritySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "lexical" {
            Ok(SimilaritySpec::Lexical)
        } else if let Some(u) = s.strip_prefix("remote:") {
            Ok(SimilaritySpec::Remote(u.to_string()))
        } else {
            Err(format!("similarity {s:?} must be lexical or remote:<url>"))
        }
    }
}

impl fmt::Display for SimilaritySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimilaritySpec::Lexical => f.write_str("lexical"),
            SimilaritySpec::Remote(u) => write!(f, "remote:{u}"),
        }
    }
}

impl SimilaritySpec {
    pub fn open(&self) -> Box<dyn Similarity> {
        match self {
            SimilaritySpec::Lexical => Box::new(LexicalSimilarity::default()),
            SimilaritySpec::Remote(u) => Box::new(RemoteSimilarity::new(u.clone())),
        }
    }
}

/// Loads a domain from a file, or a shipped domain by name (`trip_booking`, ...).
pub fn load_domain(arg: &str) -> Result<DomainSpec, RunError> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok(DomainSpec::load(path)?);
    }
    let name = arg.strip_prefix("shipped:").unwrap_or(arg);
    match shipped::SOURCES.iter().find(|(stem, _)| *stem == name) {
        Some((_, src)) => Ok(crate::domain::parse_domain(src)?),
        None => Err(RunError::Io {
            path: arg.to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or shipped domain"),
        }),
    }
}

/// Everything one evaluation run needs. Read from TOML; CLI flags override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Domain files or shipped domain names; empty means all shipped domains.
    pub domains: Vec<String>,
    pub decoders: Vec<DecoderKind>,
    pub settings: Vec<Setting>,
    /// `scripted:<path>` or `remote:<url>`.
    pub backend: Option<String>,
    /// `lexical` or `remote:<url>`.
    pub similarity: String,
    /// Restrict to these query ids; empty means every query.
    pub queries: Vec<String>,
    pub output: Option<PathBuf>,
    pub jobs: usize,
    pub strip_dummies: bool,
    pub decoder: DecoderConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domains: Vec::new(),
            decoders: vec![DecoderKind::Flap],
            settings: vec![Setting::AllFlows],
            backend: None,
            similarity: "lexical".into(),
            queries: Vec::new(),
            output: None,
            jobs: 1,
            strip_dummies: false,
            decoder: DecoderConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        toml::from_str(&text).map_err(|e| RunError::Usage(format!("{}: {}", path.display(), e.message())))
    }

    pub fn backend_spec(&self) -> Result<Option<BackendSpec>, RunError> {
        if let Ok(url) = std::env::var(BACKEND_URL_ENV) {
            if !url.is_empty() {
                return Ok(Some(BackendSpec::Remote(url)));
            }
        }
        self.backend
            .as_deref()
            .map(|b| b.parse().map_err(RunError::Usage))
            .transpose()
    }

    pub fn similarity_spec(&self) -> Result<SimilaritySpec, RunError> {
        self.similarity.parse().map_err(RunError::Usage)
    }

    pub fn load_domains(&self) -> Result<Vec<DomainSpec>, RunError> {
        if self.domains.is_empty() {
            return Ok(shipped::all());
        }
        self.domains.iter().map(|d| load_domain(d)).collect()
    }

    /// Knobs that only the lookahead decoder reads.
    pub fn warn_ignored_knobs(&self) {
        if self.decoders.contains(&DecoderKind::Flap) {
            return;
        }
        let d = DecoderConfig::default();
        let c = &self.decoder;
        let changed = c.lambda != d.lambda
            || c.top_k != d.top_k
            || c.lookahead != d.lookahead
            || c.stride != d.stride
            || (c.alpha_a, c.alpha_b, c.alpha_c, c.beta_soft) != (d.alpha_a, d.alpha_b, d.alpha_c, d.beta_soft)
            || (c.scale_a, c.scale_b, c.scale_c, c.scale_d) != (d.scale_a, d.scale_b, d.scale_c, d.scale_d);
        if changed {
            log::warn!("lookahead settings are ignored: no flap decoder in this run");
        }
    }
}

/// One generated (or replayed) plan and its metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub domain: String,
    pub query_id: String,
    pub intent: String,
    pub decoder: DecoderKind,
    pub setting: Setting,
    pub seed: u64,
    pub stop: Option<StopReason>,
    /// Generated text after the prompt.
    pub completion: String,
    pub parsable: bool,
    pub scores: Option<PlanScores>,
}

/// Runs one decoder on one query and returns the decoded output plus the plan
/// text that metrics are computed on (prompt exemplars followed by the completion).
pub fn decode_query(
    lm: &dyn LanguageModel,
    sim: &dyn Similarity,
    domain: &DomainSpec,
    query: &Query,
    decoder: DecoderKind,
    cfg: &DecoderConfig,
) -> Result<(Decoded, String), RunError> {
    let prompt = build_prompt(domain, query, cfg.setting)?;
    let decoded = match decoder {
        DecoderKind::Greedy => greedy_decode(lm, &prompt.text, cfg)?,
        DecoderKind::Beam => beam_decode(lm, &prompt.text, cfg)?,
        DecoderKind::Nucleus => nucleus_decode(lm, &prompt.text, cfg)?,
        DecoderKind::Flap => flap_decode(lm, sim, domain, query, cfg)?,
        DecoderKind::Gold => {
            let flow = domain
                .flow(&query.intent)
                .ok_or_else(|| RunError::Usage(format!("query {:?} has unknown intent", query.id)))?;
            let mut steps = gold_plan(flow).steps;
            let skip = prompt.exemplars.len().min(steps.len());
            let rest = crate::grammar::Plan::from_steps(steps.split_off(skip));
            Decoded {
                completion: rest.serialize(),
                tokens: Vec::new(),
                stop: StopReason::Finished,
                trace: Vec::new(),
                log_prob: None,
            }
        }
    };
    let mut full = String::new();
    for unit in &prompt.exemplars {
        full.push_str(&unit.render());
        full.push('\n');
    }
    full.push_str(&decoded.completion);
    Ok((decoded, full))
}

struct Job<'a> {
    domain: &'a DomainSpec,
    query: &'a Query,
    ordinal: u64,
    decoder: DecoderKind,
    setting: Setting,
}

/// Output of [`cmd_evaluate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub records: Vec<Record>,
    pub summary: Vec<SummaryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub decoder: DecoderKind,
    pub setting: Setting,
    #[serde(flatten)]
    pub aggregate: Aggregate,
}

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "decoder",
    "setting",
    "thoughts/plan",
    "apis/plan",
    "parsable%",
    "repeat%",
    "hallucination%",
    "edits_steps",
    "edits_apis",
    "inconsistent_steps%",
    "inconsistent_apis%",
];

impl SummaryRow {
    pub fn cells(&self) -> Vec<String> {
        let a = &self.aggregate;
        let m = |x: &Option<crate::eval::MeanStd>| x.map_or_else(String::new, |v| format!("{:.2}", v.mean));
        vec![
            self.decoder.to_string(),
            self.setting.as_str().to_string(),
            m(&a.thought_count),
            m(&a.api_count),
            format!("{:.2}", a.parsable_pct),
            m(&a.repetition_pct),
            m(&a.hallucination_pct),
            m(&a.edits_steps),
            m(&a.edits_apis),
            m(&a.inconsistent_steps_pct),
            m(&a.inconsistent_apis_pct),
        ]
    }
}

/// Evaluates every configured combination; writes reports when `output` is set.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<RunReport, RunError> {
    cfg.decoder.validate()?;
    cfg.warn_ignored_knobs();
    let domains = cfg.load_domains()?;
    let needs_lm = cfg.decoders.iter().any(|d| *d != DecoderKind::Gold);
    let backend = cfg.backend_spec()?;
    if needs_lm && backend.is_none() {
        return Err(RunError::Usage("a backend is required (scripted:<path> or remote:<url>)".into()));
    }
    let sim_spec = cfg.similarity_spec()?;
    let sim = sim_spec.open();

    let mut jobs = Vec::new();
    let mut ordinal = 0u64;
    for domain in &domains {
        for query in &domain.queries {
            if !cfg.queries.is_empty() && !cfg.queries.contains(&query.id) {
                continue;
            }
            for &decoder in &cfg.decoders {
                for &setting in &cfg.settings {
                    jobs.push(Job {
                        domain,
                        query,
                        ordinal,
                        decoder,
                        setting,
                    });
                }
            }
            ordinal += 1;
        }
    }
    if jobs.is_empty() {
        return Err(RunError::Usage("no queries selected".into()));
    }

    let run = |job: &Job| -> Result<Record, RunError> {
        let dcfg = DecoderConfig {
            setting: job.setting,
            seed: cfg.decoder.seed.wrapping_add(job.ordinal),
            ..cfg.decoder.clone()
        };
        let (decoded, full) = match job.decoder {
            DecoderKind::Gold => {
                let lm = ScriptedLm::from_fixture("fallback = \"none\"")?;
                decode_query(&lm, sim.as_ref(), job.domain, job.query, job.decoder, &dcfg)?
            }
            _ => {
                let lm = backend.as_ref().expect("checked above").open(&job.query.id)?;
                decode_query(lm.as_ref(), sim.as_ref(), job.domain, job.query, job.decoder, &dcfg)?
            }
        };
        let parsable = parse_plan(&decoded.completion).is_ok();
        let scores = match (parsable, job.domain.flow(&job.query.intent), parse_plan(&full)) {
            (true, Some(flow), Ok(plan)) => {
                let mut ev = Evaluator::new(job.domain, sim.as_ref())?;
                ev.strip_dummies = cfg.strip_dummies;
                Some(ev.evaluate(&plan, flow))
            }
            _ => None,
        };
        Ok(Record {
            domain: job.domain.name.clone(),
            query_id: job.query.id.clone(),
            intent: job.query.intent.clone(),
            decoder: job.decoder,
            setting: job.setting,
            seed: dcfg.seed,
            stop: (job.decoder != DecoderKind::Gold).then_some(decoded.stop),
            completion: decoded.completion,
            parsable,
            scores,
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| RunError::Usage(e.to_string()))?;
    let records: Vec<Record> = pool.install(|| {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect::<Result<Vec<_>, _>>()
    })?;

    let mut summary = Vec::new();
    for &decoder in &cfg.decoders {
        for &setting in &cfg.settings {
            let rows: Vec<crate::eval::PlanMetrics> = records
                .iter()
                .filter(|r| r.decoder == decoder && r.setting == setting)
                .map(|r| crate::eval::PlanMetrics {
                    parsable: r.parsable,
                    scores: r.scores,
                })
                .collect();
            summary.push(SummaryRow {
                decoder,
                setting,
                aggregate: aggregate(&rows)?,
            });
        }
    }
    let report = RunReport { records, summary };
    if let Some(dir) = &cfg.output {
        write_reports(dir, cfg, &report)?;
    }
    Ok(report)
}

/// `records.jsonl`, `summary.csv`, `summary.json` and `config.json` under `dir`.
pub fn write_reports(dir: &Path, cfg: &RunConfig, report: &RunReport) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut lines = String::new();
    for r in &report.records {
        lines.push_str(&serde_json::to_string(r).map_err(|e| RunError::Report(e.to_string()))?);
        lines.push('\n');
    }
    let path = dir.join("records.jsonl");
    fs::write(&path, lines).map_err(io_err(&path))?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_COLUMNS).map_err(|e| RunError::Report(e.to_string()))?;
    for row in &report.summary {
        w.write_record(row.cells()).map_err(|e| RunError::Report(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| RunError::Report(e.to_string()))?;
    let path = dir.join("summary.csv");
    fs::write(&path, bytes).map_err(io_err(&path))?;

    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&report.summary).map_err(|e| RunError::Report(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(io_err(&path))?;

    let path = dir.join("config.json");
    let text = serde_json::to_string_pretty(cfg).map_err(|e| RunError::Report(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(())
}

/// Renders the summary as an aligned text table.
pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut cells = vec![SUMMARY_COLUMNS.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    cells.extend(rows.iter().map(SummaryRow::cells));
    let widths: Vec<usize> = (0..SUMMARY_COLUMNS.len())
        .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in cells {
        let line: Vec<String> = r.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Result of [`cmd_plan`].
#[derive(Debug, Clone)]
pub struct PlanOutput {
    /// Exemplar units followed by the generated units.
    pub plan_text: String,
    pub decoded: Decoded,
}

impl PlanOutput {
    /// One JSON object per generated unit.
    pub fn trace_jsonl(&self) -> Result<String, RunError> {
        let mut out = String::new();
        for t in &self.decoded.trace {
            out.push_str(&serde_json::to_string(t).map_err(|e| RunError::Report(e.to_string()))?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Generates one plan for `query_id` with the first configured decoder and setting.
pub fn cmd_plan(cfg: &RunConfig, query_id: &str) -> Result<PlanOutput, RunError> {
    cfg.decoder.validate()?;
    let domains = cfg.load_domains()?;
    let (domain, query) = domains
        .iter()
        .find_map(|d| d.query(query_id).map(|q| (d, q)))
        .ok_or_else(|| RunError::Usage(format!("unknown query id {query_id:?}")))?;
    let decoder = cfg.decoders.first().copied().unwrap_or(DecoderKind::Flap);
    let setting = cfg.settings.first().copied().unwrap_or(Setting::AllFlows);
    let dcfg = DecoderConfig {
        setting,
        ..cfg.decoder.clone()
    };
    let sim = cfg.similarity_spec()?.open();
    let (decoded, plan_text) = if decoder == DecoderKind::Gold {
        let lm = ScriptedLm::from_fixture("fallback = \"none\"")?;
        decode_query(&lm, sim.as_ref(), domain, query, decoder, &dcfg)?
    } else {
        let backend = cfg
            .backend_spec()?
            .ok_or_else(|| RunError::Usage("a backend is required (scripted:<path> or remote:<url>)".into()))?;
        let lm = backend.open(query_id)?;
        decode_query(lm.as_ref(), sim.as_ref(), domain, query, decoder, &dcfg)?
    };
    Ok(PlanOutput { plan_text, decoded })
}

/// Issues found in a domain file; `Ok(true)` when there are no errors.
pub fn cmd_validate(domain: &str) -> Result<(bool, Vec<Issue>), RunError> {
    let d = load_domain(domain)?;
    let issues = validate_domain(&d);
    let clean = !issues.iter().any(|i| i.severity == Severity::Error);
    Ok((clean, issues))
}

/// The API dependency graph as DOT, or as a tab-separated edge table.
pub fn cmd_graph(domain: &str, dot: bool) -> Result<String, RunError> {
    let d = load_domain(domain)?;
    let g = ApiGraph::build(&d)?;
    Ok(if dot { g.to_dot() } else { g.to_table() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_parse() {
        assert_eq!(
            "scripted:a/b".parse::<BackendSpec>().unwrap(),
            BackendSpec::Scripted("a/b".into())
        );
        assert_eq!(
            "remote:http://h:1".parse::<BackendSpec>().unwrap(),
            BackendSpec::Remote("http://h:1".into())
        );
        assert!("http://h".parse::<BackendSpec>().is_err());
        assert_eq!("lexical".parse::<SimilaritySpec>().unwrap(), SimilaritySpec::Lexical);
        assert!("cosine".parse::<SimilaritySpec>().is_err());
        assert_eq!("beam".parse::<DecoderKind>().unwrap(), DecoderKind::Beam);
    }

    #[test]
    fn config_file_round_trip() {
        let src = r#"
domains = ["trip_booking"]
decoders = ["greedy", "flap"]
settings = ["all-flows", "relevant-flow"]
backend = "scripted:fixtures"
jobs = 2

[decoder]
lambda = 0.5
top_k = 4
"#;
        let cfg: RunConfig = toml::from_str(src).unwrap();
        assert_eq!(cfg.decoders, vec![DecoderKind::Greedy, DecoderKind::Flap]);
        assert_eq!(cfg.settings.len(), 2);
        assert_eq!((cfg.decoder.lambda, cfg.decoder.top_k, cfg.decoder.lookahead), (0.5, 4, 32));
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }

    #[test]
    fn gold_rows_score_perfectly() {
        let cfg = RunConfig {
            decoders: vec![DecoderKind::Gold],
            ..RunConfig::default()
        };
        let report = cmd_evaluate(&cfg).unwrap();
        assert_eq!(report.summary.len(), 1);
        let a = &report.summary[0].aggregate;
        assert_eq!(a.parsable_pct, 100.0);
        assert_eq!(a.edits_apis.unwrap().mean, 0.0);
        assert_eq!(a.inconsistent_apis_pct.unwrap().mean, 0.0);
        assert_eq!(a.inconsistent_steps_pct.unwrap().mean, 0.0);
        assert!(report.records.iter().all(|r| r.parsable));
    }

    #[test]
    fn missing_backend_is_usage_error() {
        let cfg = RunConfig {
            decoders: vec![DecoderKind::Greedy],
            ..RunConfig::default()
        };
        if std::env::var(BACKEND_URL_ENV).is_err() {
            let err = cmd_evaluate(&cfg).unwrap_err();
            assert_eq!(err.exit_code(), 2);
        }
    }

    #[test]
    fn graph_and_validate_commands() {
        assert!(cmd_validate("trip_booking").unwrap().0);
        let dot = cmd_graph("banking", true).unwrap();
        assert_eq!(dot.matches("->").count(), 15);
        assert!(load_domain("no_such_domain").is_err());
    }
}
