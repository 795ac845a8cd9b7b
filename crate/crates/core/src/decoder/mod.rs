//! Plan decoders: FLAP (lookahead-heuristic constrained decoding) and the
//! greedy, beam and nucleus baselines.

mod baselines;
mod flap;
mod heuristics;
mod prompt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{parse_plan, unit_end, Plan, PlanParseError};
use crate::graph::GraphError;
use crate::lm::LmError;

pub use baselines::{beam_decode, greedy_decode, nucleus_decode, nucleus_set};
pub use flap::{flap_decode, CandidateTrace, UnitTrace};
pub use heuristics::{
    combine, ApiCase, ApiScore, HeuristicBreakdown, HeuristicParts, LookaheadUnit, Scorer, StepCase,
    StepScore,
};
pub use prompt::{build_prompt, Prompt};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid decoder config: {0}")]
    Config(String),
    #[error("query {query:?} has unknown intent {intent:?}")]
    UnknownIntent { query: String, intent: String },
}

/// Which flows the prompt shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    AllFlows,
    RelevantFlow,
}

impl Setting {
    pub fn as_str(self) -> &'static str {
        match self {
            Setting::AllFlows => "all-flows",
            Setting::RelevantFlow => "relevant-flow",
        }
    }
}

impl std::str::FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all-flows" | "all" => Ok(Setting::AllFlows),
            "relevant-flow" | "relevant" => Ok(Setting::RelevantFlow),
            other => Err(format!("unknown setting {other:?} (all-flows | relevant-flow)")),
        }
    }
}

/// Every scalar knob of the decoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderConfig {
    /// Weight of the heuristic score against the token probability.
    pub lambda: f64,
    /// Candidate tokens scored per constrained position.
    pub top_k: usize,
    /// Lookahead length in tokens.
    pub lookahead: usize,
    /// Step weight when the intended step is in the flow being followed.
    pub alpha_a: f64,
    /// Step weight when the intended step deviates from that flow.
    pub alpha_b: f64,
    /// Step weight when the intended step is the one already under execution.
    pub alpha_c: f64,
    /// API weight for hallucinated or not-yet-permitted APIs.
    pub beta_soft: f64,
    pub scale_a: f64,
    pub scale_b: f64,
    pub scale_c: f64,
    pub scale_d: f64,
    /// Divide the combined heuristic by `scale_a + scale_b + scale_c + scale_d`.
    pub normalize_heuristic: bool,
    pub max_units: usize,
    pub max_tokens: usize,
    /// Look ahead every `stride` tokens; greedy in between.
    pub stride: usize,
    pub seed: u64,
    pub setting: Setting,
    pub beams: usize,
    pub no_repeat_ngram: usize,
    pub top_p: f64,
    /// Distribution size requested for nucleus sampling.
    pub nucleus_top_k: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            lambda: 0.7,
            top_k: 10,
            lookahead: 32,
            alpha_a: 0.5,
            alpha_b: 0.1,
            alpha_c: 1.0,
            beta_soft: 0.1,
            scale_a: 1.0,
            scale_b: 1.0,
            scale_c: 1.0,
            scale_d: 1.0,
            normalize_heuristic: false,
            max_units: 20,
            max_tokens: 20 * 32,
            stride: 1,
            seed: 0,
            setting: Setting::AllFlows,
            beams: 3,
            no_repeat_ngram: 10,
            top_p: 0.9,
            nucleus_top_k: 50,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        let fail = |m: String| Err(DecodeError::Config(m));
        if !(0.0..=1.0).contains(&self.lambda) {
            return fail(format!("lambda {} outside [0, 1]", self.lambda));
        }
        if !(0.0..1.0).contains(&self.beta_soft) {
            return fail(format!("beta_soft {} outside [0, 1)", self.beta_soft));
        }
        if !(self.alpha_c >= self.alpha_a && self.alpha_a >= self.alpha_b) {
            return fail(format!(
                "expected alpha_c >= alpha_a >= alpha_b, got {} / {} / {}",
                self.alpha_c, self.alpha_a, self.alpha_b
            ));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return fail(format!("top_p {} outside (0, 1]", self.top_p));
        }
        for (name, v) in [
            ("top_k", self.top_k),
            ("lookahead", self.lookahead),
            ("max_units", self.max_units),
            ("max_tokens", self.max_tokens),
            ("stride", self.stride),
            ("beams", self.beams),
            ("nucleus_top_k", self.nucleus_top_k),
        ] {
            if v == 0 {
                return fail(format!("{name} must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Why generation ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// A `Finish()` unit was generated.
    Finished,
    MaxUnits,
    MaxTokens,
    /// The model offered no next token.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// Generated text after the prompt.
    pub completion: String,
    pub tokens: Vec<String>,
    pub stop: StopReason,
    /// Per-unit scoring record (FLAP only).
    pub trace: Vec<UnitTrace>,
    /// Cumulative log-probability of the emitted tokens (beam search only).
    pub log_prob: Option<f64>,
}

impl Decoded {
    pub fn plan(&self) -> Result<Plan, PlanParseError> {
        parse_plan(&self.completion)
    }
}

/// Text generated so far, with unit-boundary bookkeeping shared by all decoders.
#[derive(Debug, Clone)]
pub(crate) struct Generator {
    context: String,
    prompt_len: usize,
    /// Offset in `context` where the current (incomplete) unit begins.
    unit_start: usize,
    tokens: Vec<String>,
    units: usize,
}

impl Generator {
    pub(crate) fn new(prompt: &str) -> Self {
        Self {
            context: prompt.to_string(),
            prompt_len: prompt.len(),
            unit_start: prompt.len(),
            tokens: Vec::new(),
            units: 0,
        }
    }

    pub(crate) fn context(&self) -> &str {
        &self.context
    }

    #[cfg(test)]
    pub(crate) fn completion(&self) -> &str {
        &self.context[self.prompt_len..]
    }

    pub(crate) fn partial_unit(&self) -> &str {
        &self.context[self.unit_start..]
    }

    pub(crate) fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub(crate) fn limit_reached(&self, cfg: &DecoderConfig) -> Option<StopReason> {
        if self.units >= cfg.max_units {
            Some(StopReason::MaxUnits)
        } else if self.tokens.len() >= cfg.max_tokens {
            Some(StopReason::MaxTokens)
        } else {
            None
        }
    }

    /// Appends a token; returns the unit text if this token completed one.
    pub(crate) fn push(&mut self, token: &str) -> Option<String> {
        self.context.push_str(token);
        self.tokens.push(token.to_string());
        let end = unit_end(self.partial_unit())?;
        let unit = self.partial_unit()[..end].to_string();
        self.unit_start += end;
        self.units += 1;
        Some(unit)
    }

    pub(crate) fn into_decoded(self, stop: StopReason) -> Decoded {
        Decoded {
            completion: self.context[self.prompt_len..].to_string(),
            tokens: self.tokens,
            stop,
            trace: Vec::new(),
            log_prob: None,
        }
    }
}

/// Whether a completed unit calls `Finish()`.
pub(crate) fn unit_is_terminal(unit: &str) -> bool {
    parse_plan(unit).is_ok_and(|p| p.terminated)
}
