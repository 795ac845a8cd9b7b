//! Next-token distribution providers.
//!
//! The backend owns tokenization: contexts go in as text and tokens come back
//! as opaque text atoms that the decoder concatenates.

mod remote;
mod scripted;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use remote::RemoteLm;
pub use scripted::{tokenize, ScriptedLm, ScriptedRule};

#[derive(Debug, Error)]
pub enum LmError {
    #[error("backend unreachable: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("invalid fixture: {0}")]
    Fixture(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenProb {
    pub token: String,
    #[serde(rename = "p")]
    pub prob: f64,
}

/// Candidate next tokens, ordered by probability (descending) then token text.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TokenDistribution {
    entries: Vec<TokenProb>,
}

const MASS_TOLERANCE: f64 = 1e-6;

fn canonical_order(a: &TokenProb, b: &TokenProb) -> Ordering {
    b.prob
        .partial_cmp(&a.prob)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.token.cmp(&b.token))
}

impl TokenDistribution {
    /// Validates and sorts `entries`.
    pub fn new(mut entries: Vec<TokenProb>) -> Result<Self, LmError> {
        let mut total = 0.0;
        for e in &entries {
            if !(0.0..=1.0).contains(&e.prob) {
                return Err(LmError::Protocol(format!(
                    "probability {} of {:?} outside [0, 1]",
                    e.prob, e.token
                )));
            }
            total += e.prob;
        }
        if total > 1.0 + MASS_TOLERANCE {
            return Err(LmError::Protocol(format!("probability mass {total} exceeds 1")));
        }
        entries.sort_by(canonical_order);
        let mut seen = std::collections::BTreeSet::new();
        if !entries.iter().all(|e| seen.insert(e.token.as_str())) {
            return Err(LmError::Protocol("duplicate token".into()));
        }
        Ok(Self { entries })
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Result<Self, LmError> {
        Self::new(
            pairs
                .into_iter()
                .map(|(token, prob)| TokenProb {
                    token: token.into(),
                    prob,
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[TokenProb] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn top(&self) -> Option<&TokenProb> {
        self.entries.first()
    }

    pub fn truncate(mut self, top_k: usize) -> Self {
        self.entries.truncate(top_k);
        self
    }

    pub fn mass(&self) -> f64 {
        self.entries.iter().map(|e| e.prob).sum()
    }
}

/// Text appended by a greedy rollout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rollout {
    pub text: String,
    /// The stop pattern was reached before the token budget ran out.
    pub stopped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model: String,
    pub deterministic: bool,
}

/// Whether `stop` occurs in `context + appended` ending inside `appended`.
pub(crate) fn stop_reached(context: &str, appended: &str, stop: &str) -> bool {
    if stop.is_empty() {
        return false;
    }
    let keep = stop.len().saturating_sub(1).min(context.len());
    let mut from = context.len() - keep;
    while !context.is_char_boundary(from) {
        from += 1;
    }
    let mut window = String::with_capacity(context.len() - from + appended.len());
    window.push_str(&context[from..]);
    window.push_str(appended);
    window.contains(stop)
}

pub trait LanguageModel: Send + Sync {
    /// The `top_k` most probable next tokens (fewer if the vocabulary is smaller).
    fn next_distribution(&self, context: &str, top_k: usize) -> Result<TokenDistribution, LmError>;

    /// Appends argmax tokens until `stop` appears or `max_tokens` are emitted.
    fn rollout_greedy(&self, context: &str, max_tokens: usize, stop: &str) -> Result<Rollout, LmError> {
        if max_tokens == 0 {
            return Err(LmError::Precondition("max_tokens must be at least 1".into()));
        }
        let mut ctx = context.to_string();
        let base = ctx.len();
        for _ in 0..max_tokens {
            let dist = self.next_distribution(&ctx, 1)?;
            let Some(top) = dist.top() else { break };
            ctx.push_str(&top.token);
            if stop_reached(context, &ctx[base..], stop) {
                return Ok(Rollout {
                    text: ctx.split_off(base),
                    stopped: true,
                });
            }
        }
        Ok(Rollout {
            text: ctx.split_off(base),
            stopped: false,
        })
    }

    fn info(&self) -> ModelInfo;
}

impl<T: LanguageModel + ?Sized> LanguageModel for Box<T> {
    fn next_distribution(&self, context: &str, top_k: usize) -> Result<TokenDistribution, LmError> {
        (**self).next_distribution(context, top_k)
    }

    fn rollout_greedy(&self, context: &str, max_tokens: usize, stop: &str) -> Result<Rollout, LmError> {
        (**self).rollout_greedy(context, max_tokens, stop)
    }

    fn info(&self) -> ModelInfo {
        (**self).info()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_is_sorted_with_token_tiebreak() {
        let d = TokenDistribution::from_pairs([("b", 0.25), ("a", 0.25), ("c", 0.5)]).unwrap();
        let toks: Vec<&str> = d.entries().iter().map(|e| e.token.as_str()).collect();
        assert_eq!(toks, vec!["c", "a", "b"]);
    }

    #[test]
    fn distribution_rejects_bad_mass() {
        assert!(TokenDistribution::from_pairs([("a", 1.2)]).is_err());
        assert!(TokenDistribution::from_pairs([("a", 0.7), ("b", 0.4)]).is_err());
        assert!(TokenDistribution::from_pairs([("a", 0.7), ("b", 0.3 + 5e-7)]).is_ok());
        assert!(TokenDistribution::from_pairs([("a", 0.3), ("a", 0.3)]).is_err());
        assert!(TokenDistribution::from_pairs([("a", 0.3), ("b", 0.2), ("a", 0.1)]).is_err());
    }

    #[test]
    fn stop_window_spans_context_boundary() {
        assert!(stop_reached("[API] X(", ")", "()"));
        assert!(stop_reached("", " X()", "()"));
        assert!(!stop_reached("()", " more", "()"));
        assert!(!stop_reached("é", "x", "()"));
    }
}
