//! Deterministic rule-table language model for tests and desk-scale runs.
//!
//! A fixture is a TOML document:
//!
//! ```toml
//! vocab = ["[thought]", " Confirm()", "\n"]
//! fallback = "uniform"        # or "none": unmatched contexts end generation
//!
//! [[rules]]                   # explicit distribution
//! match_suffix = "[API]"
//! dist = { " Confirm()" = 0.9, " OrderTrip()" = 0.1 }
//!
//! [[rules]]                   # deterministic text, expanded word by word
//! after = "Start()\n"
//! text = "[thought] Suggest flights to the customer [API] GetAirports()\n"
//! ```
//!
//! Rules are tried in file order against the end of the context; the first
//! match supplies the distribution.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{LanguageModel, LmError, ModelInfo, TokenDistribution, TokenProb};
use crate::grammar::{API_TAG, THOUGHT_TAG};

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedRule {
    pub match_suffix: String,
    pub dist: TokenDistribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Fallback {
    Uniform,
    None,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFixture {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    vocab: Vec<String>,
    #[serde(default = "default_fallback")]
    fallback: Fallback,
    #[serde(default)]
    rules: Vec<RawRule>,
}

fn default_fallback() -> Fallback {
    Fallback::Uniform
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    match_suffix: Option<String>,
    dist: Option<BTreeMap<String, f64>>,
    after: Option<String>,
    text: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ScriptedLm {
    name: String,
    rules: Vec<ScriptedRule>,
    fallback: TokenDistribution,
}

/// Splits text into word tokens: a newline is its own token, spaces attach to
/// the following word, and `[thought]` / `[API]` tags are always separate.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut has_word = false;
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if c == '\n' {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            tokens.push("\n".to_string());
            has_word = false;
            rest = &rest[1..];
            continue;
        }
        if c.is_whitespace() {
            if has_word {
                tokens.push(std::mem::take(&mut current));
                has_word = false;
            }
            current.push(c);
            rest = &rest[c.len_utf8()..];
            continue;
        }
        if let Some(tag) = [THOUGHT_TAG, API_TAG].into_iter().find(|t| rest.starts_with(t)) {
            if has_word {
                tokens.push(std::mem::take(&mut current));
            }
            current.push_str(tag);
            tokens.push(std::mem::take(&mut current));
            has_word = false;
            rest = &rest[tag.len()..];
            continue;
        }
        current.push(c);
        has_word = true;
        rest = &rest[c.len_utf8()..];
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

impl ScriptedLm {
    pub fn new(rules: Vec<ScriptedRule>, vocab: Vec<String>) -> Result<Self, LmError> {
        let fallback = uniform(&vocab)?;
        Ok(Self {
            name: "scripted".into(),
            rules,
            fallback,
        })
    }

    pub fn from_fixture(source: &str) -> Result<Self, LmError> {
        let raw: RawFixture =
            toml::from_str(source).map_err(|e| LmError::Fixture(e.message().to_string()))?;
        let mut rules = Vec::new();
        for (i, r) in raw.rules.into_iter().enumerate() {
            match r {
                RawRule {
                    match_suffix: Some(suffix),
                    dist: Some(dist),
                    after: None,
                    text: None,
                } => {
                    let dist = TokenDistribution::from_pairs(dist)
                        .map_err(|e| LmError::Fixture(format!("rule {i}: {e}")))?;
                    rules.push(ScriptedRule {
                        match_suffix: suffix,
                        dist,
                    });
                }
                RawRule {
                    match_suffix: None,
                    dist: None,
                    after: Some(after),
                    text: Some(text),
                } => {
                    let tokens = tokenize(&text);
                    if tokens.is_empty() {
                        return Err(LmError::Fixture(format!("rule {i}: empty text")));
                    }
                    let mut suffix = after;
                    for tok in tokens {
                        let dist = TokenDistribution::from_pairs([(tok.clone(), 1.0)])?;
                        rules.push(ScriptedRule {
                            match_suffix: suffix.clone(),
                            dist,
                        });
                        suffix.push_str(&tok);
                    }
                }
                _ => {
                    return Err(LmError::Fixture(format!(
                        "rule {i}: needs either match_suffix+dist or after+text"
                    )))
                }
            }
        }
        let fallback = match raw.fallback {
            Fallback::Uniform => uniform(&raw.vocab)?,
            Fallback::None => TokenDistribution::default(),
        };
        Ok(Self {
            name: raw.name.unwrap_or_else(|| "scripted".into()),
            rules,
            fallback,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LmError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| LmError::Fixture(format!("{}: {e}", path.display())))?;
        Self::from_fixture(&text)
    }

    pub fn rules(&self) -> &[ScriptedRule] {
        &self.rules
    }

    fn lookup(&self, context: &str) -> &TokenDistribution {
        self.rules
            .iter()
            .find(|r| context.ends_with(&r.match_suffix))
            .map_or(&self.fallback, |r| &r.dist)
    }
}

fn uniform(vocab: &[String]) -> Result<TokenDistribution, LmError> {
    if vocab.is_empty() {
        return Ok(TokenDistribution::default());
    }
    let p = 1.0 / vocab.len() as f64;
    TokenDistribution::new(
        vocab
            .iter()
            .map(|t| TokenProb {
                token: t.clone(),
                prob: p,
            })
            .collect(),
    )
    .map_err(|e| LmError::Fixture(format!("vocab: {e}")))
}

impl LanguageModel for ScriptedLm {
    fn next_distribution(&self, context: &str, top_k: usize) -> Result<TokenDistribution, LmError> {
        if top_k == 0 {
            return Err(LmError::Precondition("top_k must be at least 1".into()));
        }
        Ok(self.lookup(context).clone().truncate(top_k))
    }

    fn info(&self) -> ModelInfo {
        ModelInfo {
            model: self.name.clone(),
            deterministic: true,
        }
    }
}
