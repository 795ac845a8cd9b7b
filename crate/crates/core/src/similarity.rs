//! Semantic similarity scoring in `[0, 1]`.
//!
//! The default scorer is a Jaccard overlap of content words, which keeps every
//! run deterministic and dependency-free. Embedding models plug in through
//! [`Similarity`], for instance over HTTP with [`RemoteSimilarity`].

use std::collections::BTreeSet;
use std::sync::OnceLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const STOPWORDS_TXT: &str = include_str!("../data/stopwords.txt");

pub fn stopwords() -> &'static BTreeSet<&'static str> {
    static WORDS: OnceLock<BTreeSet<&'static str>> = OnceLock::new();
    WORDS.get_or_init(|| {
        STOPWORDS_TXT
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    })
}

pub trait Similarity: Send + Sync {
    /// Symmetric score in `[0, 1]`; identical non-empty texts score 1.
    fn sim(&self, a: &str, b: &str) -> f64;
}

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("no candidates to compare against")]
    NoCandidates,
}

/// Index and score of the best-matching candidate; ties go to the lowest index.
pub fn argmax_sim<S: AsRef<str>>(
    p: &dyn Similarity,
    query: &str,
    candidates: &[S],
) -> Result<(usize, f64), SimilarityError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let s = p.sim(query, c.as_ref());
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.ok_or(SimilarityError::NoCandidates)
}

/// Jaccard overlap of lowercased alphanumeric words minus stopwords.
#[derive(Debug, Clone, Copy)]
pub struct LexicalSimilarity {
    /// Split `GetAirportCodes` into `get airport codes` before comparing.
    pub split_camel_case: bool,
}

impl Default for LexicalSimilarity {
    fn default() -> Self {
        Self {
            split_camel_case: true,
        }
    }
}

impl LexicalSimilarity {
    pub fn words(&self, text: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for raw in text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
            if self.split_camel_case {
                for part in split_camel(raw) {
                    out.insert(part.to_lowercase());
                }
            } else {
                out.insert(raw.to_lowercase());
            }
        }
        out
    }

    pub fn content_words(&self, text: &str) -> BTreeSet<String> {
        let stop = stopwords();
        self.words(text)
            .into_iter()
            .filter(|w| !stop.contains(w.as_str()))
            .collect()
    }
}

fn split_camel(word: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = word.char_indices().collect();
    let mut parts = Vec::new();
    let mut start = 0;
    for k in 1..chars.len() {
        let (idx, c) = chars[k];
        let prev = chars[k - 1].1;
        let next_lower = chars.get(k + 1).is_some_and(|(_, n)| n.is_lowercase());
        let boundary = c.is_uppercase()
            && (prev.is_lowercase() || prev.is_numeric() || (prev.is_uppercase() && next_lower));
        if boundary {
            parts.push(&word[start..idx]);
            start = idx;
        }
    }
    parts.push(&word[start..]);
    parts
}

impl Similarity for LexicalSimilarity {
    fn sim(&self, a: &str, b: &str) -> f64 {
        let wa = self.content_words(a);
        let wb = self.content_words(b);
        if wa.is_empty() && wb.is_empty() {
            let (a, b) = (a.trim(), b.trim());
            return if !a.is_empty() && a.eq_ignore_ascii_case(b) {
                1.0
            } else {
                0.0
            };
        }
        let inter = wa.intersection(&wb).count();
        let union = wa.union(&wb).count();
        inter as f64 / union as f64
    }
}

#[derive(Debug, Serialize)]
struct SimRequest<'a> {
    a: &'a str,
    b: &'a str,
}

#[derive(Debug, Deserialize)]
struct SimResponse {
    score: f64,
}

/// Embedding-backed scorer reached through `POST {base}/v1/sim`.
///
/// Transport or protocol failures score 0 and are logged, since scoring sits
/// in the inner decoding loop; out-of-range scores are clamped.
pub struct RemoteSimilarity {
    base_url: String,
    agent: ureq::Agent,
}

impl RemoteSimilarity {
    pub fn new(base_url: impl Into<String>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(30))
            .build();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
        }
    }

    pub fn try_sim(&self, a: &str, b: &str) -> Result<f64, String> {
        let resp = self
            .agent
            .post(&format!("{}/v1/sim", self.base_url))
            .send_json(SimRequest { a, b })
            .map_err(|e| e.to_string())?;
        let body: SimResponse = resp.into_json().map_err(|e| e.to_string())?;
        if !body.score.is_finite() {
            return Err(format!("non-finite score {}", body.score));
        }
        Ok(body.score.clamp(0.0, 1.0))
    }
}

impl Similarity for RemoteSimilarity {
    fn sim(&self, a: &str, b: &str) -> f64 {
        match self.try_sim(a, b) {
            Ok(s) => s,
            Err(e) => {
                log::warn!("similarity backend error: {e}");
                0.0
            }
        }
    }
}
