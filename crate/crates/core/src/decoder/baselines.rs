//! Unconstrained decoding baselines: greedy, beam search and nucleus sampling.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{unit_is_terminal, DecodeError, Decoded, DecoderConfig, Generator, StopReason};
use crate::lm::{LanguageModel, TokenProb};

/// Emits the most probable token until `Finish()`, a limit, or exhaustion.
pub fn greedy_decode(lm: &dyn LanguageModel, prompt: &str, cfg: &DecoderConfig) -> Result<Decoded, DecodeError> {
    cfg.validate()?;
    let mut gen = Generator::new(prompt);
    let stop = loop {
        if let Some(stop) = gen.limit_reached(cfg) {
            break stop;
        }
        let dist = lm.next_distribution(gen.context(), 1)?;
        let Some(top) = dist.top() else {
            break StopReason::Exhausted;
        };
        if gen.push(&top.token).is_some_and(|u| unit_is_terminal(&u)) {
            break StopReason::Finished;
        }
    };
    Ok(gen.into_decoded(stop))
}

#[derive(Clone)]
struct Hypothesis {
    gen: Generator,
    log_prob: f64,
}

/// True if appending `token` would repeat an n-gram already in `tokens`.
fn repeats_ngram(tokens: &[String], token: &str, n: usize) -> bool {
    if n == 0 || tokens.len() + 1 < n {
        return false;
    }
    let prefix = &tokens[tokens.len() + 1 - n..];
    tokens
        .windows(n)
        .any(|w| w[..n - 1] == *prefix && w[n - 1] == token)
}

/// Beam search over cumulative log-probability.
///
/// Each beam is expanded with its `2 * beams` most likely tokens; finished
/// hypotheses leave the beam, and the search ends once no active hypothesis
/// can beat the best finished one (scores only decrease as tokens are added).
pub fn beam_decode(lm: &dyn LanguageModel, prompt: &str, cfg: &DecoderConfig) -> Result<Decoded, DecodeError> {
    cfg.validate()?;
    let mut active = vec![Hypothesis {
        gen: Generator::new(prompt),
        log_prob: 0.0,
    }];
    let mut finished: Vec<(Hypothesis, StopReason)> = Vec::new();
    let best_finished = |f: &[(Hypothesis, StopReason)]| {
        f.iter().map(|(h, _)| h.log_prob).fold(f64::NEG_INFINITY, f64::max)
    };

    while !active.is_empty() {
        let mut expansions: Vec<(f64, usize, TokenProb)> = Vec::new();
        for (i, h) in active.iter().enumerate() {
            if let Some(stop) = h.gen.limit_reached(cfg) {
                finished.push((h.clone(), stop));
                continue;
            }
            let dist = lm.next_distribution(h.gen.context(), 2 * cfg.beams)?;
            if dist.is_empty() {
                finished.push((h.clone(), StopReason::Exhausted));
                continue;
            }
            for e in dist.entries() {
                if e.prob <= 0.0 || repeats_ngram(h.gen.tokens(), &e.token, cfg.no_repeat_ngram) {
                    continue;
                }
                expansions.push((h.log_prob + e.prob.ln(), i, e.clone()));
            }
        }
        expansions.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then_with(|| a.2.token.cmp(&b.2.token))
        });
        let mut next = Vec::with_capacity(cfg.beams);
        for (score, i, e) in expansions {
            if next.len() == cfg.beams {
                break;
            }
            let mut h = active[i].clone();
            h.log_prob = score;
            if h.gen.push(&e.token).is_some_and(|u| unit_is_terminal(&u)) {
                finished.push((h, StopReason::Finished));
            } else {
                next.push(h);
            }
        }
        active = next;
        let bound = best_finished(&finished);
        if active.iter().all(|h| h.log_prob <= bound) {
            break;
        }
    }

    // first finished wins ties, as it was reached with fewer tokens
    let mut best: Option<(Hypothesis, StopReason)> = None;
    for (h, stop) in finished {
        if best.as_ref().is_none_or(|(b, _)| h.log_prob > b.log_prob) {
            best = Some((h, stop));
        }
    }
    let (h, stop) = match best {
        Some(b) => b,
        None => (
            Hypothesis {
                gen: Generator::new(prompt),
                log_prob: 0.0,
            },
            StopReason::Exhausted,
        ),
    };
    let mut out = h.gen.into_decoded(stop);
    out.log_prob = Some(h.log_prob);
    Ok(out)
}

/// Smallest probability-ordered prefix whose mass reaches `top_p` (all entries
/// if the distribution never gets there).
pub fn nucleus_set(entries: &[TokenProb], top_p: f64) -> &[TokenProb] {
    let mut mass = 0.0;
    for (i, e) in entries.iter().enumerate() {
        mass += e.prob;
        if mass >= top_p {
            return &entries[..=i];
        }
    }
    entries
}

/// Samples from the renormalized nucleus, seeded by `cfg.seed`.
pub fn nucleus_decode(lm: &dyn LanguageModel, prompt: &str, cfg: &DecoderConfig) -> Result<Decoded, DecodeError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gen = Generator::new(prompt);
    let stop = loop {
        if let Some(stop) = gen.limit_reached(cfg) {
            break stop;
        }
        let dist = lm.next_distribution(gen.context(), cfg.nucleus_top_k)?;
        let nucleus = nucleus_set(dist.entries(), cfg.top_p);
        let mass: f64 = nucleus.iter().map(|e| e.prob).sum();
        let Some(last) = nucleus.last() else {
            break StopReason::Exhausted;
        };
        let r = rng.gen::<f64>() * mass;
        let mut acc = 0.0;
        let mut token = &last.token;
        for e in nucleus {
            acc += e.prob;
            if r < acc {
                token = &e.token;
                break;
            }
        }
        if gen.push(token).is_some_and(|u| unit_is_terminal(&u)) {
            break StopReason::Finished;
        }
    };
    Ok(gen.into_decoded(stop))
}
