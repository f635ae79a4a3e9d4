//! Reference implementations by exhaustive enumeration of segmentations.
//!
//! Everything here is exponentially slow and exists to validate the chart
//! algorithms on small instances: tests compare [`crate::em`] against these
//! functions on random lexicons and short inputs.

use std::collections::HashMap;

use crate::lexicon::{Bound, Lexicon, WordId};

/// Every segmentation of `u` into admitted words, with its probability
/// (the product of word probabilities).
pub fn parses(lexicon: &Lexicon, u: &[u8], bound: Option<Bound>) -> Vec<(Vec<WordId>, f64)> {
    let mut out = Vec::new();
    let mut prefix: Vec<WordId> = Vec::new();
    extend(lexicon, u, bound, 0, &mut prefix, 1.0, &mut out);
    out
}

fn extend(
    lexicon: &Lexicon,
    u: &[u8],
    bound: Option<Bound>,
    at: usize,
    prefix: &mut Vec<WordId>,
    prob: f64,
    out: &mut Vec<(Vec<WordId>, f64)>,
) {
    if at == u.len() {
        out.push((prefix.clone(), prob));
        return;
    }
    let mut matches: Vec<(WordId, usize)> = Vec::new();
    lexicon.prefix_matches(u, at, |id, len| {
        let admitted = match bound {
            None => true,
            Some(b) => lexicon.admits(lexicon.word(id), b),
        };
        if admitted {
            matches.push((id, len));
        }
    });
    for (id, len) in matches {
        prefix.push(id);
        extend(
            lexicon,
            u,
            bound,
            at + len,
            prefix,
            prob * lexicon.word(id).prob(),
            out,
        );
        prefix.pop();
    }
}

/// p_G(u): the summed probability of all segmentations.
pub fn prob(lexicon: &Lexicon, u: &[u8], bound: Option<Bound>) -> f64 {
    parses(lexicon, u, bound).iter().map(|(_, p)| p).sum()
}

/// Expected usage count of each word across the posterior over parses.
pub fn counts(lexicon: &Lexicon, u: &[u8], bound: Option<Bound>) -> HashMap<WordId, f64> {
    let all = parses(lexicon, u, bound);
    let total: f64 = all.iter().map(|(_, p)| p).sum();
    let mut out = HashMap::new();
    if total == 0.0 {
        return out;
    }
    for (words, p) in &all {
        let weight = p / total;
        for &w in words {
            *out.entry(w).or_insert(0.0) += weight;
        }
    }
    out
}

/// Expected count of each adjacent word pair across the posterior.
pub fn pair_counts(
    lexicon: &Lexicon,
    u: &[u8],
    bound: Option<Bound>,
) -> HashMap<(WordId, WordId), f64> {
    let all = parses(lexicon, u, bound);
    let total: f64 = all.iter().map(|(_, p)| p).sum();
    let mut out = HashMap::new();
    if total == 0.0 {
        return out;
    }
    for (words, p) in &all {
        let weight = p / total;
        for pair in words.windows(2) {
            *out.entry((pair[0], pair[1])).or_insert(0.0) += weight;
        }
    }
    out
}

/// The most probable parse, with ties broken like the chart Viterbi: fewer
/// words, then the earliest differing word longer, then the lower word id.
/// Returns the parse's ln-probability (right-associated sum, matching the
/// suffix dynamic program bitwise).
///
/// Probabilities are compared through [`em::quantize_ln`] sums, the same
/// order-independent key the chart Viterbi ranks by, so both
/// implementations agree on exactly which parses tie.
pub fn viterbi(lexicon: &Lexicon, u: &[u8], bound: Option<Bound>) -> Option<(Vec<WordId>, f64)> {
    use crate::em::quantize_ln;
    let all = parses(lexicon, u, bound);
    let mut best: Option<(Vec<WordId>, i128)> = None;
    for (words, _) in all {
        let score: i128 = words.iter().map(|&w| quantize_ln(lexicon.ln_prob(w))).sum();
        let better = match &best {
            None => true,
            Some((bw, bs)) => {
                if score != *bs {
                    score > *bs
                } else if words.len() != bw.len() {
                    words.len() < bw.len()
                } else {
                    prefer_at_first_difference(lexicon, &words, bw)
                }
            }
        };
        if better {
            best = Some((words, score));
        }
    }
    best.map(|(words, _)| {
        let ln_p = words
            .iter()
            .rev()
            .fold(0.0, |tail, &w| lexicon.ln_prob(w) + tail);
        (words, ln_p)
    })
}

fn prefer_at_first_difference(lexicon: &Lexicon, a: &[WordId], b: &[WordId]) -> bool {
    for (&wa, &wb) in a.iter().zip(b.iter()) {
        if wa == wb {
            continue;
        }
        let la = lexicon.word(wa).surface.len();
        let lb = lexicon.word(wb).surface.len();
        return if la != lb { la > lb } else { wa < wb };
    }
    false
}
