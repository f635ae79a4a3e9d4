//! Hierarchical-segmentation scoring and held-out cross-entropy.
//!
//! A learned lexicon is scored against a gold word segmentation by
//! *bracketing*: the Viterbi parse contributes its top-level spans, and each
//! word recursively contributes the spans of its own representation, down to
//! single terminals. The resulting span sets are compared micro-averaged
//! (summing numerators and denominators over the corpus).

use std::collections::BTreeSet;
use std::collections::HashMap;

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::em::{analyze, viterbi, ParseTask};
use crate::lexicon::{Bound, Lexicon, WordId};

/// The set of ⟨i,j⟩ spans (0 ≤ i < j ≤ length) claimed for one utterance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BracketSet {
    spans: BTreeSet<(usize, usize)>,
}

impl BracketSet {
    pub fn new() -> Self {
        BracketSet::default()
    }

    pub fn from_spans<I: IntoIterator<Item = (usize, usize)>>(spans: I) -> Self {
        let spans: BTreeSet<(usize, usize)> = spans.into_iter().collect();
        debug_assert!(spans.iter().all(|&(i, j)| i < j));
        BracketSet { spans }
    }

    pub fn insert(&mut self, span: (usize, usize)) {
        debug_assert!(span.0 < span.1);
        self.spans.insert(span);
    }

    pub fn contains(&self, span: (usize, usize)) -> bool {
        self.spans.contains(&span)
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.spans.iter().copied()
    }

    pub fn intersection_len(&self, other: &BracketSet) -> usize {
        self.spans.iter().filter(|s| other.spans.contains(s)).count()
    }
}

/// Do two spans strictly cross (partially overlap without nesting)?
#[inline]
pub fn crosses(pred: (usize, usize), gold: (usize, usize)) -> bool {
    let (k, l) = pred;
    let (i, j) = gold;
    (k < i && i < l && l < j) || (i < k && k < j && l > j)
}

/// Computes the bracketing of one utterance: top-level Viterbi spans plus,
/// recursively, the spans of each word's own representation. A span for the
/// whole utterance appears only when a single word covers it.
pub fn bracketing(lexicon: &Lexicon, u: &[u8]) -> BracketSet {
    let mut cache: HashMap<WordId, Vec<(usize, usize)>> = HashMap::new();
    let mut out = BracketSet::new();
    let (words, _) = match viterbi(lexicon, u, None) {
        Some(parse) => parse,
        None => return out,
    };
    let mut at = 0usize;
    for &w in &words {
        for &(a, b) in word_spans(lexicon, w, &mut cache) {
            out.insert((at + a, at + b));
        }
        at += lexicon.word(w).surface.len();
    }
    out
}

/// Spans of a word's internal structure, relative to the word's start, its
/// own full span included. Memoized: the expansion of a word is the same
/// wherever it occurs.
fn word_spans<'c>(
    lexicon: &Lexicon,
    id: WordId,
    cache: &'c mut HashMap<WordId, Vec<(usize, usize)>>,
) -> &'c [(usize, usize)] {
    if !cache.contains_key(&id) {
        let word = lexicon.word(id);
        let mut spans = vec![(0usize, word.surface.len())];
        if !word.is_terminal {
            let children: Vec<WordId> = match &word.rep {
                Some(rep) => rep.words.clone(),
                None => {
                    viterbi(lexicon, &word.surface, Some(Bound::of(word)))
                        .map(|(words, _)| words)
                        .unwrap_or_default()
                }
            };
            let mut at = 0usize;
            for child in children {
                let child_len = lexicon.word(child).surface.len();
                // Recurse before borrowing the cache entry.
                let child_spans = word_spans(lexicon, child, cache).to_vec();
                for (a, b) in child_spans {
                    spans.push((at + a, at + b));
                }
                at += child_len;
            }
        }
        spans.sort_unstable();
        spans.dedup();
        cache.insert(id, spans);
    }
    &cache[&id]
}

/// Bracketings for every utterance of a corpus, in order.
pub fn bracketings(lexicon: &Lexicon, corpus: &Corpus) -> Vec<BracketSet> {
    corpus
        .utterances
        .par_iter()
        .map(|u| bracketing(lexicon, &u.symbols))
        .collect()
}

/// Micro-averaged recall: Σ|gold ∩ predicted| / Σ|gold|. `None` when there
/// are no gold spans.
pub fn recall(gold: &[BracketSet], predicted: &[BracketSet]) -> Option<f64> {
    assert_eq!(gold.len(), predicted.len(), "corpora must align");
    let hits: usize = gold
        .iter()
        .zip(predicted)
        .map(|(g, p)| g.intersection_len(p))
        .sum();
    let total: usize = gold.iter().map(|g| g.len()).sum();
    (total > 0).then(|| hits as f64 / total as f64)
}

/// Micro-averaged accuracy: Σ|gold ∩ predicted| / Σ|predicted|. `None` when
/// nothing was predicted.
pub fn accuracy(gold: &[BracketSet], predicted: &[BracketSet]) -> Option<f64> {
    recall(predicted, gold)
}

/// Micro-averaged crossing rate: the fraction of gold spans strictly crossed
/// by some predicted span of the same utterance. `None` when there are no
/// gold spans.
pub fn crossing_brackets(gold: &[BracketSet], predicted: &[BracketSet]) -> Option<f64> {
    assert_eq!(gold.len(), predicted.len(), "corpora must align");
    let crossed: usize = gold
        .iter()
        .zip(predicted)
        .map(|(g, p)| {
            g.iter()
                .filter(|&gs| p.iter().any(|ps| crosses(ps, gs)))
                .count()
        })
        .sum();
    let total: usize = gold.iter().map(|g| g.len()).sum();
    (total > 0).then(|| crossed as f64 / total as f64)
}

/// Segmentation scores of a lexicon against a gold bracketing.
#[derive(Clone, Copy, Debug)]
pub struct SegmentationReport {
    pub recall: Option<f64>,
    pub accuracy: Option<f64>,
    pub crossing: Option<f64>,
    pub gold_spans: usize,
    pub predicted_spans: usize,
    pub utterances: usize,
}

pub fn score_segmentation(
    lexicon: &Lexicon,
    corpus: &Corpus,
    gold: &[BracketSet],
) -> SegmentationReport {
    let predicted = bracketings(lexicon, corpus);
    SegmentationReport {
        recall: recall(gold, &predicted),
        accuracy: accuracy(gold, &predicted),
        crossing: crossing_brackets(gold, &predicted),
        gold_spans: gold.iter().map(|g| g.len()).sum(),
        predicted_spans: predicted.iter().map(|p| p.len()).sum(),
        utterances: corpus.utterances.len(),
    }
}

/// Held-out cross-entropy in bits per terminal symbol, using the complete
/// (all-segmentations) probability of each utterance.
pub fn cross_entropy(lexicon: &Lexicon, corpus: &Corpus) -> f64 {
    let tasks: Vec<ParseTask> = corpus
        .utterances
        .iter()
        .map(|u| ParseTask::utterance(&u.symbols))
        .collect();
    let (_, dl) = analyze(lexicon, &tasks);
    dl.bits_per_symbol()
}
