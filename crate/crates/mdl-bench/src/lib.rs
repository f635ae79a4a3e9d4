//! Shared fixtures for the pipeline benchmarks: a deterministic synthetic
//! corpus and a lexicon containing its vocabulary.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use mdl_core::corpus::Corpus;
use mdl_core::lexicon::{Lexicon, SememeSet};

/// Words the synthetic utterances are concatenated from, with relative
/// sampling weights.
pub const VOCABULARY: &[(&str, u32)] = &[
    ("the", 20),
    ("and", 12),
    ("of", 10),
    ("to", 8),
    ("that", 6),
    ("in", 6),
    ("he", 5),
    ("shall", 5),
    ("unto", 5),
    ("for", 4),
    ("his", 4),
    ("they", 4),
    ("with", 3),
    ("said", 3),
    ("upon", 3),
    ("them", 3),
    ("house", 2),
    ("king", 2),
    ("children", 2),
    ("people", 2),
    ("against", 1),
    ("behold", 1),
    ("therefore", 1),
    ("everlasting", 1),
];

/// Deterministic corpus of `utterances` lines, each `words_per_utterance`
/// vocabulary words long, with no separators.
pub fn synthetic_corpus(utterances: usize, words_per_utterance: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: u32 = VOCABULARY.iter().map(|&(_, w)| w).sum();
    let mut lines: Vec<Vec<u8>> = Vec::with_capacity(utterances);
    for _ in 0..utterances {
        let mut line = Vec::new();
        for _ in 0..words_per_utterance {
            let mut pick = rng.gen_range(0..total);
            for &(word, weight) in VOCABULARY {
                if pick < weight {
                    line.extend_from_slice(word.as_bytes());
                    break;
                }
                pick -= weight;
            }
        }
        lines.push(line);
    }
    Corpus::from_utterances(lines)
}

/// A lexicon holding the vocabulary at frequencies matching the sampling
/// weights, plus the byte terminals.
pub fn vocabulary_lexicon() -> Lexicon {
    let mut lexicon = Lexicon::init_terminals();
    for &(word, weight) in VOCABULARY {
        lexicon
            .insert(
                word.as_bytes(),
                SememeSet::new(),
                weight as f64 * 10.0,
                f64::ln(1e-9),
            )
            .expect("vocabulary words are distinct");
    }
    // Leave a little mass on terminals so every byte string stays parseable.
    let ids: Vec<_> = lexicon.iter().filter(|w| w.is_terminal).map(|w| w.id).collect();
    for id in ids {
        lexicon.word_mut(id).count = 0.05;
    }
    lexicon.total_count = lexicon.iter().map(|w| w.count).sum();
    lexicon.set_probs_from_counts();
    lexicon
}
