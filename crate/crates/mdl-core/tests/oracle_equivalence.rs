//! The chart parser against brute force: on small random instances, forward
//! probabilities, posterior counts, adjacent-pair counts, and best parses
//! must all agree with exhaustive enumeration of every segmentation.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mdl_core::em::{self, Chart, ParseTask};
use mdl_core::lexicon::{Lexicon, SememeSet};
use mdl_core::oracle;

fn random_instance(rng: &mut ChaCha8Rng) -> (Lexicon, Vec<u8>) {
    let mut lexicon = Lexicon::init_terminals();
    // Concentrate probability on a tiny alphabet so multi-word parses
    // actually compete.
    let alphabet = b"abc";
    let n_words = rng.gen_range(0..=8);
    for _ in 0..n_words {
        let len = rng.gen_range(2..=4);
        let surface: Vec<u8> = (0..len)
            .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
            .collect();
        let p = rng.gen_range(0.01..0.4);
        let _ = lexicon.insert(&surface, SememeSet::new(), 0.0, f64::ln(p));
    }
    let len = rng.gen_range(1..=12);
    let u: Vec<u8> = (0..len)
        .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
        .collect();
    (lexicon, u)
}

fn close(a: f64, b: f64, tolerance: f64) -> bool {
    (a - b).abs() <= tolerance * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn chart_quantities_match_exhaustive_enumeration() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20260401);
    for instance in 0..500 {
        let (lexicon, u) = random_instance(&mut rng);
        let task = ParseTask::utterance(&u);

        // Total probability.
        let chart = Chart::compute(&lexicon, &u, None);
        let want_prob = oracle::prob(&lexicon, &u, None);
        let got_prob = chart.ln_prob().exp();
        assert!(
            close(got_prob, want_prob, 1e-9),
            "instance {instance}: probability {got_prob} vs {want_prob}"
        );

        // Posterior expected counts.
        let tasks = vec![task.clone()];
        let (counts, _) = em::analyze(&lexicon, &tasks);
        let want_counts = oracle::counts(&lexicon, &u, None);
        for (id, want) in &want_counts {
            assert!(
                close(counts.get(*id), *want, 1e-9),
                "instance {instance}: count of {id}: {} vs {want}",
                counts.get(*id)
            );
        }
        for (id, got) in counts.iter() {
            if got > 0.0 {
                assert!(
                    want_counts.contains_key(&id),
                    "instance {instance}: spurious count for {id}"
                );
            }
        }

        // Posterior adjacent-pair counts, over every pair the instance has.
        let want_pairs = oracle::pair_counts(&lexicon, &u, None);
        let all_pairs: HashSet<(u32, u32)> = want_pairs.keys().copied().collect();
        let got_pairs = em::pair_counts(&lexicon, &tasks, &all_pairs);
        for (pair, want) in &want_pairs {
            let got = got_pairs.get(pair).copied().unwrap_or(0.0);
            assert!(
                close(got, *want, 1e-9),
                "instance {instance}: pair {pair:?}: {got} vs {want}"
            );
        }

        // Best parse, including the tie-breaking order.
        let got_best = em::viterbi(&lexicon, &u, None);
        let want_best = oracle::viterbi(&lexicon, &u, None);
        match (&got_best, &want_best) {
            (Some((gw, gp)), Some((ww, wp))) => {
                assert_eq!(gw, ww, "instance {instance}: best parse differs");
                // Same parse, same right-associated ln sum: bitwise equal.
                assert_eq!(gp, wp, "instance {instance}: best-parse probability");
            }
            (None, None) => {}
            _ => panic!("instance {instance}: {got_best:?} vs {want_best:?}"),
        }
    }
    assert!(
        start.elapsed().as_secs() < 10,
        "equivalence sweep took {:?}",
        start.elapsed()
    );
}
