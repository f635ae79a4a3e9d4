//! End-to-end acceptance checks, one numbered criterion per test.
//!
//! Each test prints a single `PASS criterion N: …` / `FAIL criterion N: …`
//! line (visible with `--nocapture`) and then asserts, so the suite doubles
//! as a report and as a gate. Criteria 4 and 5 share one desk-scale
//! training run over the bundled corpus; the remaining criteria build their
//! own fixtures.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mdl_core::codec::{self, CodeTable};
use mdl_core::corpus::{
    corpus_from_bytes, strip_segmentation, Corpus, MeaningCorpus, SeparatorSet, TextOptions,
    WeightedMeaning,
};
use mdl_core::em::{self, ParseTask};
use mdl_core::eval::{self, BracketSet};
use mdl_core::lexicon::{Lexicon, Representation, SememeSet, SememeTable, WordId};
use mdl_core::oracle;
use mdl_core::refine::{self, RefineConfig};
use mdl_core::{learn_meanings, predict_meaning, sememe_scores, MeaningConfig};

/// Prints the one-line verdict for a criterion and returns `pass` so the
/// caller can assert on it.
fn verdict(criterion: u32, pass: bool, details: &str) -> bool {
    println!(
        "{} criterion {}: {}",
        if pass { "PASS" } else { "FAIL" },
        criterion,
        details
    );
    pass
}

fn data_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../tests/data")
        .join(name)
}

/// A prefix of the bundled text cut at a line boundary, at least `min_len`
/// bytes long.
fn corpus_prefix(min_len: usize) -> Vec<u8> {
    let bytes = std::fs::read(data_file("kjv.txt")).expect("bundled corpus present");
    assert!(bytes.len() >= min_len, "bundled corpus too small");
    let cut = bytes[min_len..]
        .iter()
        .position(|&b| b == b'\n')
        .map(|p| min_len + p + 1)
        .unwrap_or(bytes.len());
    bytes[..cut].to_vec()
}

fn close(a: f64, b: f64, tolerance: f64) -> bool {
    (a - b).abs() <= tolerance * a.abs().max(b.abs()).max(1e-300)
}

// ---------------------------------------------------------------------------
// Shared desk-scale compression run (criteria 4 and 5).

struct CompressionRun {
    corpus: Corpus,
    lexicon: Lexicon,
    stream: Vec<u8>,
    symbols: usize,
    learn_secs: f64,
}

static COMPRESSION_RUN: OnceLock<CompressionRun> = OnceLock::new();

fn compression_run() -> &'static CompressionRun {
    COMPRESSION_RUN.get_or_init(|| {
        let bytes = corpus_prefix(1_100_000);
        let corpus = corpus_from_bytes(&bytes, &TextOptions::default());
        let symbols: usize = corpus.utterances.iter().map(|u| u.symbols.len()).sum();
        assert_eq!(symbols, bytes.len(), "raw text options must keep every byte");
        let config = RefineConfig {
            iterations: 10,
            ..RefineConfig::default()
        };
        let start = Instant::now();
        let lexicon = refine::learn(&corpus, &config);
        let learn_secs = start.elapsed().as_secs_f64();
        let stream = codec::encode(&lexicon, &corpus).expect("encode learned corpus");
        CompressionRun {
            corpus,
            lexicon,
            stream,
            symbols,
            learn_secs,
        }
    })
}

// ---------------------------------------------------------------------------
// Criterion 1: chart quantities against exhaustive enumeration.

fn random_oracle_instance(rng: &mut ChaCha8Rng) -> (Lexicon, Vec<u8>) {
    let mut lexicon = Lexicon::init_terminals();
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

#[test]
fn criterion_01_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20260401);
    for instance in 0..500 {
        let (lexicon, u) = random_oracle_instance(&mut rng);
        let task = ParseTask::utterance(&u);

        let chart = em::Chart::compute(&lexicon, &u, None);
        let want_prob = oracle::prob(&lexicon, &u, None);
        let got_prob = chart.ln_prob().exp();
        assert!(
            close(got_prob, want_prob, 1e-9),
            "instance {instance}: probability {got_prob} vs {want_prob}"
        );

        let tasks = vec![task.clone()];
        let (counts, _) = em::analyze(&lexicon, &tasks);
        let want_counts = oracle::counts(&lexicon, &u, None);
        for (id, want) in &want_counts {
            assert!(
                close(counts.get(*id), *want, 1e-9),
                "instance {instance}: count of {id}"
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

        let want_pairs = oracle::pair_counts(&lexicon, &u, None);
        let all_pairs: HashSet<(WordId, WordId)> = want_pairs.keys().copied().collect();
        let got_pairs = em::pair_counts(&lexicon, &tasks, &all_pairs);
        for (pair, want) in &want_pairs {
            let got = got_pairs.get(pair).copied().unwrap_or(0.0);
            assert!(
                close(got, *want, 1e-9),
                "instance {instance}: pair {pair:?}: {got} vs {want}"
            );
        }

        let got_best = em::viterbi(&lexicon, &u, None);
        let want_best = oracle::viterbi(&lexicon, &u, None);
        match (&got_best, &want_best) {
            (Some((gw, gp)), Some((ww, wp))) => {
                assert_eq!(gw, ww, "instance {instance}: best parse differs");
                assert_eq!(gp, wp, "instance {instance}: best-parse probability");
            }
            (None, None) => {}
            _ => panic!("instance {instance}: {got_best:?} vs {want_best:?}"),
        }
    }
    let elapsed = start.elapsed();
    let pass = elapsed.as_secs() < 10;
    assert!(verdict(
        1,
        pass,
        &format!(
            "probabilities, counts, pair counts, and best parses match \
             exhaustive enumeration on 500 random instances within 1e-9 \
             relative ({elapsed:.2?}, limit 10s)"
        ),
    ));
}

// ---------------------------------------------------------------------------
// Criterion 2: training never increases the description length.

#[test]
fn criterion_02_em_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(20260402);
    let mut worst_rise = 0.0f64;
    for corpus_index in 0..50 {
        let alphabet = b"abcd";
        let n_utts = rng.gen_range(10..=40);
        let utterances: Vec<Vec<u8>> = (0..n_utts)
            .map(|_| {
                let len = rng.gen_range(3..=30);
                (0..len)
                    .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                    .collect()
            })
            .collect();
        let corpus = Corpus::from_utterances(utterances);

        let mut lexicon = Lexicon::init_terminals();
        for _ in 0..rng.gen_range(2..=10) {
            let len = rng.gen_range(2..=5);
            let surface: Vec<u8> = (0..len)
                .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                .collect();
            let p = rng.gen_range(0.001..0.2);
            let _ = lexicon.insert(&surface, SememeSet::new(), 0.0, f64::ln(p));
        }

        let mut previous: Option<f64> = None;
        for step in 0..10 {
            let tasks = em::combined_evidence(&corpus, &lexicon);
            let (counts, dl) = em::analyze(&lexicon, &tasks);
            let total = dl.total_bits();
            if let Some(prev) = previous {
                let rise = (total - prev) / prev.abs().max(1e-300);
                worst_rise = worst_rise.max(rise);
                assert!(
                    total <= prev + 1e-6 * prev.abs(),
                    "corpus {corpus_index} step {step}: description length rose \
                     from {prev} to {total}"
                );
            }
            previous = Some(total);
            em::maximize(&mut lexicon, &counts);
        }
    }
    assert!(verdict(
        2,
        true,
        &format!(
            "description length non-increasing over 10 E+M steps on 50 random \
             corpora (worst relative rise {worst_rise:.2e}, slack 1e-6)"
        ),
    ));
}

// ---------------------------------------------------------------------------
// Criterion 3: the three worked coding-scheme totals.

fn fixed_prob_lexicon(words: &[(&[u8], f64)]) -> Lexicon {
    let mut lexicon = Lexicon::init_terminals();
    for &(surface, prob) in words {
        if surface.len() == 1 {
            lexicon.word_mut(surface[0] as WordId).ln_prob = prob.ln();
        } else {
            lexicon
                .insert(surface, SememeSet::new(), 0.0, prob.ln())
                .unwrap();
        }
    }
    lexicon
}

fn word_of(lexicon: &Lexicon, surface: &[u8]) -> WordId {
    if surface.len() == 1 {
        lexicon.terminal(surface[0])
    } else {
        lexicon.find(surface, &SememeSet::new()).unwrap()
    }
}

#[test]
fn criterion_03_worked_examples() {
    // (a) The fourteen-character nested description under its fixed
    // 3-/4-bit codes: evidence plus six word representations = 62 bits.
    let p3 = 0.125;
    let p4 = 0.0625;
    let entries: Vec<(&[u8], f64)> = vec![
        (b"the", p3),
        (b"at", p3),
        (b"t", p3),
        (b"h", p4),
        (b"cat", p4),
        (b"hat", p4),
        (b"thecat", p4),
        (b"thehat", p4),
        (b"e", p4),
        (b"a", p4),
        (b"c", p4),
        (b"i", p4),
        (b"n", p4),
    ];
    let lexicon = fixed_prob_lexicon(&entries);
    let corpus = Corpus::from_utterances([b"thecatinthehat".to_vec()]);
    let tasks = em::combined_evidence(&corpus, &lexicon);
    let code_bits: HashMap<WordId, f64> = entries
        .iter()
        .map(|&(surface, p)| (word_of(&lexicon, surface), if p == p3 { 3.0 } else { 4.0 }))
        .collect();
    let nested_total = em::viterbi_description_bits(&lexicon, &tasks, &|id| {
        code_bits.get(&id).copied().unwrap_or(8.0)
    });
    assert_eq!(nested_total.round() as u64, 62, "nested description total");

    // (b) The twelve-character ten-token parse under an optimal code for
    // its own counts: 30 bits.
    let counts = [2u64, 2, 1, 1, 1, 1, 1, 1];
    let table = CodeTable::from_counts(&counts);
    let ten_token_total = table.total_encoded_bits(&counts);
    assert_eq!(ten_token_total, 30, "ten-token parse total");

    // (c) The fifteen-character single-new-word grammar under its fixed
    // codes: evidence plus the added word's spelling = 40 bits.
    let entries: Vec<(&[u8], f64)> = vec![
        (b"o", 0.25),
        (b"n", 0.25),
        (b"the", 0.125),
        (b"m", 0.125),
        (b"t", 0.0625),
        (b"h", 0.0625),
        (b"e", 0.0625),
        (b"a", 0.0625),
    ];
    let lexicon = fixed_prob_lexicon(&entries);
    let corpus = Corpus::from_utterances([b"themanonthemoon".to_vec()]);
    let tasks = em::combined_evidence(&corpus, &lexicon);
    let code_bits: HashMap<WordId, f64> = entries
        .iter()
        .map(|&(surface, p)| (word_of(&lexicon, surface), -p.log2()))
        .collect();
    let grammar_total = em::viterbi_description_bits(&lexicon, &tasks, &|id| {
        code_bits.get(&id).copied().unwrap_or(8.0)
    });
    assert_eq!(grammar_total.round() as u64, 40, "one-word grammar total");

    assert!(verdict(
        3,
        true,
        "worked coding totals reproduce exactly: nested description 62 bits, \
         ten-token parse 30 bits, one-word grammar 40 bits"
    ));
}

// ---------------------------------------------------------------------------
// Criterion 4: bit-exact round trips and the estimator gap.

#[test]
fn criterion_04_codec_round_trip() {
    // Part one: 1000 random corpora, each with a briefly trained lexicon.
    let mut rng = ChaCha8Rng::seed_from_u64(20260404);
    let quick = RefineConfig {
        iterations: 1,
        max_new: 64,
        ..RefineConfig::default()
    };
    for case in 0..1000 {
        let alphabet_len = rng.gen_range(2..=16);
        let alphabet: Vec<u8> = (0..alphabet_len).map(|_| rng.gen::<u8>()).collect();
        let n_utts = rng.gen_range(1..=5);
        let utterances: Vec<Vec<u8>> = (0..n_utts)
            .map(|_| {
                let len = rng.gen_range(20..=300);
                (0..len)
                    .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                    .collect()
            })
            .collect();
        let corpus = Corpus::from_utterances(utterances);
        let lexicon = refine::learn(&corpus, &quick);
        let stream = codec::encode(&lexicon, &corpus).expect("encode random corpus");
        let decoded = codec::decode(&stream).expect("decode random corpus");
        assert_eq!(
            decoded.utterances.len(),
            corpus.utterances.len(),
            "case {case}: utterance count"
        );
        for (a, b) in corpus.utterances.iter().zip(&decoded.utterances) {
            assert_eq!(a.symbols, b.symbols, "case {case}: round trip bytes");
        }
    }

    // Part two: the desk-scale natural-language file.
    let run = compression_run();
    let decoded = codec::decode(&run.stream).expect("decode large stream");
    assert_eq!(decoded.utterances.len(), run.corpus.utterances.len());
    for (a, b) in run.corpus.utterances.iter().zip(&decoded.utterances) {
        assert_eq!(a.symbols, b.symbols, "large-file round trip bytes");
    }

    // The stream must sit within coding overhead of the model's estimate.
    // The count-based estimate Σ −ĉ(w)·log₂ p(w) is the description-length
    // formula training optimizes; the measured stream differs from it only
    // by integer codeword lengths and headers. The summed-over-all-parses
    // total is also reported: it is a lower bound a single-parse coder
    // cannot reach, checked at a looser sanity tolerance.
    let tasks = em::combined_evidence(&run.corpus, &run.lexicon);
    let dl = em::description_length(&run.lexicon, &tasks);
    let stream_bits = run.stream.len() as f64 * 8.0;
    let estimate_gap = (stream_bits - dl.approx_total_bits) / dl.approx_total_bits;
    let exact_gap = (stream_bits - dl.total_bits()) / dl.total_bits();
    let pass = estimate_gap.abs() <= 0.02 && exact_gap.abs() <= 0.03;
    assert!(verdict(
        4,
        pass,
        &format!(
            "1000 random corpora and a {:.2} MB file round-trip byte-exact; \
             stream {:.0} bits vs count-based estimate {:.0} bits: gap {:.2}% \
             (tolerance 2%); vs all-parses total {:.0} bits: gap {:.2}% \
             (sanity 3%)",
            run.symbols as f64 / 1e6,
            stream_bits,
            dl.approx_total_bits,
            estimate_gap * 100.0,
            dl.total_bits(),
            exact_gap * 100.0,
        ),
    ));
}

// ---------------------------------------------------------------------------
// Criterion 5: desk-scale compression quality.

#[test]
fn criterion_05_compression_rate() {
    let run = compression_run();
    let stream_bits = run.stream.len() as f64 * 8.0;
    let bits_per_char = stream_bits / run.symbols as f64;
    let baseline_bits = codec::order0_baseline_bits(&run.corpus) as f64;
    let baseline_rate = baseline_bits / run.symbols as f64;
    let pass = bits_per_char <= 3.0
        && stream_bits < baseline_bits
        && run.learn_secs <= 30.0 * 60.0;
    assert!(verdict(
        5,
        pass,
        &format!(
            "{:.2} MB English prose compressed to {bits_per_char:.3} bits/char \
             (limit 3.0), beating the order-0 baseline {baseline_rate:.3} \
             bits/char; training took {:.0}s (limit 30min)",
            run.symbols as f64 / 1e6,
            run.learn_secs,
        ),
    ));
}

// ---------------------------------------------------------------------------
// Criterion 6: desk-scale segmentation quality.

#[test]
fn criterion_06_segmentation_quality() {
    let bytes = std::fs::read(data_file("kjv.txt")).expect("bundled corpus present");
    let options = TextOptions {
        lowercase: true,
        sentence_split: true,
        ..TextOptions::default()
    };
    let with_separators = corpus_from_bytes(&bytes, &options);
    let stripped = strip_segmentation(&with_separators, &SeparatorSet::non_alphanumeric());
    let chars: usize = stripped
        .corpus
        .utterances
        .iter()
        .map(|u| u.symbols.len())
        .sum();
    assert!(
        chars >= 1_000_000,
        "need at least one million stripped characters, got {chars}"
    );

    let lexicon = refine::learn(&stripped.corpus, &RefineConfig::default());
    let gold: Vec<BracketSet> = stripped
        .gold
        .spans
        .iter()
        .map(|spans| BracketSet::from_spans(spans.iter().copied()))
        .collect();
    let report = eval::score_segmentation(&lexicon, &stripped.corpus, &gold);
    let recall = report.recall.expect("gold spans present");
    let crossing = report.crossing.expect("predictions present");
    let pass = recall >= 0.85 && crossing <= 0.03;
    assert!(verdict(
        6,
        pass,
        &format!(
            "on {:.2} M stripped characters: word recall {:.2}% (floor 85%), \
             crossing brackets {:.2}% (ceiling 3%), over {} utterances",
            chars as f64 / 1e6,
            recall * 100.0,
            crossing * 100.0,
            report.utterances,
        ),
    ));
}

// ---------------------------------------------------------------------------
// Criterion 7: the worked-sentence metric values.

/// The frozen word inventory for the worked sentence: every non-terminal
/// with its internal representation. Uniform word probabilities; the
/// hierarchy below each word is stored, so the metrics are evaluated on a
/// fixed, reproducible analysis.
const WORKED_INVENTORY: &[(&str, &[&str])] = &[
    ("or", &["o", "r"]),
    ("for", &["f", "or"]),
    ("he", &["h", "e"]),
    ("the", &["t", "he"]),
    ("ur", &["u", "r"]),
    ("pur", &["p", "ur"]),
    ("po", &["p", "o"]),
    ("pos", &["po", "s"]),
    ("pose", &["pos", "e"]),
    ("of", &["o", "f"]),
    ("purpose", &["pur", "pose"]),
    ("purposeof", &["purpose", "of"]),
    ("thepurposeof", &["the", "purposeof"]),
    ("forthepurposeof", &["for", "thepurposeof"]),
    ("in", &["i", "n"]),
    ("ma", &["m", "a"]),
    ("main", &["ma", "in"]),
    ("ta", &["t", "a"]),
    ("tain", &["ta", "in"]),
    ("maintain", &["main", "tain"]),
    ("ing", &["in", "g"]),
    ("maintaining", &["maintain", "ing"]),
    ("er", &["e", "r"]),
    ("ter", &["t", "er"]),
    ("inter", &["in", "ter"]),
    ("on", &["o", "n"]),
    ("ion", &["i", "on"]),
    ("tion", &["t", "ion"]),
    ("ation", &["a", "tion"]),
    ("nation", &["n", "ation"]),
    ("al", &["a", "l"]),
    ("national", &["nation", "al"]),
    ("international", &["inter", "national"]),
    ("pe", &["p", "e"]),
    ("ce", &["c", "e"]),
    ("ace", &["a", "ce"]),
    ("peace", &["pe", "ace"]),
    ("an", &["a", "n"]),
    ("and", &["an", "d"]),
    ("ro", &["r", "o"]),
    ("pro", &["p", "ro"]),
    ("mo", &["m", "o"]),
    ("mot", &["mo", "t"]),
    ("promoting", &["pro", "mot", "ing"]),
    ("adv", &["a", "d", "v"]),
    ("nce", &["n", "ce"]),
    ("ance", &["a", "nce"]),
    ("advance", &["adv", "ance"]),
    ("me", &["m", "e"]),
    ("men", &["me", "n"]),
    ("ment", &["men", "t"]),
    ("advancement", &["advance", "ment"]),
    ("ll", &["l", "l"]),
    ("all", &["a", "ll"]),
    ("ofall", &["of", "all"]),
    ("op", &["o", "p"]),
    ("le", &["l", "e"]),
    ("people", &["pe", "op", "le"]),
    ("un", &["u", "n"]),
    ("it", &["i", "t"]),
    ("unit", &["un", "it"]),
    ("ed", &["e", "d"]),
    ("united", &["unit", "ed"]),
    ("at", &["a", "t"]),
    ("st", &["s", "t"]),
    ("stat", &["st", "at"]),
    ("state", &["stat", "e"]),
    ("states", &["state", "s"]),
    ("unitedstates", &["united", "states"]),
    ("theunitedstates", &["the", "unitedstates"]),
    ("ic", &["i", "c"]),
    ("ric", &["r", "ic"]),
    ("america", &["a", "me", "ric", "a"]),
    ("ofamerica", &["of", "america"]),
    ("theunitedstatesofamerica", &["theunitedstates", "ofamerica"]),
    ("jo", &["j", "o"]),
    ("join", &["jo", "in"]),
    ("joined", &["join", "ed"]),
    ("ound", &["o", "un", "d"]),
    ("found", &["f", "ound"]),
    ("nations", &["nation", "s"]),
    ("unitednations", &["united", "nations"]),
    ("theunitednations", &["the", "unitednations"]),
];

/// The segmentation the model assigns at the top level.
const WORKED_PARSE: &[&str] = &[
    "forthepurposeof",
    "maintaining",
    "international",
    "peace",
    "and",
    "promoting",
    "the",
    "advancement",
    "ofall",
    "people",
    "theunitedstatesofamerica",
    "joined",
    "in",
    "found",
    "ing",
    "theunitednations",
];

/// The true word segmentation of the same sentence.
const WORKED_GOLD: &[&str] = &[
    "for",
    "the",
    "purpose",
    "of",
    "maintaining",
    "international",
    "peace",
    "and",
    "promoting",
    "the",
    "advancement",
    "of",
    "all",
    "people",
    "the",
    "united",
    "states",
    "of",
    "america",
    "joined",
    "in",
    "founding",
    "the",
    "united",
    "nations",
];

fn worked_lexicon() -> Lexicon {
    let mut lexicon = Lexicon::init_terminals();
    let uniform = -(10.0 * std::f64::consts::LN_2);
    for byte in 0..=255u8 {
        lexicon.word_mut(byte as WordId).ln_prob = uniform;
    }
    let mut ids: HashMap<&str, WordId> = HashMap::new();
    for &(surface, parts) in WORKED_INVENTORY {
        let id = lexicon
            .insert(surface.as_bytes(), SememeSet::new(), 1.0, uniform)
            .expect("fresh inventory word");
        let part_ids: Vec<WordId> = parts
            .iter()
            .map(|p| {
                if p.len() == 1 {
                    lexicon.terminal(p.as_bytes()[0])
                } else {
                    *ids.get(p).unwrap_or_else(|| panic!("{p} defined before {surface}"))
                }
            })
            .collect();
        assert_eq!(
            part_ids
                .iter()
                .map(|&w| String::from_utf8_lossy(&lexicon.word(w).surface).into_owned())
                .collect::<String>(),
            surface,
            "representation must spell the word"
        );
        lexicon.word_mut(id).rep = Some(Representation::from_words(part_ids));
        ids.insert(surface, id);
    }
    lexicon
}

#[test]
fn criterion_07_worked_sentence_metrics() {
    let sentence: String = WORKED_GOLD.concat();
    assert_eq!(sentence, WORKED_PARSE.concat(), "parses cover the sentence");
    let lexicon = worked_lexicon();

    // The most probable segmentation is the expected sixteen-word parse.
    let (words, _) = em::viterbi(&lexicon, sentence.as_bytes(), None).expect("parseable");
    let surfaces: Vec<String> = words
        .iter()
        .map(|&w| String::from_utf8_lossy(&lexicon.word(w).surface).into_owned())
        .collect();
    assert_eq!(surfaces, WORKED_PARSE, "top-level segmentation");

    // Score the hierarchical analysis against the true word boundaries.
    let corpus = Corpus::from_utterances([sentence.clone().into_bytes()]);
    let mut gold_spans = Vec::new();
    let mut pos = 0usize;
    for word in WORKED_GOLD {
        gold_spans.push((pos, pos + word.len()));
        pos += word.len();
    }
    let gold = vec![BracketSet::from_spans(gold_spans.iter().copied())];
    let report = eval::score_segmentation(&lexicon, &corpus, &gold);
    let recall = report.recall.expect("gold present");
    let crossing = report.crossing.expect("predictions present");
    assert_eq!(recall, 24.0 / 25.0, "recall is exactly 24 of 25 words");
    assert_eq!(crossing, 0.0, "no predicted span crosses a true word");

    // The hierarchical decomposition of "found" yields exactly the eight
    // printed brackets.
    let found = eval::bracketing(&lexicon, b"found");
    let expected = BracketSet::from_spans([
        (0, 1),
        (1, 2),
        (2, 3),
        (3, 4),
        (4, 5),
        (2, 4),
        (1, 5),
        (0, 5),
    ]);
    let got: BTreeSet<(usize, usize)> = found.iter().collect();
    let want: BTreeSet<(usize, usize)> = expected.iter().collect();
    assert_eq!(got, want, "bracket set of the word 'found'");

    assert!(verdict(
        7,
        true,
        "worked sentence scores recall 96% (24/25) and crossing 0% exactly; \
         'found' decomposes into exactly the eight expected brackets"
    ));
}

// ---------------------------------------------------------------------------
// Criterion 8: with empty meanings the joint learner reduces to the plain
// learner bit for bit.

#[test]
fn criterion_08_meaning_reduction() {
    let mut text: Vec<&str> = Vec::new();
    for _ in 0..15 {
        text.push("thedograntothehouse");
        text.push("thecatranfast");
        text.push("adogsatdown");
        text.push("thecatsawthedog");
    }
    let corpus = Corpus::from_utterances(text.iter().map(|u| u.as_bytes().to_vec()));
    let meanings: Vec<Vec<WeightedMeaning>> = (0..text.len())
        .map(|_| {
            vec![WeightedMeaning {
                sememes: SememeSet::new(),
                weight: 1.0,
            }]
        })
        .collect();
    let mcorpus = MeaningCorpus {
        corpus: corpus.clone(),
        meanings,
        sememes: SememeTable::new(),
    };

    let refine_config = RefineConfig {
        iterations: 6,
        ..RefineConfig::default()
    };
    let plain = refine::learn(&corpus, &refine_config);
    let config = MeaningConfig {
        sememe_bits: 10.0,
        seed_iterations: 3,
        meaning_iterations: 3,
        refine: refine_config,
    };
    let joint = learn_meanings(&mcorpus, &config);

    // Lexicons are identical word for word, bit for bit.
    assert_eq!(plain.len(), joint.len(), "vocabulary sizes differ");
    for word in plain.iter() {
        let other = joint.try_word(word.id).expect("same identifiers");
        assert_eq!(word.surface, other.surface, "surface of {}", word.id);
        assert!(other.sememes.is_empty(), "no sememes may appear");
        assert_eq!(
            word.ln_prob.to_bits(),
            other.ln_prob.to_bits(),
            "probability of {:?}",
            String::from_utf8_lossy(&word.surface)
        );
        assert_eq!(
            word.count.to_bits(),
            other.count.to_bits(),
            "count of {:?}",
            String::from_utf8_lossy(&word.surface)
        );
    }

    // Description lengths are bit-identical.
    let tasks_plain = em::combined_evidence(&corpus, &plain);
    let tasks_joint = em::combined_evidence(&corpus, &joint);
    let dl_plain = em::description_length(&plain, &tasks_plain);
    let dl_joint = em::description_length(&joint, &tasks_joint);
    assert_eq!(
        dl_plain.total_bits().to_bits(),
        dl_joint.total_bits().to_bits(),
        "description lengths differ"
    );

    // Every utterance receives the identical best parse.
    for utterance in &corpus.utterances {
        let a = em::viterbi(&plain, &utterance.symbols, None).map(|(w, _)| w);
        let b = em::viterbi(&joint, &utterance.symbols, None).map(|(w, _)| w);
        assert_eq!(a, b, "best parses differ");
    }

    // And the two lexicons produce byte-identical encodings.
    let sample = Corpus::from_utterances([b"thedogsawthecatinthehouse".to_vec()]);
    let enc_plain = codec::encode(&plain, &sample).expect("encode");
    let enc_joint = codec::encode(&joint, &sample).expect("encode");
    assert_eq!(enc_plain, enc_joint, "encoded streams differ");

    assert!(verdict(
        8,
        true,
        &format!(
            "with all-empty meanings the joint learner's lexicon ({} words), \
             description length ({:.3} bits), best parses, and encoded \
             streams are bit-identical to the plain learner's",
            plain.len(),
            dl_plain.total_bits(),
        ),
    ));
}

// ---------------------------------------------------------------------------
// Criterion 9: meaning learning on a synthetic grounded corpus.

mod world {
    //! A synthetic grounded world: a vocabulary mapping words to sememe
    //! sets, with morphological families sharing sememes, meaningless
    //! function words, sound-alike-free synonyms, compositional compounds,
    //! and non-compositional compounds. Utterances are word sequences
    //! drawn from templates; their meanings are the union of their words'
    //! sememe sets, spoken as one unsegmented letter string.

    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    /// Words with empty meanings.
    pub const FUNCTION: &[&str] = &["a", "an", "the", "of", "to", "this", "that", "and", "at"];

    /// Fixed single words: (surface, sememes).
    pub const SINGLES: &[(&str, &[&str])] = &[
        ("i", &["i"]),
        ("you", &["you"]),
        ("we", &["we"]),
        ("it", &["it"]),
        ("is", &["be"]),
        ("are", &["be"]),
        ("was", &["be"]),
        ("do", &["do"]),
        ("does", &["do"]),
        ("can", &["can"]),
        ("will", &["will"]),
        ("not", &["not"]),
        ("what", &["what"]),
        ("where", &["where"]),
        ("how", &["how"]),
        ("many", &["many"]),
        ("some", &["some"]),
        ("now", &["now"]),
        ("here", &["here"]),
        ("in", &["in"]),
        ("yes", &["yes"]),
        ("ok", &["yes"]),
        ("no", &["no"]),
        ("yesterday", &["previous", "day"]),
    ];

    /// Adjectives: (surface, sememe).
    pub const ADJECTIVES: &[(&str, &str)] = &[
        ("red", "red"),
        ("black", "black"),
        ("white", "white"),
        ("sweet", "sweet"),
        ("big", "big"),
        ("little", "little"),
        ("good", "good"),
        ("funny", "funny"),
    ];

    /// Nouns: (singular, plural, sememes). Most carry one sememe; the
    /// compounds at the end are compositional (meaning = union of parts)
    /// or non-compositional (meaning adds or replaces sememes).
    pub const NOUNS: &[(&str, &str, &[&str])] = &[
        ("book", "books", &["book"]),
        ("cat", "cats", &["cat"]),
        ("dog", "dogs", &["dog"]),
        ("bird", "birds", &["bird"]),
        ("ball", "balls", &["ball"]),
        ("box", "boxes", &["box"]),
        ("toy", "toys", &["toy"]),
        ("rabbit", "rabbits", &["rabbit"]),
        ("baby", "babies", &["baby"]),
        ("house", "houses", &["house"]),
        ("bag", "bags", &["bag"]),
        ("door", "doors", &["door"]),
        ("gown", "gowns", &["gown"]),
        ("board", "boards", &["board"]),
        ("berry", "berries", &["berry"]),
        ("day", "days", &["day"]),
        ("night", "nights", &["night"]),
        ("decoration", "decorations", &["decor"]),
        ("nightgown", "nightgowns", &["night", "gown"]),
        ("blackboard", "blackboards", &["black", "board", "blackboard"]),
        ("cranberry", "cranberries", &["red", "berry"]),
        ("strawberry", "strawberries", &["sweet", "berry"]),
    ];

    /// Mass nouns: (surface, sememe).
    pub const MASS: &[(&str, &str)] = &[("juice", "juice"), ("milk", "milk"), ("water", "water")];

    /// Verbs: (base, third person, progressive, past, sememes). The un-
    /// forms are compositional; the family shares one sememe set across
    /// all four forms.
    pub const VERBS: &[(&str, &str, &str, &str, &[&str])] = &[
        ("walk", "walks", "walking", "walked", &["walk"]),
        ("play", "plays", "playing", "played", &["play"]),
        ("jump", "jumps", "jumping", "jumped", &["jump"]),
        ("look", "looks", "looking", "looked", &["look"]),
        ("open", "opens", "opening", "opened", &["open"]),
        ("help", "helps", "helping", "helped", &["help"]),
        ("want", "wants", "wanting", "wanted", &["want"]),
        ("like", "likes", "liking", "liked", &["like"]),
        ("zip", "zips", "zipping", "zipped", &["zip"]),
        ("wrap", "wraps", "wrapping", "wrapped", &["wrap"]),
        ("unzip", "unzips", "unzipping", "unzipped", &["undo", "zip"]),
        ("unwrap", "unwraps", "unwrapping", "unwrapped", &["undo", "wrap"]),
        ("decorate", "decorates", "decorating", "decorated", &["decor"]),
        ("eat", "eats", "eating", "ate", &["eat"]),
        ("drink", "drinks", "drinking", "drank", &["drink"]),
        ("sleep", "sleeps", "sleeping", "slept", &["sleep"]),
        ("see", "sees", "seeing", "saw", &["see"]),
        ("go", "goes", "going", "went", &["go"]),
        ("wear", "wears", "wearing", "wore", &["wear"]),
        ("bring", "brings", "bringing", "brought", &["bring"]),
    ];

    /// The word → sememes dictionary over the whole vocabulary.
    pub fn dictionary() -> std::collections::HashMap<&'static str, Vec<&'static str>> {
        let mut dict = std::collections::HashMap::new();
        for &w in FUNCTION {
            dict.insert(w, Vec::new());
        }
        for &(w, sems) in SINGLES {
            dict.insert(w, sems.to_vec());
        }
        for &(w, s) in ADJECTIVES {
            dict.insert(w, vec![s]);
        }
        for &(sg, pl, sems) in NOUNS {
            dict.insert(sg, sems.to_vec());
            dict.insert(pl, sems.to_vec());
        }
        for &(w, s) in MASS {
            dict.insert(w, vec![s]);
        }
        for &(base, third, prog, past, sems) in VERBS {
            dict.insert(base, sems.to_vec());
            dict.insert(third, sems.to_vec());
            dict.insert(prog, sems.to_vec());
            dict.insert(past, sems.to_vec());
        }
        dict
    }

    fn noun(rng: &mut ChaCha8Rng) -> &'static str {
        NOUNS[rng.gen_range(0..NOUNS.len())].0
    }

    fn noun_pl(rng: &mut ChaCha8Rng) -> &'static str {
        NOUNS[rng.gen_range(0..NOUNS.len())].1
    }

    fn adjective(rng: &mut ChaCha8Rng) -> &'static str {
        ADJECTIVES[rng.gen_range(0..ADJECTIVES.len())].0
    }

    fn mass(rng: &mut ChaCha8Rng) -> &'static str {
        MASS[rng.gen_range(0..MASS.len())].0
    }

    fn verb(rng: &mut ChaCha8Rng) -> (&'static str, &'static str, &'static str, &'static str) {
        let v = VERBS[rng.gen_range(0..VERBS.len())];
        (v.0, v.1, v.2, v.3)
    }

    /// One template-drawn utterance as a word sequence.
    pub fn utterance(rng: &mut ChaCha8Rng) -> Vec<&'static str> {
        match rng.gen_range(0..20) {
            0 => vec!["this", "is", "a", noun(rng)],
            1 => vec!["that", "is", "a", adjective(rng), noun(rng)],
            2 => {
                let v = verb(rng);
                vec!["the", noun(rng), "is", v.2]
            }
            3 => {
                let v = verb(rng);
                vec!["the", noun(rng), v.3, "yesterday"]
            }
            4 => {
                let v = verb(rng);
                vec!["can", "you", v.0, "the", noun(rng)]
            }
            5 => vec!["do", "you", "see", "the", noun(rng)],
            6 => vec!["i", "see", "a", noun(rng)],
            7 => {
                let v = verb(rng);
                vec!["we", "are", v.2, "now"]
            }
            8 => vec!["what", "do", "you", "want"],
            9 => vec!["where", "is", "the", noun(rng)],
            10 => vec!["how", "many", noun_pl(rng)],
            11 => vec!["i", "want", "some", mass(rng)],
            12 => {
                let agree = if rng.gen_bool(0.5) { "yes" } else { "ok" };
                vec![agree, "i", "like", "it"]
            }
            13 => {
                let v = verb(rng);
                vec!["you", "can", v.0, "it"]
            }
            14 => vec!["the", noun(rng), "is", "in", "the", noun(rng)],
            15 => vec!["look", "at", "the", adjective(rng), noun(rng)],
            16 => {
                let v = verb(rng);
                vec!["i", "will", v.0, "the", noun(rng)]
            }
            17 => {
                let v = verb(rng);
                vec!["we", v.3, "the", noun(rng)]
            }
            18 => vec!["here", "is", "the", noun(rng)],
            19 => {
                let v = verb(rng);
                vec!["the", "baby", "is", v.2, "a", noun(rng)]
            }
            _ => unreachable!(),
        }
    }
}

/// Builds the grounded corpus: utterance sounds, gold meanings, and the
/// interning table. `ambiguous` pairs every utterance with three equally
/// weighted hypotheses: its own meaning and the meanings of the two
/// surrounding utterances.
fn grounded_corpus(n: usize, ambiguous: bool) -> (MeaningCorpus, Vec<SememeSet>) {
    let dict = world::dictionary();
    let mut rng = ChaCha8Rng::seed_from_u64(20260409);
    let mut sememes = SememeTable::new();
    let mut sounds: Vec<Vec<u8>> = Vec::with_capacity(n);
    let mut gold: Vec<SememeSet> = Vec::with_capacity(n);
    for _ in 0..n {
        let words = world::utterance(&mut rng);
        let sound: String = words.concat();
        let mut meaning = SememeSet::new();
        for word in &words {
            for sememe in &dict[word] {
                meaning.insert(sememes.intern(sememe));
            }
        }
        sounds.push(sound.into_bytes());
        gold.push(meaning);
    }

    let meanings: Vec<Vec<WeightedMeaning>> = (0..n)
        .map(|u| {
            if ambiguous {
                let before = gold[(u + n - 1) % n].clone();
                let after = gold[(u + 1) % n].clone();
                vec![
                    WeightedMeaning {
                        sememes: gold[u].clone(),
                        weight: 1.0,
                    },
                    WeightedMeaning {
                        sememes: before,
                        weight: 1.0,
                    },
                    WeightedMeaning {
                        sememes: after,
                        weight: 1.0,
                    },
                ]
            } else {
                vec![WeightedMeaning {
                    sememes: gold[u].clone(),
                    weight: 1.0,
                }]
            }
        })
        .collect();

    let mcorpus = MeaningCorpus {
        corpus: Corpus::from_utterances(sounds),
        meanings,
        sememes,
    };
    (mcorpus, gold)
}

fn grounding_scores(mcorpus: &MeaningCorpus, gold: &[SememeSet]) -> (f64, f64) {
    let config = MeaningConfig {
        refine: RefineConfig {
            max_new: 4000,
            ..RefineConfig::default()
        },
        ..MeaningConfig::default()
    };
    let lexicon = learn_meanings(mcorpus, &config);
    let predicted: Vec<SememeSet> = mcorpus
        .corpus
        .utterances
        .iter()
        .map(|u| predict_meaning(&lexicon, &u.symbols))
        .collect();
    let (accuracy, recall) = sememe_scores(gold, &predicted);
    (
        accuracy.expect("some sememes predicted"),
        recall.expect("gold meanings non-empty"),
    )
}

#[test]
fn criterion_09_meaning_learning() {
    let n = 5200;

    let (single, gold) = grounded_corpus(n, false);
    let (single_accuracy, single_recall) = grounding_scores(&single, &gold);

    let (ambiguous, gold) = grounded_corpus(n, true);
    let (ambiguous_accuracy, ambiguous_recall) = grounding_scores(&ambiguous, &gold);

    let pass = single_accuracy >= 0.90 && single_recall >= 0.80 && ambiguous_accuracy >= 0.85;
    assert!(verdict(
        9,
        pass,
        &format!(
            "on {n} synthetic grounded utterances: single-meaning training \
             reaches sememe accuracy {:.1}% (floor 90%) and recall {:.1}% \
             (floor 80%); three-way ambiguous training reaches accuracy \
             {:.1}% (floor 85%, recall {:.1}%)",
            single_accuracy * 100.0,
            single_recall * 100.0,
            ambiguous_accuracy * 100.0,
            ambiguous_recall * 100.0,
        ),
    ));
}

// ---------------------------------------------------------------------------
// Criterion 10: byte-identical outputs across identical runs.

#[test]
fn criterion_10_determinism() {
    let dir = tempfile::tempdir().expect("temp dir");
    let input = dir.path().join("input.txt");
    std::fs::write(&input, corpus_prefix(200_000)).expect("write input");

    let bin = env!("CARGO_BIN_EXE_mdl");
    let run = |tag: &str| -> (Vec<u8>, Vec<u8>) {
        let lex = dir.path().join(format!("{tag}.lex"));
        let stream = dir.path().join(format!("{tag}.mdlz"));
        let status = std::process::Command::new(bin)
            .args(["learn", "--input"])
            .arg(&input)
            .arg("--out")
            .arg(&lex)
            .args(["--iters", "6", "--workers", "1"])
            .env_remove("MDL_WORKERS")
            .status()
            .expect("run learn");
        assert!(status.success(), "learn failed");
        let status = std::process::Command::new(bin)
            .args(["compress", "--lexicon"])
            .arg(&lex)
            .arg("--input")
            .arg(&input)
            .arg("--output")
            .arg(&stream)
            .args(["--workers", "1"])
            .env_remove("MDL_WORKERS")
            .status()
            .expect("run compress");
        assert!(status.success(), "compress failed");
        (
            std::fs::read(&lex).expect("read lexicon"),
            std::fs::read(&stream).expect("read stream"),
        )
    };

    let (lex_a, stream_a) = run("a");
    let (lex_b, stream_b) = run("b");
    let pass = lex_a == lex_b && stream_a == stream_b;
    assert!(verdict(
        10,
        pass,
        &format!(
            "two identical runs over a 200 KB input produce byte-identical \
             lexicon dumps ({} bytes) and compressed streams ({} bytes)",
            lex_a.len(),
            stream_a.len(),
        ),
    ));
}
