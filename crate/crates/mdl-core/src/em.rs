//! Chart algorithms over the combined evidence: forward/backward
//! probabilities, expected counts, Viterbi parses, expected pair counts, and
//! description-length accounting.
//!
//! The *combined evidence* is the corpus plus the surface of every
//! non-terminal word: each word must itself be written down as a
//! concatenation of strictly smaller words, so its surface is just another
//! utterance — one whose parses are restricted by the consistency ordering.
//!
//! All chart arithmetic is done in natural-log space (bits at the
//! interface). The E-step is data-parallel over fixed-size task blocks whose
//! partial results are merged in block order, so results are independent of
//! the worker count.

use std::borrow::Cow;
use std::collections::HashMap;
use std::collections::HashSet;

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::lexicon::{Bound, Lexicon, OrderingMode, Representation, Word, WordId};

/// Natural log → bits.
pub const LN_2: f64 = std::f64::consts::LN_2;

/// Tasks per parallel block. Fixed so that floating-point merge order — and
/// therefore every learned probability — does not depend on thread count.
pub(crate) const BLOCK_TASKS: usize = 64;

/// One unit of evidence to be parsed: a corpus utterance, or the surface of
/// a non-terminal word (restricted to strictly smaller words).
#[derive(Clone, Debug)]
pub struct ParseTask<'a> {
    pub symbols: Cow<'a, [u8]>,
    /// Consistency bound for word tasks; `None` for corpus utterances.
    pub bound: Option<Bound>,
    /// The word this task spells out, if any.
    pub word: Option<WordId>,
}

impl<'a> ParseTask<'a> {
    pub fn utterance(symbols: &'a [u8]) -> Self {
        ParseTask {
            symbols: Cow::Borrowed(symbols),
            bound: None,
            word: None,
        }
    }

    pub fn for_word(word: &Word) -> ParseTask<'static> {
        ParseTask {
            symbols: Cow::Owned(word.surface.to_vec()),
            bound: Some(Bound::of(word)),
            word: Some(word.id),
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Every corpus utterance followed by every non-terminal word's surface, in
/// id order. Deterministic.
pub fn combined_evidence<'a>(corpus: &'a Corpus, lexicon: &Lexicon) -> Vec<ParseTask<'a>> {
    let mut tasks: Vec<ParseTask<'a>> = corpus
        .utterances
        .iter()
        .map(|u| ParseTask::utterance(&u.symbols))
        .collect();
    for word in lexicon.iter() {
        if !word.is_terminal {
            tasks.push(ParseTask::for_word(word));
        }
    }
    tasks
}

/// Streaming log-sum-exp accumulator: ln Σ exp(xᵢ) without materializing the
/// terms.
#[derive(Clone, Copy, Debug)]
pub struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    pub fn new() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

impl Default for LogSum {
    fn default() -> Self {
        LogSum::new()
    }
}

/// Is the word (known surface length, id) usable under the bound?
#[inline]
pub(crate) fn admitted(lexicon: &Lexicon, id: WordId, len: usize, bound: Option<Bound>) -> bool {
    match bound {
        None => true,
        Some(b) => match lexicon.ordering {
            OrderingMode::Plain => len < b.surface_len,
            OrderingMode::Meaning => {
                (len, lexicon.word(id).sememes.len()) < (b.surface_len, b.sememe_count)
            }
        },
    }
}

/// Forward and backward probabilities of one task, in natural log.
#[derive(Clone, Debug)]
pub struct Chart {
    /// ln α₀ … ln α_l; α₀ = 1, α_i = Σ_j α_j · Σ_{w = u[j..i], w admitted} p(w).
    pub ln_alpha: Vec<f64>,
    /// ln β₀ … ln β_l; β_l = 1, β_i mirrors α from the right.
    pub ln_beta: Vec<f64>,
}

impl Chart {
    pub fn compute(lexicon: &Lexicon, u: &[u8], bound: Option<Bound>) -> Chart {
        Chart {
            ln_alpha: forward(lexicon, u, bound),
            ln_beta: backward(lexicon, u, bound),
        }
    }

    /// ln p_G(u): the total probability of all segmentations.
    pub fn ln_prob(&self) -> f64 {
        *self.ln_alpha.last().expect("chart is never empty")
    }

    /// −log₂ p_G(u).
    pub fn bits(&self) -> f64 {
        -self.ln_prob() / LN_2
    }
}

/// Forward probabilities in natural log. `ln_alpha[0] = ln 1 = 0`.
pub fn forward(lexicon: &Lexicon, u: &[u8], bound: Option<Bound>) -> Vec<f64> {
    let l = u.len();
    let mut ln_alpha = vec![f64::NEG_INFINITY; l + 1];
    ln_alpha[0] = 0.0;
    for i in 1..=l {
        let mut acc = LogSum::new();
        lexicon.suffix_matches(u, i, |id, len| {
            let j = i - len;
            if ln_alpha[j] != f64::NEG_INFINITY && admitted(lexicon, id, len, bound) {
                acc.add(ln_alpha[j] + lexicon.ln_prob(id));
            }
        });
        ln_alpha[i] = acc.value();
    }
    ln_alpha
}

/// Backward probabilities in natural log. `ln_beta[l] = ln 1 = 0`.
pub fn backward(lexicon: &Lexicon, u: &[u8], bound: Option<Bound>) -> Vec<f64> {
    let l = u.len();
    let mut ln_beta = vec![f64::NEG_INFINITY; l + 1];
    ln_beta[l] = 0.0;
    for i in (0..l).rev() {
        let mut acc = LogSum::new();
        lexicon.prefix_matches(u, i, |id, len| {
            let k = i + len;
            if ln_beta[k] != f64::NEG_INFINITY && admitted(lexicon, id, len, bound) {
                acc.add(lexicon.ln_prob(id) + ln_beta[k]);
            }
        });
        ln_beta[i] = acc.value();
    }
    ln_beta
}

/// Expected word-usage counts, plus their grand total.
#[derive(Clone, Debug)]
pub struct CountTable {
    counts: Vec<f64>,
    pub total: f64,
}

impl CountTable {
    pub fn new(id_limit: WordId) -> Self {
        CountTable {
            counts: vec![0.0; id_limit as usize],
            total: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, id: WordId, amount: f64) {
        self.counts[id as usize] += amount;
        self.total += amount;
    }

    #[inline]
    pub fn get(&self, id: WordId) -> f64 {
        self.counts.get(id as usize).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, id: WordId, value: f64) {
        let slot = &mut self.counts[id as usize];
        self.total += value - *slot;
        *slot = value;
    }

    pub fn merge(&mut self, other: &CountTable) {
        debug_assert_eq!(self.counts.len(), other.counts.len());
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
    }

    pub fn iter(&self) -> impl Iterator<Item = (WordId, f64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(id, &c)| (id as WordId, c))
    }
}

/// Two-part description length, in bits.
#[derive(Clone, Copy, Debug, Default)]
pub struct DlReport {
    /// Cost of writing the lexicon down: Σ over word tasks of −log₂ p_G(surface).
    pub lexicon_bits: f64,
    /// Cost of the corpus under the lexicon: Σ over utterances of −log₂ p_G(u).
    pub evidence_bits: f64,
    /// Count-based approximation of the total: Σ_w −c(w) · log₂ p(w).
    pub approx_total_bits: f64,
    /// Total terminal symbols across corpus utterances (for bits/char).
    pub evidence_symbols: usize,
}

impl DlReport {
    pub fn total_bits(&self) -> f64 {
        self.lexicon_bits + self.evidence_bits
    }

    pub fn bits_per_symbol(&self) -> f64 {
        if self.evidence_symbols == 0 {
            0.0
        } else {
            self.evidence_bits / self.evidence_symbols as f64
        }
    }

    fn merge(&mut self, other: &DlReport) {
        self.lexicon_bits += other.lexicon_bits;
        self.evidence_bits += other.evidence_bits;
        self.approx_total_bits += other.approx_total_bits;
        self.evidence_symbols += other.evidence_symbols;
    }
}

/// One E-pass over the tasks: expected counts and the description length.
pub fn analyze(lexicon: &Lexicon, tasks: &[ParseTask]) -> (CountTable, DlReport) {
    let blocks: Vec<(CountTable, DlReport)> = tasks
        .par_chunks(BLOCK_TASKS)
        .map(|block| {
            let mut counts = CountTable::new(lexicon.id_limit());
            let mut dl = DlReport::default();
            for task in block {
                accumulate_task(lexicon, task, &mut counts, &mut dl);
            }
            (counts, dl)
        })
        .collect();
    let mut counts = CountTable::new(lexicon.id_limit());
    let mut dl = DlReport::default();
    for (block_counts, block_dl) in &blocks {
        counts.merge(block_counts);
        dl.merge(block_dl);
    }
    // The count approximation sums −c(w)·log₂ p(w) over the merged table so
    // it is independent of the task blocking.
    dl.approx_total_bits = counts
        .iter()
        .map(|(id, c)| -c * lexicon.ln_prob(id) / LN_2)
        .sum();
    (counts, dl)
}

fn accumulate_task(lexicon: &Lexicon, task: &ParseTask, counts: &mut CountTable, dl: &mut DlReport) {
    let u = &task.symbols[..];
    let chart = Chart::compute(lexicon, u, task.bound);
    let ln_p = chart.ln_prob();
    if ln_p == f64::NEG_INFINITY {
        log::warn!(
            "task of {} symbols has zero probability; skipping its counts",
            u.len()
        );
        return;
    }
    if task.word.is_some() {
        dl.lexicon_bits += -ln_p / LN_2;
    } else {
        dl.evidence_bits += -ln_p / LN_2;
        dl.evidence_symbols += u.len();
    }
    for i in 1..=u.len() {
        let ln_beta_i = chart.ln_beta[i];
        if ln_beta_i == f64::NEG_INFINITY {
            continue;
        }
        lexicon.suffix_matches(u, i, |id, len| {
            let j = i - len;
            let ln_alpha_j = chart.ln_alpha[j];
            if ln_alpha_j != f64::NEG_INFINITY && admitted(lexicon, id, len, task.bound) {
                let posterior = (ln_alpha_j + lexicon.ln_prob(id) + ln_beta_i - ln_p).exp();
                counts.add(id, posterior);
            }
        });
    }
}

/// Expected counts over the tasks (the E step).
pub fn expected_counts(lexicon: &Lexicon, tasks: &[ParseTask]) -> CountTable {
    analyze(lexicon, tasks).0
}

/// Exact and count-approximated description length under the current model.
pub fn description_length(lexicon: &Lexicon, tasks: &[ParseTask]) -> DlReport {
    analyze(lexicon, tasks).1
}

/// The M step: store counts on the words and renormalize probabilities
/// (with the underflow floor). Returns the number of floored words.
pub fn maximize(lexicon: &mut Lexicon, counts: &CountTable) -> usize {
    let ids: Vec<WordId> = lexicon.iter().map(|w| w.id).collect();
    for id in ids {
        lexicon.word_mut(id).count = counts.get(id);
    }
    lexicon.set_probs_from_counts()
}

/// Order-independent probability key for parse comparison: ln p in 64.64
/// fixed point. Integer sums are exact whatever the association order, so
/// two parses using the same word multiset always compare equal — float
/// ln-space sums cannot promise that, and the Viterbi tie-break depends on
/// detecting such ties exactly. Quantization error (≤ 2⁻⁶⁴ per word) is far
/// below any meaningful probability difference.
pub fn quantize_ln(ln: f64) -> i128 {
    // `as` saturates non-finite and huge values; clamp so that even a sum
    // over the longest conceivable parse cannot overflow i128.
    ((ln * (2.0f64).powi(64)) as i128).max(-(1i128 << 100))
}

/// A Viterbi parse: the most probable segmentation and its ln-probability.
///
/// Ties are broken deterministically: higher probability, then fewer words,
/// then the parse whose earliest differing word is longer, then the lower
/// word id. Computed by dynamic programming over suffixes, where the
/// comparison reduces to (probability, word count, first-word length,
/// first-word id). Probabilities are compared via [`quantize_ln`] sums, so
/// the ranking is exact and independent of summation order.
pub fn viterbi(lexicon: &Lexicon, u: &[u8], bound: Option<Bound>) -> Option<(Vec<WordId>, f64)> {
    #[derive(Clone, Copy)]
    struct Cell {
        score: i128,
        ln_p: f64,
        nwords: u32,
        word: WordId,
        len: u32,
    }
    let l = u.len();
    let mut best: Vec<Option<Cell>> = vec![None; l + 1];
    best[l] = Some(Cell {
        score: 0,
        ln_p: 0.0,
        nwords: 0,
        word: 0,
        len: 0,
    });
    for i in (0..l).rev() {
        let mut cell: Option<Cell> = None;
        lexicon.prefix_matches(u, i, |id, len| {
            let next = match best[i + len] {
                Some(next) => next,
                None => return,
            };
            if !admitted(lexicon, id, len, bound) {
                return;
            }
            let cand = Cell {
                score: quantize_ln(lexicon.ln_prob(id)) + next.score,
                ln_p: lexicon.ln_prob(id) + next.ln_p,
                nwords: next.nwords + 1,
                word: id,
                len: len as u32,
            };
            let better = match cell {
                None => true,
                Some(cur) => {
                    if cand.score != cur.score {
                        cand.score > cur.score
                    } else if cand.nwords != cur.nwords {
                        cand.nwords < cur.nwords
                    } else if cand.len != cur.len {
                        cand.len > cur.len
                    } else {
                        cand.word < cur.word
                    }
                }
            };
            if better {
                cell = Some(cand);
            }
        });
        best[i] = cell;
    }
    best[0].map(|start| {
        let mut words = Vec::with_capacity(start.nwords as usize);
        let mut i = 0usize;
        while i < l {
            let cell = best[i].expect("reachable cell on the winning path");
            words.push(cell.word);
            i += cell.len as usize;
        }
        (words, start.ln_p)
    })
}

/// Total bits of one concrete description: every task is segmented by
/// Viterbi and each chosen word is charged `code_bits(word)`. This prices a
/// single explicit description (as opposed to the probabilistic total), e.g.
/// under fixed integer codeword lengths.
pub fn viterbi_description_bits(
    lexicon: &Lexicon,
    tasks: &[ParseTask],
    code_bits: &dyn Fn(WordId) -> f64,
) -> f64 {
    let mut total = 0.0;
    for task in tasks {
        let (words, _) = viterbi(lexicon, &task.symbols, task.bound)
            .expect("tasks are parseable with terminals present");
        total += words.iter().map(|&w| code_bits(w)).sum::<f64>();
    }
    total
}

/// Expected adjacency counts c_G(w₁, w₂) for the candidate pairs in
/// `pairs`: the expected number of times w₁ is immediately followed by w₂,
/// summed over tasks.
pub fn pair_counts(
    lexicon: &Lexicon,
    tasks: &[ParseTask],
    pairs: &HashSet<(WordId, WordId)>,
) -> HashMap<(WordId, WordId), f64> {
    if pairs.is_empty() {
        return HashMap::new();
    }
    // Per-word occurrence flags let the inner double loop skip cheaply.
    let limit = lexicon.id_limit() as usize;
    let mut is_left = vec![false; limit];
    let mut is_right = vec![false; limit];
    for &(w1, w2) in pairs {
        is_left[w1 as usize] = true;
        is_right[w2 as usize] = true;
    }

    let blocks: Vec<HashMap<(WordId, WordId), f64>> = tasks
        .par_chunks(BLOCK_TASKS)
        .map(|block| {
            let mut acc: HashMap<(WordId, WordId), f64> = HashMap::new();
            let mut left: Vec<(WordId, usize)> = Vec::new();
            let mut right: Vec<(WordId, usize)> = Vec::new();
            for task in block {
                let u = &task.symbols[..];
                let chart = Chart::compute(lexicon, u, task.bound);
                let ln_p = chart.ln_prob();
                if ln_p == f64::NEG_INFINITY {
                    continue;
                }
                for k in 1..u.len() {
                    left.clear();
                    right.clear();
                    lexicon.suffix_matches(u, k, |id, len| {
                        if is_left[id as usize] && admitted(lexicon, id, len, task.bound) {
                            left.push((id, k - len));
                        }
                    });
                    if left.is_empty() {
                        continue;
                    }
                    lexicon.prefix_matches(u, k, |id, len| {
                        if is_right[id as usize] && admitted(lexicon, id, len, task.bound) {
                            right.push((id, k + len));
                        }
                    });
                    for &(w1, j) in &left {
                        if chart.ln_alpha[j] == f64::NEG_INFINITY {
                            continue;
                        }
                        let ln_left = chart.ln_alpha[j] + lexicon.ln_prob(w1);
                        for &(w2, end) in &right {
                            if chart.ln_beta[end] == f64::NEG_INFINITY {
                                continue;
                            }
                            if !pairs.contains(&(w1, w2)) {
                                continue;
                            }
                            let post =
                                (ln_left + lexicon.ln_prob(w2) + chart.ln_beta[end] - ln_p).exp();
                            *acc.entry((w1, w2)).or_insert(0.0) += post;
                        }
                    }
                }
            }
            acc
        })
        .collect();

    // Merge blocks in order so each pair's float sum is deterministic.
    let mut merged: HashMap<(WordId, WordId), f64> = HashMap::new();
    for block in blocks {
        let mut entries: Vec<((WordId, WordId), f64)> = block.into_iter().collect();
        entries.sort_unstable_by_key(|&(k, _)| k);
        for (k, v) in entries {
            *merged.entry(k).or_insert(0.0) += v;
        }
    }
    merged
}

/// What the final analysis pass hands to the structural refiner.
#[derive(Clone, Debug, Default)]
pub struct EmRecord {
    /// Integer usage count of each word across all Viterbi parses.
    pub viterbi_counts: Vec<u32>,
    /// Integer adjacency counts of word pairs across all Viterbi parses.
    pub viterbi_pairs: HashMap<(WordId, WordId), u32>,
    /// Integer adjacency counts of word triples (when requested).
    pub viterbi_triples: HashMap<(WordId, WordId, WordId), u32>,
    /// Expected adjacency counts for pairs meeting the co-occurrence cutoff.
    pub pair_counts: HashMap<(WordId, WordId), f64>,
}

/// Controls the recording pass of [`em_iterate`].
#[derive(Clone, Copy, Debug)]
pub struct RecordConfig {
    /// Only pairs Viterbi-co-occurring at least this often get expected
    /// counts (and become addition candidates).
    pub min_cooccurrence: u32,
    /// Also record triple adjacencies.
    pub triples: bool,
    /// Memory guard: when the adjacency table grows past this many entries,
    /// pairs (and triples) seen only once so far are dropped. Storing the
    /// co-occurrence tables is the dominant space cost on large corpora.
    pub pair_table_cap: usize,
}

impl Default for RecordConfig {
    fn default() -> Self {
        RecordConfig {
            min_cooccurrence: 2,
            triples: false,
            pair_table_cap: 8_000_000,
        }
    }
}

/// Runs `steps` full E+M passes over the combined evidence, then one
/// analysis pass at the final probabilities that stores expected counts and
/// Viterbi representations on the words. With `record`, also collects the
/// adjacency statistics the refiner consumes.
pub fn em_iterate(
    lexicon: &mut Lexicon,
    corpus: &Corpus,
    steps: usize,
    record: Option<RecordConfig>,
) -> (DlReport, Option<EmRecord>) {
    for _ in 0..steps {
        let counts = {
            let tasks = combined_evidence(corpus, lexicon);
            expected_counts(lexicon, &tasks)
        };
        maximize(lexicon, &counts);
    }

    // Analysis pass: counts, description length, and Viterbi structure under
    // the final probabilities (no M step).
    let tasks = combined_evidence(corpus, lexicon);
    let (counts, dl) = analyze(lexicon, &tasks);
    let record = record.map(|config| {
        let mut rec = record_viterbi(lexicon, &tasks, config);
        let candidates: HashSet<(WordId, WordId)> = rec
            .viterbi_pairs
            .iter()
            .filter(|&(_, &n)| n >= config.min_cooccurrence)
            .map(|(&pair, _)| pair)
            .collect();
        rec.pair_counts = pair_counts(lexicon, &tasks, &candidates);
        rec
    });
    let ids: Vec<WordId> = lexicon.iter().map(|w| w.id).collect();
    for id in ids {
        let count = counts.get(id);
        lexicon.word_mut(id).count = count;
    }
    lexicon.total_count = counts.total;
    (dl, record)
}

/// Viterbi-parses every task, storing representations on words and counting
/// word usages and adjacencies.
pub(crate) fn record_viterbi(
    lexicon: &mut Lexicon,
    tasks: &[ParseTask],
    config: RecordConfig,
) -> EmRecord {
    struct BlockOut {
        counts: Vec<u32>,
        pairs: HashMap<(WordId, WordId), u32>,
        triples: HashMap<(WordId, WordId, WordId), u32>,
        reps: Vec<(WordId, Vec<WordId>)>,
    }
    let limit = lexicon.id_limit() as usize;
    let shared: &Lexicon = lexicon;
    let blocks: Vec<BlockOut> = tasks
        .par_chunks(BLOCK_TASKS)
        .map(|block| {
            let mut out = BlockOut {
                counts: vec![0; limit],
                pairs: HashMap::new(),
                triples: HashMap::new(),
                reps: Vec::new(),
            };
            for task in block {
                let (words, _) = match viterbi(shared, &task.symbols, task.bound) {
                    Some(parse) => parse,
                    None => continue,
                };
                for &w in &words {
                    out.counts[w as usize] += 1;
                }
                for pair in words.windows(2) {
                    *out.pairs.entry((pair[0], pair[1])).or_insert(0) += 1;
                }
                if config.triples {
                    for t in words.windows(3) {
                        *out.triples.entry((t[0], t[1], t[2])).or_insert(0) += 1;
                    }
                }
                if let Some(word) = task.word {
                    out.reps.push((word, words));
                }
            }
            out
        })
        .collect();

    let mut rec = EmRecord {
        viterbi_counts: vec![0; limit],
        ..EmRecord::default()
    };
    for block in blocks {
        for (a, b) in rec.viterbi_counts.iter_mut().zip(&block.counts) {
            *a += b;
        }
        for (pair, n) in block.pairs {
            *rec.viterbi_pairs.entry(pair).or_insert(0) += n;
        }
        if rec.viterbi_pairs.len() > config.pair_table_cap {
            rec.viterbi_pairs.retain(|_, n| *n >= 2);
            log::warn!(
                "adjacency table exceeded {} entries; dropped pairs seen once ({} kept)",
                config.pair_table_cap,
                rec.viterbi_pairs.len()
            );
        }
        for (t, n) in block.triples {
            *rec.viterbi_triples.entry(t).or_insert(0) += n;
        }
        if rec.viterbi_triples.len() > config.pair_table_cap {
            rec.viterbi_triples.retain(|_, n| *n >= 2);
        }
        for (word, words) in block.reps {
            lexicon.word_mut(word).rep = Some(Representation::from_words(words));
        }
    }
    // Triples are only worth considering when both constituent pairs recur;
    // anything rarer explodes the candidate table without ever justifying a
    // three-way composition.
    if config.triples {
        let pairs = &rec.viterbi_pairs;
        rec.viterbi_triples.retain(|&(w1, w2, w3), _| {
            pairs.get(&(w1, w2)).copied().unwrap_or(0) >= 2
                && pairs.get(&(w2, w3)).copied().unwrap_or(0) >= 2
        });
    }
    rec
}
