//! Joint model of byte streams and their meanings.
//!
//! Each utterance carries one or more weighted meaning hypotheses, where a
//! meaning is a set of sememes (atomic semantic symbols).  Words compose
//! meanings by set union: the meaning assembled by a segmentation is the
//! union of the meanings of its words.  The assembled meaning is then
//! *perturbed* into the observed hypothesis by toggling individual sememes,
//! each toggle costing a fixed number of bits (`sememe_bits`, so one toggle
//! has probability `2^-sememe_bits`).  The joint likelihood of an utterance
//! and its hypotheses is
//!
//! ```text
//!   p(u, z) = sum over segmentations: p(segmentation)
//!             * sum_k w_k * 2^(-sememe_bits * |v_k XOR assembled|)
//! ```
//!
//! Tracking the joint distribution of assembled sememe sets across
//! segmentations is exponential, so this module keeps an independent
//! per-sememe marginal instead.  For each sememe `s` the chart stores the
//! probability that `s` is present in the meaning assembled by a random
//! segmentation of each prefix (`A`) and each suffix (`B`):
//!
//! ```text
//!   A[0][s] = 0
//!   A[i][s] = sum over words w spanning (j, i):
//!               softweight(j, w, i) * (has(w, s) + (1 - has(w, s)) * A[j][s])
//! ```
//!
//! with `softweight(j, w, i) = exp(ln_alpha[j] + ln p(w) - ln_alpha[i])`, a
//! convex combination, so marginals stay in `[0, 1]`; `B` mirrors it from
//! the right.  Every posterior quantity (span usage, toggle probability,
//! joint word/toggle counts) is assembled from these marginals.  The
//! treatment is exact whenever sememe occurrences never interact across a
//! parse (single-sememe lexicons, sememes confined to non-overlapping
//! words) — and in particular, with no sememes at all the whole model
//! reduces, bit for bit, to the plain surface model.
//!
//! Training is staged: surface structure is first learned from sound alone,
//! then the model alternates joint-model EM with pair creation, *sememe
//! perturbations* — new entries sharing a word's surface but toggling one
//! sememe of its meaning — and deletion.  A perturbation's price is the
//! usual count-ledger delta plus `sememe_bits` for every expected toggle it
//! adds or removes.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::f64::consts::LN_2;
use std::f64::NEG_INFINITY;

use rayon::prelude::*;

use crate::corpus::{MeaningCorpus, WeightedMeaning};
use crate::em::{self, Chart, CountTable, DlReport, EmRecord, LogSum, ParseTask, RecordConfig};
use crate::lexicon::{Bound, Lexicon, OrderingMode, Representation, SememeId, SememeSet, WordId};
use crate::refine::{self, Candidate, CandidateKind, CountsView, DeltaLedger, RefineConfig};

/// Default number of bits charged per sememe toggle.
pub const DEFAULT_SEMEME_BITS: f64 = 10.0;

// ---------------------------------------------------------------------------
// Hypothesis blocks
// ---------------------------------------------------------------------------

/// The weighted meaning hypotheses of one utterance, prepared for scoring.
///
/// Each hypothesis becomes one block: an assembled meaning is scored against
/// every block and the results are mixed by block weight.  Keeping one block
/// per hypothesis (rather than folding all hypotheses into a single
/// per-sememe product) preserves the correlations between the sememes of a
/// single hypothesis, which matters when hypotheses disagree.
#[derive(Clone, Debug)]
pub struct PartitionBlocks {
    /// Mixture weight of each hypothesis (normalised to sum to one).
    pub weights: Vec<f64>,
    /// Natural log of each weight.
    pub ln_weights: Vec<f64>,
    /// The sememe set of each hypothesis.
    pub meanings: Vec<SememeSet>,
    /// Probability that a single sememe is toggled: `2^-sememe_bits`.
    pub mismatch: f64,
    /// Natural log of `mismatch`.
    pub ln_mismatch: f64,
}

/// Prepares the hypotheses of one utterance for likelihood scoring.
///
/// Weights are normalised.  An empty hypothesis list falls back to a single
/// weight-one empty meaning: an utterance with no stated meaning is one
/// whose assembled sememes are all chargeable toggles.
pub fn hypothesis_blocks(hypotheses: &[WeightedMeaning], sememe_bits: f64) -> PartitionBlocks {
    let mismatch = (-sememe_bits).exp2();
    let ln_mismatch = -sememe_bits * LN_2;
    let mut weights: Vec<f64> = hypotheses.iter().map(|h| h.weight).collect();
    let mut meanings: Vec<SememeSet> = hypotheses.iter().map(|h| h.sememes.clone()).collect();
    if weights.is_empty() {
        weights.push(1.0);
        meanings.push(SememeSet::new());
    }
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        for w in &mut weights {
            *w /= total;
        }
    } else {
        let n = weights.len() as f64;
        for w in &mut weights {
            *w = 1.0 / n;
        }
    }
    let ln_weights = weights.iter().map(|w| w.ln()).collect();
    PartitionBlocks {
        weights,
        ln_weights,
        meanings,
        mismatch,
        ln_mismatch,
    }
}

impl PartitionBlocks {
    /// Likelihood of the observed hypotheses given an assembled meaning:
    /// `sum_k w_k * mismatch^(sememes toggled between them)`.
    pub fn likelihood_of(&self, assembled: &SememeSet) -> f64 {
        let mut total = 0.0;
        for (k, meaning) in self.meanings.iter().enumerate() {
            let toggles = meaning.symmetric_difference(assembled).len() as i32;
            total += self.weights[k] * self.mismatch.powi(toggles);
        }
        total
    }

    /// Index of the hypothesis that explains an assembled meaning best
    /// (highest weighted likelihood; first on ties).
    pub fn best_block(&self, assembled: &SememeSet) -> usize {
        let mut best = 0usize;
        let mut best_score = NEG_INFINITY;
        for (k, meaning) in self.meanings.iter().enumerate() {
            let toggles = meaning.symmetric_difference(assembled).len() as f64;
            let score = self.ln_weights[k] + toggles * self.ln_mismatch;
            if score > best_score {
                best_score = score;
                best = k;
            }
        }
        best
    }
}

// ---------------------------------------------------------------------------
// Meaning chart: per-sememe marginals over segmentations
// ---------------------------------------------------------------------------

/// Forward/backward chart extended with per-sememe assembly marginals.
#[derive(Clone, Debug)]
pub struct MeaningChart {
    /// The plain segmentation chart over the surface bytes.
    pub chart: Chart,
    /// Sorted sememes that can appear in this utterance's assembled meaning
    /// or its hypotheses; marginal columns are indexed by position here.
    pub active: Vec<SememeId>,
    /// `a[i][k]`: probability that sememe `active[k]` is present in the
    /// meaning assembled by a random segmentation of bytes `0..i`.
    pub a: Vec<Vec<f64>>,
    /// `b[i][k]`: probability that sememe `active[k]` is contributed by a
    /// random segmentation of bytes `i..len`.
    pub b: Vec<Vec<f64>>,
    /// Per hypothesis block: ln of the product over active sememes of the
    /// block's whole-utterance agreement factor.
    pub ln_end: Vec<f64>,
    /// ln of the meaning-side likelihood `sum_k w_k * prod_s agreement_k(s)`;
    /// exactly `0.0` when no sememe is active, and `0.0` (carrying no
    /// information) when the surface is unparseable.
    pub ln_d: f64,
}

impl MeaningChart {
    /// Builds the chart for one surface under one set of hypothesis blocks.
    pub fn compute(
        lexicon: &Lexicon,
        symbols: &[u8],
        blocks: &PartitionBlocks,
        bound: Option<Bound>,
    ) -> MeaningChart {
        let chart = Chart::compute(lexicon, symbols, bound);
        let l = symbols.len();
        if chart.ln_prob() == NEG_INFINITY {
            return MeaningChart {
                chart,
                active: Vec::new(),
                a: vec![Vec::new(); l + 1],
                b: vec![Vec::new(); l + 1],
                ln_end: vec![0.0; blocks.weights.len()],
                ln_d: 0.0,
            };
        }

        // Active sememes: everything a hypothesis mentions plus everything a
        // usable word occurrence could contribute.
        let mut active_set: BTreeSet<SememeId> = BTreeSet::new();
        for meaning in &blocks.meanings {
            for s in meaning.iter() {
                active_set.insert(s);
            }
        }
        for i in 1..=l {
            if chart.ln_alpha[i] == NEG_INFINITY || chart.ln_beta[i] == NEG_INFINITY {
                continue;
            }
            lexicon.suffix_matches(symbols, i, |id, len| {
                let j = i - len;
                if chart.ln_alpha[j] == NEG_INFINITY || !em::admitted(lexicon, id, len, bound) {
                    return;
                }
                for s in lexicon.word(id).sememes.iter() {
                    active_set.insert(s);
                }
            });
        }
        let active: Vec<SememeId> = active_set.into_iter().collect();
        let n = active.len();

        // Prefix marginals.
        let mut a: Vec<Vec<f64>> = vec![vec![0.0; n]; l + 1];
        if n > 0 {
            for i in 1..=l {
                if chart.ln_alpha[i] == NEG_INFINITY {
                    continue;
                }
                let mut row = vec![0.0; n];
                lexicon.suffix_matches(symbols, i, |id, len| {
                    let j = i - len;
                    if chart.ln_alpha[j] == NEG_INFINITY
                        || !em::admitted(lexicon, id, len, bound)
                    {
                        return;
                    }
                    let weight =
                        (chart.ln_alpha[j] + lexicon.ln_prob(id) - chart.ln_alpha[i]).exp();
                    if weight == 0.0 {
                        return;
                    }
                    let sememes = &lexicon.word(id).sememes;
                    if sememes.is_empty() {
                        for (cell, prev) in row.iter_mut().zip(&a[j]) {
                            *cell += weight * prev;
                        }
                    } else {
                        for (k, &s) in active.iter().enumerate() {
                            let carried = if sememes.contains(s) { 1.0 } else { a[j][k] };
                            row[k] += weight * carried;
                        }
                    }
                });
                a[i] = row;
            }
        }

        // Suffix marginals.
        let mut b: Vec<Vec<f64>> = vec![vec![0.0; n]; l + 1];
        if n > 0 {
            for i in (0..l).rev() {
                if chart.ln_beta[i] == NEG_INFINITY {
                    continue;
                }
                let mut row = vec![0.0; n];
                lexicon.prefix_matches(symbols, i, |id, len| {
                    let j = i + len;
                    if chart.ln_beta[j] == NEG_INFINITY
                        || !em::admitted(lexicon, id, len, bound)
                    {
                        return;
                    }
                    let weight =
                        (lexicon.ln_prob(id) + chart.ln_beta[j] - chart.ln_beta[i]).exp();
                    if weight == 0.0 {
                        return;
                    }
                    let sememes = &lexicon.word(id).sememes;
                    if sememes.is_empty() {
                        for (cell, next) in row.iter_mut().zip(&b[j]) {
                            *cell += weight * next;
                        }
                    } else {
                        for (k, &s) in active.iter().enumerate() {
                            let carried = if sememes.contains(s) { 1.0 } else { b[j][k] };
                            row[k] += weight * carried;
                        }
                    }
                });
                b[i] = row;
            }
        }

        // Whole-utterance agreement per block, in log space so that many
        // active sememes cannot underflow the product.
        let n_blocks = blocks.weights.len();
        let mut ln_end = vec![0.0; n_blocks];
        for (k, meaning) in blocks.meanings.iter().enumerate() {
            let mut sum = 0.0;
            for (idx, &s) in active.iter().enumerate() {
                let assembled = a[l][idx];
                let full = if meaning.contains(s) {
                    // Desired present: agreement when assembled, an
                    // insertion toggle when not.
                    assembled + blocks.mismatch * (1.0 - assembled)
                } else {
                    // Desired absent: a removal toggle when assembled.
                    blocks.mismatch * assembled + (1.0 - assembled)
                };
                sum += full.ln();
            }
            ln_end[k] = sum;
        }
        let mut d = LogSum::new();
        for k in 0..n_blocks {
            d.add(blocks.ln_weights[k] + ln_end[k]);
        }
        let ln_d = d.value();

        MeaningChart {
            chart,
            active,
            a,
            b,
            ln_end,
            ln_d,
        }
    }

    /// ln of the joint likelihood of surface and hypotheses.
    pub fn ln_joint(&self) -> f64 {
        let ln_p = self.chart.ln_prob();
        if ln_p == NEG_INFINITY {
            return NEG_INFINITY;
        }
        ln_p + self.ln_d
    }

    /// Description length of the joint observation in bits.
    pub fn bits(&self) -> f64 {
        -self.ln_joint() / LN_2
    }

    /// Index of a sememe in `active`, if present.
    fn active_index(&self, s: SememeId) -> Option<usize> {
        self.active.binary_search(&s).ok()
    }

    /// Log agreement factor of block `k` at active index `idx` for a word
    /// with meaning `sememes` spanning bytes `from..to`: the probability,
    /// under block `k`, of the observed hypothesis value at this sememe
    /// given that the word is used on this span.
    fn ln_span_agreement(
        &self,
        blocks: &PartitionBlocks,
        k: usize,
        idx: usize,
        sememes: &SememeSet,
        from: usize,
        to: usize,
    ) -> f64 {
        let s = self.active[idx];
        let desired = blocks.meanings[k].contains(s);
        if sememes.contains(s) {
            // The occurrence itself asserts the sememe: assembled for sure.
            if desired {
                0.0
            } else {
                blocks.ln_mismatch
            }
        } else {
            // Assembled iff the prefix before the word or the suffix after
            // it contributes the sememe.
            let before = self.a[from][idx];
            let after = self.b[to][idx];
            let assembled = before + (1.0 - before) * after;
            let full = if desired {
                assembled + blocks.mismatch * (1.0 - assembled)
            } else {
                blocks.mismatch * assembled + (1.0 - assembled)
            };
            full.ln()
        }
    }

    /// Meaning-side correction factor for a word occurrence spanning
    /// `from..to`: the ratio between the hypothesis likelihood given that
    /// occurrence and the hypothesis likelihood overall.  Multiplying the
    /// plain span posterior by this factor gives the joint-model posterior.
    ///
    /// With no active sememes every block factor is an empty product, the
    /// numerator equals the denominator bit for bit, and the factor is
    /// exactly one.
    pub fn span_factor(
        &self,
        blocks: &PartitionBlocks,
        sememes: &SememeSet,
        from: usize,
        to: usize,
    ) -> f64 {
        let mut num = LogSum::new();
        for k in 0..blocks.weights.len() {
            let mut sum = blocks.ln_weights[k];
            for idx in 0..self.active.len() {
                sum += self.ln_span_agreement(blocks, k, idx, sememes, from, to);
            }
            num.add(sum);
        }
        (num.value() - self.ln_d).exp()
    }

    /// Posterior probability that sememe `s` was toggled (inserted or
    /// removed) between the assembled meaning and the hypotheses.
    pub fn toggle_posterior(&self, blocks: &PartitionBlocks, s: SememeId) -> f64 {
        let Some(idx) = self.active_index(s) else {
            return 0.0;
        };
        let l = self.a.len() - 1;
        let assembled = self.a[l][idx];
        let mut num = LogSum::new();
        for k in 0..blocks.weights.len() {
            let desired = blocks.meanings[k].contains(s);
            let toggled = if desired {
                // Desired present but not assembled: an insertion toggle.
                blocks.mismatch * (1.0 - assembled)
            } else {
                // Desired absent but assembled: a removal toggle.
                blocks.mismatch * assembled
            };
            if toggled <= 0.0 {
                continue;
            }
            let mut sum = blocks.ln_weights[k] + toggled.ln();
            for (other, &s2) in self.active.iter().enumerate() {
                if other == idx {
                    continue;
                }
                let assembled2 = self.a[l][other];
                let full = if blocks.meanings[k].contains(s2) {
                    assembled2 + blocks.mismatch * (1.0 - assembled2)
                } else {
                    blocks.mismatch * assembled2 + (1.0 - assembled2)
                };
                sum += full.ln();
            }
            num.add(sum);
        }
        (num.value() - self.ln_d).exp()
    }

    /// Expected total number of toggles for this observation.
    pub fn expected_toggles(&self, blocks: &PartitionBlocks) -> f64 {
        self.active
            .iter()
            .map(|&s| self.toggle_posterior(blocks, s))
            .sum()
    }

    /// Joint posterior that a word with meaning `sememes` is used on span
    /// `from..to` *and* sememe `s` is toggled.  `base` must be the plain
    /// span posterior `exp(ln_alpha[from] + ln p(w) + ln_beta[to] − ln p(u))`.
    pub fn span_toggle_posterior(
        &self,
        blocks: &PartitionBlocks,
        sememes: &SememeSet,
        from: usize,
        to: usize,
        s: SememeId,
        base: f64,
    ) -> f64 {
        let Some(idx) = self.active_index(s) else {
            return 0.0;
        };
        let mut num = LogSum::new();
        for k in 0..blocks.weights.len() {
            let desired = blocks.meanings[k].contains(s);
            let toggled = if sememes.contains(s) {
                // Assembled with certainty through this occurrence.
                if desired {
                    0.0
                } else {
                    blocks.mismatch
                }
            } else {
                let before = self.a[from][idx];
                let after = self.b[to][idx];
                let assembled = before + (1.0 - before) * after;
                if desired {
                    blocks.mismatch * (1.0 - assembled)
                } else {
                    blocks.mismatch * assembled
                }
            };
            if toggled <= 0.0 {
                continue;
            }
            let mut sum = blocks.ln_weights[k] + toggled.ln();
            for other in 0..self.active.len() {
                if other == idx {
                    continue;
                }
                sum += self.ln_span_agreement(blocks, k, other, sememes, from, to);
            }
            num.add(sum);
        }
        base * (num.value() - self.ln_d).exp()
    }
}

// ---------------------------------------------------------------------------
// Evidence construction
// ---------------------------------------------------------------------------

/// One joint-model scoring task: a parse task plus its hypothesis blocks.
pub struct MeaningTask<'a> {
    pub task: ParseTask<'a>,
    pub blocks: PartitionBlocks,
}

/// Builds the combined evidence for the joint model: every corpus utterance
/// with its hypotheses, then every non-terminal lexical entry as a bounded
/// task whose single hypothesis is its own meaning.  Task order matches the
/// plain model's combined evidence exactly.
pub fn meaning_evidence<'a>(
    mcorpus: &'a MeaningCorpus,
    lexicon: &Lexicon,
    sememe_bits: f64,
) -> Vec<MeaningTask<'a>> {
    let mut tasks = Vec::new();
    for (u, hyps) in mcorpus.corpus.utterances.iter().zip(&mcorpus.meanings) {
        tasks.push(MeaningTask {
            task: ParseTask::utterance(&u.symbols),
            blocks: hypothesis_blocks(hyps, sememe_bits),
        });
    }
    for word in lexicon.iter() {
        if word.is_terminal {
            continue;
        }
        let own = [WeightedMeaning {
            sememes: word.sememes.clone(),
            weight: 1.0,
        }];
        tasks.push(MeaningTask {
            task: ParseTask::for_word(word),
            blocks: hypothesis_blocks(&own, sememe_bits),
        });
    }
    tasks
}

// ---------------------------------------------------------------------------
// Expected counts and description length under the joint model
// ---------------------------------------------------------------------------

fn accumulate_meaning_task(
    lexicon: &Lexicon,
    task: &MeaningTask<'_>,
    counts: &mut CountTable,
    dl: &mut DlReport,
) {
    let u = &task.task.symbols[..];
    let mchart = MeaningChart::compute(lexicon, u, &task.blocks, task.task.bound);
    let ln_joint = mchart.ln_joint();
    if ln_joint == NEG_INFINITY {
        log::warn!(
            "task of {} symbols has zero probability; skipping its counts",
            u.len()
        );
        return;
    }
    if task.task.word.is_some() {
        dl.lexicon_bits += -ln_joint / LN_2;
    } else {
        dl.evidence_bits += -ln_joint / LN_2;
        dl.evidence_symbols += u.len();
    }
    let chart = &mchart.chart;
    let ln_p = chart.ln_prob();
    for i in 1..=u.len() {
        let ln_beta_i = chart.ln_beta[i];
        if ln_beta_i == NEG_INFINITY {
            continue;
        }
        lexicon.suffix_matches(u, i, |id, len| {
            let j = i - len;
            let ln_alpha_j = chart.ln_alpha[j];
            if ln_alpha_j != NEG_INFINITY && em::admitted(lexicon, id, len, task.task.bound) {
                let base = (ln_alpha_j + lexicon.ln_prob(id) + ln_beta_i - ln_p).exp();
                let factor = mchart.span_factor(&task.blocks, &lexicon.word(id).sememes, j, i);
                counts.add(id, base * factor);
            }
        });
    }
}

/// One expectation pass under the joint model: expected word counts plus a
/// description-length report whose per-task bits measure surface and
/// hypotheses together.
pub fn meaning_analyze(lexicon: &Lexicon, tasks: &[MeaningTask<'_>]) -> (CountTable, DlReport) {
    let blocks: Vec<(CountTable, DlReport)> = tasks
        .par_chunks(em::BLOCK_TASKS)
        .map(|block| {
            let mut counts = CountTable::new(lexicon.id_limit());
            let mut dl = DlReport::default();
            for task in block {
                accumulate_meaning_task(lexicon, task, &mut counts, &mut dl);
            }
            (counts, dl)
        })
        .collect();
    let mut counts = CountTable::new(lexicon.id_limit());
    let mut dl = DlReport::default();
    for (block_counts, block_dl) in &blocks {
        counts.merge(block_counts);
        dl.lexicon_bits += block_dl.lexicon_bits;
        dl.evidence_bits += block_dl.evidence_bits;
        dl.evidence_symbols += block_dl.evidence_symbols;
    }
    // Count approximation from the merged table, independent of blocking.
    dl.approx_total_bits = counts
        .iter()
        .map(|(id, c)| -c * lexicon.ln_prob(id) / LN_2)
        .sum();
    (counts, dl)
}

/// Expected word counts over the joint tasks (the E step).
pub fn meaning_expected_counts(lexicon: &Lexicon, tasks: &[MeaningTask<'_>]) -> CountTable {
    meaning_analyze(lexicon, tasks).0
}

// ---------------------------------------------------------------------------
// EM driver and structure-search record
// ---------------------------------------------------------------------------

/// Viterbi-derived statistics from one joint-model analysis pass.
pub struct MeaningRecord {
    /// Plain-structure record: adjacencies, soft pair counts, spellings.
    pub em: EmRecord,
    /// Co-occurrence counts of (word used in a best parse, sememe toggled by
    /// the best explanation of that parse's assembled meaning).
    pub toggle_pairs: HashMap<(WordId, SememeId), u32>,
    /// Soft joint counts for the surviving toggle pairs: expected number of
    /// uses of the word during which the sememe is toggled.
    pub word_sememe_counts: HashMap<(WordId, SememeId), f64>,
}

/// Runs `steps` expectation/re-estimation rounds of the joint model, then a
/// final analysis pass whose counts are stored on the words.  With a record
/// configuration it also gathers the structure-search statistics.
pub fn meaning_em_iterate(
    lexicon: &mut Lexicon,
    mcorpus: &MeaningCorpus,
    sememe_bits: f64,
    steps: usize,
    record: Option<RecordConfig>,
) -> (DlReport, Option<MeaningRecord>) {
    for _ in 0..steps {
        let counts = {
            let tasks = meaning_evidence(mcorpus, lexicon, sememe_bits);
            meaning_expected_counts(lexicon, &tasks)
        };
        em::maximize(lexicon, &counts);
    }

    let tasks = meaning_evidence(mcorpus, lexicon, sememe_bits);
    let (counts, dl) = meaning_analyze(lexicon, &tasks);
    let record = record.map(|config| {
        let plain: Vec<ParseTask<'_>> = tasks
            .iter()
            .map(|t| ParseTask {
                symbols: Cow::Borrowed(t.task.symbols.as_ref()),
                bound: t.task.bound,
                word: t.task.word,
            })
            .collect();
        let mut rec = em::record_viterbi(lexicon, &plain, config);
        let candidates: HashSet<(WordId, WordId)> = rec
            .viterbi_pairs
            .iter()
            .filter(|&(_, &n)| n >= config.min_cooccurrence)
            .map(|(&pair, _)| pair)
            .collect();
        rec.pair_counts = em::pair_counts(lexicon, &plain, &candidates);

        let toggle_pairs = record_toggles(lexicon, &tasks, config.min_cooccurrence);
        let word_sememe_counts = if toggle_pairs.is_empty() {
            HashMap::new()
        } else {
            let keys: HashSet<(WordId, SememeId)> = toggle_pairs.keys().copied().collect();
            word_sememe_counts(lexicon, &tasks, &keys)
        };
        MeaningRecord {
            em: rec,
            toggle_pairs,
            word_sememe_counts,
        }
    });
    let ids: Vec<WordId> = lexicon.iter().map(|w| w.id).collect();
    for id in ids {
        let count = counts.get(id);
        lexicon.word_mut(id).count = count;
    }
    lexicon.total_count = counts.total;
    (dl, record)
}

/// Counts (word, toggled sememe) co-occurrences over best parses.  For each
/// task the best plain parse assembles a meaning; the best-matching
/// hypothesis block determines which sememes had to be toggled; every word
/// occurrence in the parse pairs with every toggle.
fn record_toggles(
    lexicon: &Lexicon,
    tasks: &[MeaningTask<'_>],
    min_cooccurrence: u32,
) -> HashMap<(WordId, SememeId), u32> {
    let partial: Vec<HashMap<(WordId, SememeId), u32>> = tasks
        .par_chunks(em::BLOCK_TASKS)
        .map(|chunk| {
            let mut out: HashMap<(WordId, SememeId), u32> = HashMap::new();
            for task in chunk {
                let Some((words, _)) = em::viterbi(lexicon, &task.task.symbols, task.task.bound)
                else {
                    continue;
                };
                let mut assembled = SememeSet::new();
                for &w in &words {
                    assembled.union_with(&lexicon.word(w).sememes);
                }
                let k = task.blocks.best_block(&assembled);
                let toggles = task.blocks.meanings[k].symmetric_difference(&assembled);
                if toggles.is_empty() {
                    continue;
                }
                for &w in &words {
                    for s in toggles.iter() {
                        *out.entry((w, s)).or_insert(0) += 1;
                    }
                }
            }
            out
        })
        .collect();
    let mut merged: HashMap<(WordId, SememeId), u32> = HashMap::new();
    for part in partial {
        for (key, n) in part {
            *merged.entry(key).or_insert(0) += n;
        }
    }
    merged.retain(|_, n| *n >= min_cooccurrence);
    merged
}

/// Soft joint counts for selected (word, sememe) pairs: the expected number
/// of uses of the word during which the sememe is toggled.
fn word_sememe_counts(
    lexicon: &Lexicon,
    tasks: &[MeaningTask<'_>],
    keys: &HashSet<(WordId, SememeId)>,
) -> HashMap<(WordId, SememeId), f64> {
    let mut by_word: HashMap<WordId, Vec<SememeId>> = HashMap::new();
    for &(w, s) in keys {
        by_word.entry(w).or_default().push(s);
    }
    for list in by_word.values_mut() {
        list.sort_unstable();
    }

    let partial: Vec<HashMap<(WordId, SememeId), f64>> = tasks
        .par_chunks(em::BLOCK_TASKS)
        .map(|chunk| {
            let mut out: HashMap<(WordId, SememeId), f64> = HashMap::new();
            for task in chunk {
                let u = &task.task.symbols[..];
                let mchart = MeaningChart::compute(lexicon, u, &task.blocks, task.task.bound);
                if mchart.ln_joint() == NEG_INFINITY || mchart.active.is_empty() {
                    continue;
                }
                let chart = &mchart.chart;
                let ln_p = chart.ln_prob();
                for i in 1..=u.len() {
                    let ln_beta_i = chart.ln_beta[i];
                    if ln_beta_i == NEG_INFINITY {
                        continue;
                    }
                    lexicon.suffix_matches(u, i, |id, len| {
                        let Some(list) = by_word.get(&id) else { return };
                        let j = i - len;
                        let ln_alpha_j = chart.ln_alpha[j];
                        if ln_alpha_j == NEG_INFINITY
                            || !em::admitted(lexicon, id, len, task.task.bound)
                        {
                            return;
                        }
                        let base = (ln_alpha_j + lexicon.ln_prob(id) + ln_beta_i - ln_p).exp();
                        if base == 0.0 {
                            return;
                        }
                        let sememes = &lexicon.word(id).sememes;
                        for &s in list {
                            let joint =
                                mchart.span_toggle_posterior(&task.blocks, sememes, j, i, s, base);
                            if joint > 0.0 {
                                *out.entry((id, s)).or_insert(0.0) += joint;
                            }
                        }
                    });
                }
            }
            out
        })
        .collect();
    let mut merged: HashMap<(WordId, SememeId), f64> = HashMap::new();
    for part in partial {
        let mut entries: Vec<((WordId, SememeId), f64)> = part.into_iter().collect();
        entries.sort_unstable_by_key(|&(k, _)| k);
        for (key, c) in entries {
            *merged.entry(key).or_insert(0.0) += c;
        }
    }
    merged
}

// ---------------------------------------------------------------------------
// Sememe perturbations: pricing, proposal, application
// ---------------------------------------------------------------------------

/// Priced perturbation: count ledger plus toggle-bit adjustment plus the
/// component-deletion lookahead.
pub struct PerturbDelta {
    pub ledger: DeltaLedger,
    /// Ledger-derived change in description length, in bits.
    pub base_bits: f64,
    /// Change in toggle charges: the new entry pays its own residual
    /// toggles, but each expected use saves one toggle.
    pub toggle_bits: f64,
    /// Savings available by deleting the source entry afterwards (≤ 0).
    pub lookahead_bits: f64,
}

impl PerturbDelta {
    pub fn total_bits(&self) -> f64 {
        self.base_bits + self.toggle_bits + self.lookahead_bits
    }
}

/// Joint-model analysis of one prospective lexical entry: the expected
/// counts of the words spelling its surface (meaning-weighted), and the
/// expected residual toggles its own meaning needs beyond what the
/// spell-out assembles.
fn entry_meaning_stats(
    lexicon: &Lexicon,
    surface: &[u8],
    sememes: &SememeSet,
    sememe_bits: f64,
) -> Option<(BTreeMap<WordId, f64>, f64)> {
    let bound = Bound {
        surface_len: surface.len(),
        sememe_count: sememes.len(),
    };
    let own = [WeightedMeaning {
        sememes: sememes.clone(),
        weight: 1.0,
    }];
    let blocks = hypothesis_blocks(&own, sememe_bits);
    let mchart = MeaningChart::compute(lexicon, surface, &blocks, Some(bound));
    if mchart.ln_joint() == NEG_INFINITY {
        return None;
    }
    let chart = &mchart.chart;
    let ln_p = chart.ln_prob();
    let mut inside: BTreeMap<WordId, f64> = BTreeMap::new();
    for i in 1..=surface.len() {
        let ln_beta_i = chart.ln_beta[i];
        if ln_beta_i == NEG_INFINITY {
            continue;
        }
        lexicon.suffix_matches(surface, i, |id, len| {
            let ln_alpha_j = chart.ln_alpha[i - len];
            if ln_alpha_j != NEG_INFINITY && em::admitted(lexicon, id, len, Some(bound)) {
                let base = (ln_alpha_j + lexicon.ln_prob(id) + ln_beta_i - ln_p).exp();
                let factor =
                    mchart.span_factor(&blocks, &lexicon.word(id).sememes, i - len, i);
                *inside.entry(id).or_insert(0.0) += base * factor;
            }
        });
    }
    let toggles = mchart.expected_toggles(&blocks);
    Some((inside, toggles))
}

/// Prices adding a perturbed variant of `word`: same surface, one sememe
/// toggled, expected to be used `new_count` times.
pub fn estimate_perturb_delta(
    lexicon: &Lexicon,
    word: WordId,
    sememe: SememeId,
    new_count: f64,
    sememe_bits: f64,
) -> Option<PerturbDelta> {
    if new_count <= 0.0 {
        return None;
    }
    let source = lexicon.word(word);
    let toggled = SememeSet::from_ids([sememe]);
    let sememes = source.sememes.symmetric_difference(&toggled);
    let surface = source.surface.clone();
    let (inside, entry_toggles) = entry_meaning_stats(lexicon, &surface, &sememes, sememe_bits)?;

    let mut ledger = DeltaLedger {
        total_before: lexicon.total_count,
        ..DeltaLedger::default()
    };
    ledger.created = Some(new_count);
    for (&component, &c_in) in &inside {
        let old = lexicon.word(component).count;
        let new = (old + (1.0 - new_count) * c_in).max(0.0);
        ledger.changed.push((component, old, new));
    }
    let base_bits = ledger.delta_bits();
    if !base_bits.is_finite() {
        return None;
    }

    // The new entry's spell-out pays `entry_toggles` residual toggles; each
    // of its `new_count` uses replaces one toggle of `sememe`.
    let toggle_bits = sememe_bits * (entry_toggles - new_count);

    // Lookahead: after the addition, the source entry may become deletable.
    let mut lookahead_bits = 0.0;
    if !source.is_terminal {
        let overlay: HashMap<WordId, f64> =
            ledger.changed.iter().map(|&(w, _, new)| (w, new)).collect();
        let view = CountsView {
            lexicon,
            overlay: Some(&overlay),
            total: lexicon.total_count + ledger.delta_c(),
        };
        if let Some(delta) = delete_delta_with_counts(lexicon, word, &view, sememe_bits) {
            lookahead_bits = delta.min(0.0);
        }
    }

    Some(PerturbDelta {
        ledger,
        base_bits,
        toggle_bits,
        lookahead_bits,
    })
}

/// Extended deletion price under the joint model: the count ledger plus the
/// toggle charges the survivors inherit — each of the deleted entry's uses
/// re-toggles whatever its spell-out cannot assemble of its meaning.
fn delete_delta_with_counts(
    lexicon: &Lexicon,
    target: WordId,
    counts: &CountsView<'_>,
    sememe_bits: f64,
) -> Option<f64> {
    let word = lexicon.word(target);
    if word.is_terminal {
        return None;
    }
    let c_target = counts.get(target);
    let (inside, entry_toggles) =
        entry_meaning_stats(lexicon, &word.surface, &word.sememes, sememe_bits)?;
    let mut ledger = DeltaLedger {
        total_before: counts.total,
        ..DeltaLedger::default()
    };
    ledger.changed.push((target, c_target, 0.0));
    for (&component, &c_in) in &inside {
        if component == target {
            continue;
        }
        let old = counts.get(component);
        let new = (old + (c_target - 1.0) * c_in).max(0.0);
        ledger.changed.push((component, old, new));
    }
    let base = ledger.delta_bits();
    if !base.is_finite() {
        return None;
    }
    Some(base + sememe_bits * (c_target - 1.0) * entry_toggles)
}

/// Prices deleting a lexical entry under the joint model.
pub fn estimate_delete_delta_meaning(
    lexicon: &Lexicon,
    target: WordId,
    sememe_bits: f64,
) -> Option<f64> {
    let counts = CountsView::current(lexicon);
    delete_delta_with_counts(lexicon, target, &counts, sememe_bits)
}

/// Proposes perturbed lexical entries from the recorded (word, toggle)
/// co-occurrences: for each pair seen often enough, a variant of the word
/// with that sememe toggled is priced, and kept when it promises a shorter
/// total description.  A toggle of a sememe the word already carries
/// proposes the variant *without* it; otherwise the variant gains it.
pub fn propose_sememe_perturbations(
    lexicon: &Lexicon,
    record: &MeaningRecord,
    sememe_bits: f64,
    config: &RefineConfig,
) -> Vec<Candidate> {
    let mut pairs: Vec<((WordId, SememeId), u32)> = record
        .toggle_pairs
        .iter()
        .map(|(&k, &n)| (k, n))
        .collect();
    pairs.sort_unstable_by_key(|&(k, _)| k);

    let mut candidates: Vec<Candidate> = pairs
        .into_par_iter()
        .filter_map(|((word, sememe), n)| {
            if n < config.pair_prune_min {
                return None;
            }
            let source = lexicon.try_word(word)?;
            let toggled = SememeSet::from_ids([sememe]);
            let sememes = source.sememes.symmetric_difference(&toggled);
            if lexicon.find(&source.surface, &sememes).is_some() {
                return None;
            }
            let new_count = record
                .word_sememe_counts
                .get(&(word, sememe))
                .copied()
                .unwrap_or(n as f64);
            let delta = estimate_perturb_delta(lexicon, word, sememe, new_count, sememe_bits)?;
            let total = delta.total_bits();
            if total >= 0.0 {
                return None;
            }
            Some(Candidate {
                kind: CandidateKind::AddSememePerturb,
                components: vec![word],
                sememe: Some(sememe),
                estimated_count: new_count,
                delta_bits: total,
                rep_at_estimate: Vec::new(),
            })
        })
        .collect();

    // Different source entries can propose the same resulting entry; keep
    // the most promising candidate per (surface, meaning).
    let mut keep = vec![true; candidates.len()];
    let mut best: HashMap<(Box<[u8]>, SememeSet), usize> = HashMap::new();
    for (idx, cand) in candidates.iter().enumerate() {
        let source = lexicon.word(cand.components[0]);
        let toggled = SememeSet::from_ids([cand.sememe.expect("perturbation candidate")]);
        let key = (
            source.surface.clone(),
            source.sememes.symmetric_difference(&toggled),
        );
        match best.entry(key) {
            std::collections::hash_map::Entry::Vacant(slot) => {
                slot.insert(idx);
            }
            std::collections::hash_map::Entry::Occupied(mut slot) => {
                let held = *slot.get();
                if cand.delta_bits < candidates[held].delta_bits {
                    keep[held] = false;
                    slot.insert(idx);
                } else {
                    keep[idx] = false;
                }
            }
        }
    }
    let mut index = 0;
    candidates.retain(|_| {
        let kept = keep[index];
        index += 1;
        kept
    });

    candidates.sort_unstable_by(|a, b| {
        a.delta_bits
            .total_cmp(&b.delta_bits)
            .then_with(|| a.components.cmp(&b.components))
            .then_with(|| a.sememe.cmp(&b.sememe))
    });
    candidates.truncate(config.max_new);
    candidates
}

/// Inserts accepted perturbation candidates.  Each candidate's ledger is
/// re-derived at apply time so earlier insertions in the batch are
/// reflected; count shifts accumulate and are applied once at the end.
pub fn apply_perturbations(
    lexicon: &mut Lexicon,
    accepted: &[Candidate],
    sememe_bits: f64,
) -> usize {
    let mut count_shift: HashMap<WordId, f64> = HashMap::new();
    let mut inserted = 0usize;
    for candidate in accepted {
        let word = candidate.components[0];
        let Some(sememe) = candidate.sememe else {
            continue;
        };
        let Some(source) = lexicon.try_word(word) else {
            continue;
        };
        let toggled = SememeSet::from_ids([sememe]);
        let sememes = source.sememes.symmetric_difference(&toggled);
        let surface = source.surface.clone();
        if lexicon.find(&surface, &sememes).is_some() {
            continue;
        }
        let Some(delta) =
            estimate_perturb_delta(lexicon, word, sememe, candidate.estimated_count, sememe_bits)
        else {
            continue;
        };
        let bound = Bound {
            surface_len: surface.len(),
            sememe_count: sememes.len(),
        };
        let Some((rep_words, _)) = em::viterbi(lexicon, &surface, Some(bound)) else {
            continue;
        };
        let Ok(id) = lexicon.insert(&surface, sememes, candidate.estimated_count, f64::ln(1e-9))
        else {
            continue;
        };
        lexicon.word_mut(id).rep = Some(Representation::from_words(rep_words));
        for &(w, old, new) in &delta.ledger.changed {
            *count_shift.entry(w).or_insert(0.0) += new - old;
        }
        inserted += 1;
    }
    if inserted > 0 {
        let mut shifts: Vec<(WordId, f64)> = count_shift.into_iter().collect();
        shifts.sort_unstable_by_key(|&(w, _)| w);
        for (w, shift) in shifts {
            let word = lexicon.word_mut(w);
            word.count = (word.count + shift).max(0.0);
        }
        lexicon.set_probs_from_counts();
    }
    inserted
}

/// Builds deletion candidates under the joint model's extended price: every
/// non-terminal whose removal (count ledger plus inherited toggle charges)
/// is estimated to save bits, sorted most-saving first.
pub fn propose_deletions_meaning(lexicon: &Lexicon, sememe_bits: f64) -> Vec<Candidate> {
    let targets: Vec<WordId> = lexicon
        .iter()
        .filter(|w| !w.is_terminal)
        .map(|w| w.id)
        .collect();
    let mut accepted: Vec<Candidate> = targets
        .into_par_iter()
        .filter_map(|id| {
            let bits = estimate_delete_delta_meaning(lexicon, id, sememe_bits)?;
            if bits >= 0.0 {
                return None;
            }
            let word = lexicon.word(id);
            let rep = em::viterbi(lexicon, &word.surface, Some(Bound::of(word)))
                .map(|(words, _)| words)
                .unwrap_or_default();
            Some(Candidate {
                kind: CandidateKind::Delete,
                components: vec![id],
                sememe: None,
                estimated_count: word.count,
                delta_bits: bits,
                rep_at_estimate: rep,
            })
        })
        .collect();
    accepted.sort_unstable_by(|a, b| {
        a.delta_bits
            .total_cmp(&b.delta_bits)
            .then_with(|| a.components.cmp(&b.components))
    });
    accepted
}

// ---------------------------------------------------------------------------
// Prediction and scoring
// ---------------------------------------------------------------------------

/// Predicts the meaning of a raw byte string: the union of the meanings of
/// the words in its best parse.  Empty when unparseable (which cannot
/// happen while all single-byte words remain in the lexicon).
pub fn predict_meaning(lexicon: &Lexicon, symbols: &[u8]) -> SememeSet {
    match em::viterbi(lexicon, symbols, None) {
        Some((words, _)) => {
            let mut out = SememeSet::new();
            for w in words {
                out.union_with(&lexicon.word(w).sememes);
            }
            out
        }
        None => SememeSet::new(),
    }
}

/// Micro-averaged precision and recall of predicted meanings against gold
/// meanings.  Precision is `None` when nothing was predicted; recall is 0
/// (not `None`) when gold sememes exist but none were found.
pub fn sememe_scores(gold: &[SememeSet], predicted: &[SememeSet]) -> (Option<f64>, Option<f64>) {
    assert_eq!(gold.len(), predicted.len(), "score inputs must align");
    let mut correct = 0usize;
    let mut predicted_total = 0usize;
    let mut gold_total = 0usize;
    for (g, p) in gold.iter().zip(predicted) {
        predicted_total += p.len();
        gold_total += g.len();
        correct += p.iter().filter(|&s| g.contains(s)).count();
    }
    let precision = (predicted_total > 0).then(|| correct as f64 / predicted_total as f64);
    let recall = (gold_total > 0).then(|| correct as f64 / gold_total as f64);
    (precision, recall)
}

// ---------------------------------------------------------------------------
// Staged trainer
// ---------------------------------------------------------------------------

/// Configuration for the staged sound-then-meaning trainer.
#[derive(Clone, Debug)]
pub struct MeaningConfig {
    /// Bits charged per sememe toggle.
    pub sememe_bits: f64,
    /// Surface-only iterations that seed the lexicon from sound alone.
    pub seed_iterations: u32,
    /// Joint-model iterations that follow.
    pub meaning_iterations: u32,
    /// Shared structure-search settings (caps, pruning, EM step counts).
    pub refine: RefineConfig,
}

impl Default for MeaningConfig {
    fn default() -> Self {
        MeaningConfig {
            sememe_bits: DEFAULT_SEMEME_BITS,
            seed_iterations: 10,
            meaning_iterations: 8,
            refine: RefineConfig::default(),
        }
    }
}

/// Learns a lexicon with meanings.  Stage one ignores the hypotheses and
/// learns surface structure alone; stage two switches the word admission
/// order to (surface length, meaning size) and alternates joint-model EM
/// with pair creation, sememe perturbation, and deletion.
pub fn learn_meanings(mcorpus: &MeaningCorpus, config: &MeaningConfig) -> Lexicon {
    // Stage one: surface structure from sound alone.
    let mut seed_config = config.refine.clone();
    seed_config.iterations = config.seed_iterations;
    let mut lexicon = refine::learn(&mcorpus.corpus, &seed_config);

    // Stage two: the joint model.
    lexicon.ordering = OrderingMode::Meaning;
    lexicon.sememe_names = mcorpus.sememes.clone();
    let sememe_bits = config.sememe_bits;
    let refine_config = &config.refine;
    for iteration in 0..config.meaning_iterations {
        let (_, record) = meaning_em_iterate(
            &mut lexicon,
            mcorpus,
            sememe_bits,
            refine_config.em_steps_add,
            Some(refine_config.record_config()),
        );
        let record = record.expect("record requested");

        let additions = refine::propose_additions(&lexicon, &record.em, refine_config);
        let added = refine::apply_additions(&mut lexicon, &additions);

        let perturbations =
            propose_sememe_perturbations(&lexicon, &record, sememe_bits, refine_config);
        let perturbed = apply_perturbations(&mut lexicon, &perturbations, sememe_bits);

        meaning_em_iterate(
            &mut lexicon,
            mcorpus,
            sememe_bits,
            refine_config.em_steps_delete,
            None,
        );

        let deletions = propose_deletions_meaning(&lexicon, sememe_bits);
        let deleted = refine::apply_deletions(&mut lexicon, &deletions);

        // End-of-iteration measurement at the post-deletion probabilities.
        let (report, _) = meaning_em_iterate(&mut lexicon, mcorpus, sememe_bits, 0, None);
        log::info!(
            "meaning iteration {}: {} words (+{} pairs, +{} perturbed, -{} deleted), {:.1} bits",
            iteration + 1,
            lexicon.len(),
            added,
            perturbed,
            deleted,
            report.total_bits()
        );
        if let Some(min_changes) = refine_config.early_stop_min_changes {
            if added + perturbed + deleted < min_changes {
                break;
            }
        }
    }
    // Final pass: leave counts, spellings, and probabilities mutually
    // consistent without moving the probabilities the loop just measured.
    meaning_em_iterate(
        &mut lexicon,
        mcorpus,
        sememe_bits,
        0,
        Some(RecordConfig {
            min_cooccurrence: u32::MAX,
            ..RecordConfig::default()
        }),
    );
    lexicon
}

// ---------------------------------------------------------------------------
