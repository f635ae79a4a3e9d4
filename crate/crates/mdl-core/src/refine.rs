//! Structural refinement of the lexicon.
//!
//! New words are proposed from adjacent pairs (optionally triples) in the
//! best parses; existing words are proposed for deletion. Each change is
//! evaluated in isolation by estimating how the affected words' expected
//! counts would move and pricing that count ledger as a description-length
//! difference; changes estimated to save bits are applied. The outer
//! [`learn`] loop alternates probability re-estimation with these two
//! structural phases for a fixed number of iterations.
//!
//! The delta of a count ledger prices only the words whose counts change.
//! With C the grand total before the change, ΔC its change, and H the
//! untouched words, the exact difference of Σ −c·log₂(c/C) factorizes as
//!
//! Δ = (C − Σ_{w∉H} c(w))·log₂((C+ΔC)/C)
//!     − Σ_{w∉H} c*(w)·log₂(c*(w)/(C+ΔC)) + Σ_{w∉H} c(w)·log₂(c(w)/C),
//!
//! so the cost is proportional to the ledger, not the lexicon.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::em::{self, Chart, EmRecord, RecordConfig};
use crate::lexicon::{Bound, Lexicon, Representation, SememeId, SememeSet, WordId};

/// What kind of structural change a candidate proposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateKind {
    /// Create a word spelled by two adjacent words.
    AddPair,
    /// Create a word spelled by three adjacent words.
    AddTriple,
    /// Remove a non-terminal word.
    Delete,
    /// Toggle one sememe on a word's meaning (used by the meaning model).
    AddSememePerturb,
}

/// One proposed change, with its estimated effect.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub kind: CandidateKind,
    /// The words involved: components of an addition, or the single target
    /// of a deletion/perturbation.
    pub components: Vec<WordId>,
    /// The sememe toggled by a perturbation.
    pub sememe: Option<SememeId>,
    /// Estimated count of the created word (additions) or of the target at
    /// estimation time (deletions).
    pub estimated_count: f64,
    /// Estimated description-length change in bits (negative saves).
    /// For additions this includes the deletion lookahead on components.
    pub delta_bits: f64,
    /// Deletions: the target's best parse when the estimate was made; the
    /// deletion is skipped if the parse has changed by application time.
    pub rep_at_estimate: Vec<WordId>,
}

/// The count changes a candidate is estimated to cause. Words absent from
/// `changed` are assumed to keep their counts (the locality premise).
#[derive(Clone, Debug, Default)]
pub struct DeltaLedger {
    /// (word, count before, estimated count after).
    pub changed: Vec<(WordId, f64, f64)>,
    /// Count of a word being created, which has no id yet.
    pub created: Option<f64>,
    /// Grand total of all counts before the change.
    pub total_before: f64,
}

impl DeltaLedger {
    fn new(total_before: f64) -> Self {
        DeltaLedger {
            total_before,
            ..DeltaLedger::default()
        }
    }

    /// Net change of the grand total.
    pub fn delta_c(&self) -> f64 {
        let moved: f64 = self.changed.iter().map(|&(_, old, new)| new - old).sum();
        moved + self.created.unwrap_or(0.0)
    }

    /// Description-length change in bits of re-coding every count at its
    /// new probability, exact under the locality premise.
    pub fn delta_bits(&self) -> f64 {
        let c = self.total_before;
        let c_star = c + self.delta_c();
        if c <= 0.0 || c_star <= 0.0 {
            return f64::INFINITY;
        }
        let s_old: f64 = self.changed.iter().map(|&(_, old, _)| old).sum();
        let mut delta = (c - s_old).max(0.0) * (c_star / c).log2();
        let mut price = |count: f64, total: f64, sign: f64| {
            if count > 0.0 {
                delta += sign * count * (count / total).log2();
            }
        };
        for &(_, old, new) in &self.changed {
            price(new, c_star, -1.0);
            price(old, c, 1.0);
        }
        if let Some(created) = self.created {
            price(created, c_star, -1.0);
        }
        delta
    }
}

/// Knobs of the refinement search.
#[derive(Clone, Debug)]
pub struct RefineConfig {
    /// Outer iterations of the learning loop.
    pub iterations: u32,
    /// At most this many additions are applied per iteration.
    pub max_new: usize,
    /// Consider word triples as well as pairs.
    pub enable_triples: bool,
    /// Probability re-estimation steps before the addition phase.
    pub em_steps_add: usize,
    /// Probability re-estimation steps before the deletion phase.
    pub em_steps_delete: usize,
    /// Pairs must co-occur this often in best parses to become candidates.
    pub pair_prune_min: u32,
    /// Stop early when an iteration applies fewer total changes than this.
    pub early_stop_min_changes: Option<usize>,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            iterations: 15,
            max_new: 20_000,
            enable_triples: false,
            em_steps_add: 2,
            em_steps_delete: 3,
            pair_prune_min: 2,
            early_stop_min_changes: None,
        }
    }
}

impl RefineConfig {
    pub(crate) fn record_config(&self) -> RecordConfig {
        RecordConfig {
            min_cooccurrence: self.pair_prune_min,
            triples: self.enable_triples,
            ..RecordConfig::default()
        }
    }
}

/// A possibly-overlaid view of the words' expected counts, so deletion
/// savings can be priced against hypothetical post-addition counts.
pub(crate) struct CountsView<'a> {
    pub(crate) lexicon: &'a Lexicon,
    pub(crate) overlay: Option<&'a HashMap<WordId, f64>>,
    pub(crate) total: f64,
}

impl<'a> CountsView<'a> {
    pub(crate) fn current(lexicon: &'a Lexicon) -> Self {
        CountsView {
            lexicon,
            overlay: None,
            total: lexicon.total_count,
        }
    }

    pub(crate) fn get(&self, id: WordId) -> f64 {
        if let Some(overlay) = self.overlay {
            if let Some(&c) = overlay.get(&id) {
                return c;
            }
        }
        self.lexicon.word(id).count
    }
}

/// Expected count of each word inside the parses of `symbols` under the
/// bound: c(w ∈ surface) = Σ over spans of α_a · p(w) · β_b / p(surface).
/// `None` when the surface has no parse under the bound.
fn span_counts(
    lexicon: &Lexicon,
    symbols: &[u8],
    bound: Bound,
) -> Option<HashMap<WordId, f64>> {
    let chart = Chart::compute(lexicon, symbols, Some(bound));
    let ln_p = chart.ln_prob();
    if ln_p == f64::NEG_INFINITY {
        return None;
    }
    let mut out: HashMap<WordId, f64> = HashMap::new();
    for i in 1..=symbols.len() {
        let ln_beta_i = chart.ln_beta[i];
        if ln_beta_i == f64::NEG_INFINITY {
            continue;
        }
        lexicon.suffix_matches(symbols, i, |id, len| {
            let ln_alpha_j = chart.ln_alpha[i - len];
            if ln_alpha_j != f64::NEG_INFINITY && lexicon.admits(lexicon.word(id), bound) {
                let posterior = (ln_alpha_j + lexicon.ln_prob(id) + ln_beta_i - ln_p).exp();
                *out.entry(id).or_insert(0.0) += posterior;
            }
        });
    }
    Some(out)
}

fn concat_surfaces(lexicon: &Lexicon, components: &[WordId]) -> Vec<u8> {
    let mut surface = Vec::new();
    for &w in components {
        surface.extend_from_slice(&lexicon.word(w).surface);
    }
    surface
}

fn union_sememes(lexicon: &Lexicon, components: &[WordId]) -> SememeSet {
    let mut sememes = SememeSet::new();
    for &w in components {
        sememes = sememes.union(&lexicon.word(w).sememes);
    }
    sememes
}

/// The estimated effect of creating a word from `components`.
#[derive(Clone, Debug)]
pub struct AddDelta {
    /// Count ledger of the addition itself.
    pub ledger: DeltaLedger,
    /// Δ bits of the addition alone.
    pub base_bits: f64,
    /// Σ min(Δᵢ, 0) over the estimated follow-up deletions of the new
    /// word's components. An addition often strands a component whose only
    /// remaining use is spelling the new word; the deletion phase will
    /// reclaim those bits, so they count toward acceptance.
    pub lookahead_bits: f64,
}

impl AddDelta {
    pub fn total_bits(&self) -> f64 {
        self.base_bits + self.lookahead_bits
    }
}

/// Estimates the description-length change of adding the word spelled by
/// `components`, whose expected usage is `new_count`. `None` when the new
/// surface cannot be parsed from strictly smaller words (it would have no
/// representation).
///
/// Count movements, with W the new word and c(w∈W) the expected count of w
/// inside W's parses: W itself appears `new_count` times; each use of W
/// stops spelling out w (−new_count·c(w∈W)); W's own entry must be spelled
/// once (+c(w∈W)).
pub fn estimate_add_delta(
    lexicon: &Lexicon,
    components: &[WordId],
    new_count: f64,
) -> Option<AddDelta> {
    let surface = concat_surfaces(lexicon, components);
    let sememes = union_sememes(lexicon, components);
    let bound = Bound {
        surface_len: surface.len(),
        sememe_count: sememes.len(),
    };
    let inside = span_counts(lexicon, &surface, bound)?;

    let mut ledger = DeltaLedger::new(lexicon.total_count);
    ledger.created = Some(new_count);
    let mut entries: Vec<(WordId, f64)> = inside.into_iter().collect();
    entries.sort_unstable_by_key(|&(id, _)| id);
    for (w, c_in) in entries {
        let old = lexicon.word(w).count;
        let new = (old + (1.0 - new_count) * c_in).max(0.0);
        ledger.changed.push((w, old, new));
    }
    let base_bits = ledger.delta_bits();

    // Follow-up deletions of the components, priced against the post-add
    // counts.
    let overlay: HashMap<WordId, f64> = ledger
        .changed
        .iter()
        .map(|&(w, _, new)| (w, new))
        .collect();
    let view = CountsView {
        lexicon,
        overlay: Some(&overlay),
        total: lexicon.total_count + ledger.delta_c(),
    };
    let mut lookahead_bits = 0.0;
    let mut seen: Vec<WordId> = Vec::new();
    for &w in components {
        if lexicon.word(w).is_terminal || seen.contains(&w) {
            continue;
        }
        seen.push(w);
        if let Some(ledger) = delete_ledger(lexicon, w, &view) {
            lookahead_bits += ledger.delta_bits().min(0.0);
        }
    }

    Some(AddDelta {
        ledger,
        base_bits,
        lookahead_bits,
    })
}

/// Count ledger for deleting `target` under the given counts: every use of
/// the word is replaced by its spell-out (+c_target·c(w∈target)), and its
/// own lexicon entry no longer needs spelling (−c(w∈target)).
fn delete_ledger(lexicon: &Lexicon, target: WordId, counts: &CountsView) -> Option<DeltaLedger> {
    let word = lexicon.word(target);
    debug_assert!(!word.is_terminal);
    let c_target = counts.get(target);
    let inside = span_counts(lexicon, &word.surface, Bound::of(word))?;

    let mut ledger = DeltaLedger::new(counts.total);
    ledger.changed.push((target, c_target, 0.0));
    let mut entries: Vec<(WordId, f64)> = inside.into_iter().collect();
    entries.sort_unstable_by_key(|&(id, _)| id);
    for (w, c_in) in entries {
        let old = counts.get(w);
        let new = (old + (c_target - 1.0) * c_in).max(0.0);
        ledger.changed.push((w, old, new));
    }
    Some(ledger)
}

/// Estimates the description-length change of deleting a non-terminal word
/// under the lexicon's current counts.
pub fn estimate_delete_delta(lexicon: &Lexicon, target: WordId) -> Option<(f64, DeltaLedger)> {
    let ledger = delete_ledger(lexicon, target, &CountsView::current(lexicon))?;
    let bits = ledger.delta_bits();
    Some((bits, ledger))
}

/// Builds the addition candidates an analysis record supports: every
/// adjacent pair (and triple, when enabled) co-occurring at least
/// `pair_prune_min` times in best parses, estimated independently, filtered
/// to estimated savings, deduplicated per surface, and capped at `max_new`
/// best-first.
pub fn propose_additions(
    lexicon: &Lexicon,
    record: &EmRecord,
    config: &RefineConfig,
) -> Vec<Candidate> {
    let mut proposals: Vec<(CandidateKind, Vec<WordId>, f64)> = Vec::new();

    let mut pairs: Vec<((WordId, WordId), u32)> =
        record.viterbi_pairs.iter().map(|(&k, &n)| (k, n)).collect();
    pairs.sort_unstable_by_key(|&(k, _)| k);
    for ((w1, w2), n) in pairs {
        if n < config.pair_prune_min {
            continue;
        }
        let count = record
            .pair_counts
            .get(&(w1, w2))
            .copied()
            .unwrap_or(n as f64);
        proposals.push((CandidateKind::AddPair, vec![w1, w2], count));
    }

    if config.enable_triples {
        let mut triples: Vec<((WordId, WordId, WordId), u32)> = record
            .viterbi_triples
            .iter()
            .map(|(&k, &n)| (k, n))
            .collect();
        triples.sort_unstable_by_key(|&(k, _)| k);
        for ((w1, w2, w3), n) in triples {
            if n < config.pair_prune_min {
                continue;
            }
            // Tightest adjacency bound available for a three-way count.
            let left = record.pair_counts.get(&(w1, w2)).copied();
            let right = record.pair_counts.get(&(w2, w3)).copied();
            let count = match (left, right) {
                (Some(l), Some(r)) => l.min(r),
                _ => n as f64,
            };
            proposals.push((CandidateKind::AddTriple, vec![w1, w2, w3], count));
        }
    }

    // Estimate every proposal in isolation, in parallel.
    let estimated: Vec<Candidate> = proposals
        .into_par_iter()
        .filter_map(|(kind, components, count)| {
            let surface = concat_surfaces(lexicon, &components);
            let sememes = union_sememes(lexicon, &components);
            if lexicon.find(&surface, &sememes).is_some() {
                return None;
            }
            let estimate = estimate_add_delta(lexicon, &components, count)?;
            if estimate.total_bits() >= 0.0 {
                return None;
            }
            Some(Candidate {
                kind,
                components,
                sememe: None,
                estimated_count: count,
                delta_bits: estimate.total_bits(),
                rep_at_estimate: Vec::new(),
            })
        })
        .collect();

    // Several component splits can spell the same new word; keep the one
    // promising the most savings.
    let mut best_for_surface: HashMap<(Vec<u8>, SememeSet), Candidate> = HashMap::new();
    for candidate in estimated {
        let key = (
            concat_surfaces(lexicon, &candidate.components),
            union_sememes(lexicon, &candidate.components),
        );
        match best_for_surface.get_mut(&key) {
            Some(kept) if kept.delta_bits <= candidate.delta_bits => {}
            slot => match slot {
                Some(kept) => *kept = candidate,
                None => {
                    best_for_surface.insert(key, candidate);
                }
            },
        }
    }
    let mut accepted: Vec<Candidate> = best_for_surface.into_values().collect();
    accepted.sort_unstable_by(|a, b| {
        a.delta_bits
            .total_cmp(&b.delta_bits)
            .then_with(|| a.components.cmp(&b.components))
    });
    accepted.truncate(config.max_new);
    accepted
}

/// Inserts the accepted additions: each new word gets its estimated count
/// and its components as the stored representation, affected counts move
/// per the candidates' ledgers (applied cumulatively), and probabilities
/// are renormalized from the updated counts.
pub fn apply_additions(lexicon: &mut Lexicon, accepted: &[Candidate]) -> usize {
    if accepted.is_empty() {
        return 0;
    }
    let mut count_shift: HashMap<WordId, f64> = HashMap::new();
    let mut inserted = 0usize;
    for candidate in accepted {
        let surface = concat_surfaces(lexicon, &candidate.components);
        let sememes = union_sememes(lexicon, &candidate.components);
        let estimate = match estimate_shift(lexicon, candidate) {
            Some(e) => e,
            None => continue,
        };
        let id = lexicon
            .insert(&surface, sememes, candidate.estimated_count, f64::ln(1e-9))
            .expect("addition candidates are deduplicated against the lexicon");
        lexicon.word_mut(id).rep = Some(Representation::from_words(candidate.components.clone()));
        for (w, shift) in estimate {
            *count_shift.entry(w).or_insert(0.0) += shift;
        }
        inserted += 1;
    }
    let mut shifts: Vec<(WordId, f64)> = count_shift.into_iter().collect();
    shifts.sort_unstable_by_key(|&(w, _)| w);
    for (w, shift) in shifts {
        let word = lexicon.word_mut(w);
        word.count = (word.count + shift).max(0.0);
    }
    lexicon.set_probs_from_counts();
    inserted
}

/// The candidate's ledger as additive count shifts, re-derived at
/// application time (cheap, and robust to earlier insertions in the batch).
fn estimate_shift(lexicon: &Lexicon, candidate: &Candidate) -> Option<Vec<(WordId, f64)>> {
    let estimate = estimate_add_delta(lexicon, &candidate.components, candidate.estimated_count)?;
    Some(
        estimate
            .ledger
            .changed
            .iter()
            .map(|&(w, old, new)| (w, new - old))
            .collect(),
    )
}

/// Builds deletion candidates: every non-terminal whose removal is
/// estimated to save bits, sorted most-saving first.
pub fn propose_deletions(lexicon: &Lexicon, _config: &RefineConfig) -> Vec<Candidate> {
    let targets: Vec<WordId> = lexicon
        .iter()
        .filter(|w| !w.is_terminal)
        .map(|w| w.id)
        .collect();
    let mut accepted: Vec<Candidate> = targets
        .into_par_iter()
        .filter_map(|id| {
            let (bits, _) = estimate_delete_delta(lexicon, id)?;
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

/// Applies deletions sequentially, most-saving first. Earlier deletions can
/// invalidate the assumptions behind later ones — a family of redundant
/// words must not all disappear when removing one of them suffices — so
/// each target's surface is re-parsed first, and the deletion is skipped if
/// its best parse differs from the one the estimate saw.
pub fn apply_deletions(lexicon: &mut Lexicon, accepted: &[Candidate]) -> usize {
    let mut removed = 0usize;
    for candidate in accepted {
        let id = candidate.components[0];
        let word = match lexicon.try_word(id) {
            Some(word) => word,
            None => continue,
        };
        let rep_now = em::viterbi(lexicon, &word.surface, Some(Bound::of(word)))
            .map(|(words, _)| words)
            .unwrap_or_default();
        if rep_now != candidate.rep_at_estimate {
            continue;
        }
        lexicon
            .remove(id)
            .expect("deletion candidates are live non-terminals");
        removed += 1;
    }
    if removed > 0 {
        lexicon.set_probs_from_counts();
    }
    removed
}

/// End-of-iteration snapshot emitted by [`learn_traced`].
#[derive(Clone, Debug)]
pub struct IterationStats {
    pub iteration: u32,
    /// Lexicon size after the iteration's deletions.
    pub words: usize,
    pub added: usize,
    pub deleted: usize,
    /// Description length measured after the full iteration.
    pub report: em::DlReport,
}

/// Learns a lexicon from raw evidence: starting from the uniform terminal
/// model, each iteration re-estimates probabilities, adds words built from
/// adjacent pairs in best parses, re-estimates again, and deletes words
/// whose removal saves bits. A final analysis pass leaves counts and stored
/// representations consistent with the returned model.
pub fn learn(corpus: &Corpus, config: &RefineConfig) -> Lexicon {
    learn_traced(corpus, config).0
}

/// [`learn`], also returning the per-iteration description-length trace.
pub fn learn_traced(corpus: &Corpus, config: &RefineConfig) -> (Lexicon, Vec<IterationStats>) {
    let mut lexicon = Lexicon::init_terminals();
    let mut trace = Vec::new();
    for iteration in 1..=config.iterations {
        let (_, record) =
            em::em_iterate(&mut lexicon, corpus, config.em_steps_add, Some(config.record_config()));
        let record = record.expect("recording was requested");
        let additions = propose_additions(&lexicon, &record, config);
        let added = apply_additions(&mut lexicon, &additions);

        em::em_iterate(&mut lexicon, corpus, config.em_steps_delete, None);
        let deletions = propose_deletions(&lexicon, config);
        let deleted = apply_deletions(&mut lexicon, &deletions);

        // Analysis-only pass: description length of the settled iteration.
        let (report, _) = em::em_iterate(&mut lexicon, corpus, 0, None);
        log::info!(
            "iteration {iteration}: {} words (+{added} -{deleted}), {:.0} bits total, {:.0} evidence, {:.3} bits/char",
            lexicon.len(),
            report.total_bits(),
            report.evidence_bits,
            report.bits_per_symbol(),
        );
        trace.push(IterationStats {
            iteration,
            words: lexicon.len(),
            added,
            deleted,
            report,
        });
        if let Some(min) = config.early_stop_min_changes {
            if added + deleted < min {
                log::info!("stopping early after iteration {iteration}: {} changes", added + deleted);
                break;
            }
        }
    }
    // Leave the model self-consistent without moving probabilities: final
    // expected counts and a stored best parse for every word.
    em::em_iterate(
        &mut lexicon,
        corpus,
        0,
        Some(RecordConfig {
            min_cooccurrence: u32::MAX,
            ..RecordConfig::default()
        }),
    );
    (lexicon, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::{combined_evidence, description_length};
    use approx::assert_relative_eq;

    fn counts_lexicon(words: &[(&[u8], f64)], terminal_counts: &[(u8, f64)]) -> Lexicon {
        let mut lexicon = Lexicon::init_terminals();
        for &(byte, count) in terminal_counts {
            lexicon.word_mut(byte as WordId).count = count;
        }
        for &(surface, count) in words {
            let id = lexicon
                .insert(surface, SememeSet::new(), count, 0.0)
                .unwrap();
            lexicon.word_mut(id).count = count;
        }
        lexicon.set_probs_from_counts();
        lexicon
    }

    /// The incremental formula must equal the full Σ −c·log₂ p difference
    /// when exactly the ledgered words change counts.
    #[test]
    fn ledger_delta_matches_full_recomputation() {
        let full_bits = |counts: &[f64]| -> f64 {
            let total: f64 = counts.iter().sum();
            counts
                .iter()
                .filter(|&&c| c > 0.0)
                .map(|&c| -c * (c / total).log2())
                .sum()
        };
        // Hand-frozen counts: five words, two change, one is created.
        let before = [40.0, 25.0, 20.0, 10.0, 5.0];
        let after = [40.0, 25.0, 3.0, 10.0, 1.0, 12.0];
        let ledger = DeltaLedger {
            changed: vec![(2, 20.0, 3.0), (4, 5.0, 1.0)],
            created: Some(12.0),
            total_before: before.iter().sum(),
        };
        let expected = full_bits(&after) - full_bits(&before);
        assert_relative_eq!(ledger.delta_bits(), expected, epsilon = 1e-9);
        assert_relative_eq!(ledger.delta_c(), -9.0, epsilon = 1e-12);

        // A deletion ledger (count moves to zero) must also match.
        let before = [40.0, 25.0, 20.0];
        let after = [40.0, 45.0, 0.0];
        let ledger = DeltaLedger {
            changed: vec![(1, 25.0, 45.0), (2, 20.0, 0.0)],
            created: None,
            total_before: before.iter().sum(),
        };
        let expected = full_bits(&after) - full_bits(&before);
        assert_relative_eq!(ledger.delta_bits(), expected, epsilon = 1e-9);
    }

    #[test]
    fn projected_count_zero_is_never_accepted() {
        let lexicon = counts_lexicon(&[], &[(b'a', 50.0), (b'b', 50.0)]);
        let estimate =
            estimate_add_delta(&lexicon, &[b'a' as WordId, b'b' as WordId], 0.0).unwrap();
        assert!(estimate.base_bits >= 0.0, "Δ = {}", estimate.base_bits);
    }

    #[test]
    fn repeated_pair_is_worth_adding() {
        let lexicon = counts_lexicon(&[], &[(b'a', 50.0), (b'b', 50.0)]);
        let estimate =
            estimate_add_delta(&lexicon, &[b'a' as WordId, b'b' as WordId], 50.0).unwrap();
        assert!(estimate.base_bits < 0.0, "Δ = {}", estimate.base_bits);
        assert!(estimate.total_bits() < 0.0);
    }

    #[test]
    fn dead_parameter_is_deleted() {
        // "xy" carries a count two orders below its components' use.
        let lexicon = counts_lexicon(&[(b"xy", 0.01)], &[(b'x', 50.0), (b'y', 50.0)]);
        let xy = lexicon.find(b"xy", &SememeSet::new()).unwrap();
        let (bits, ledger) = estimate_delete_delta(&lexicon, xy).unwrap();
        assert!(bits < 0.0, "Δ = {bits}");
        assert_eq!(ledger.changed[0], (xy, 0.01, 0.0));
    }

    #[test]
    fn heavily_used_word_is_kept() {
        let lexicon = counts_lexicon(&[(b"the", 500.0)], &[(b't', 20.0), (b'h', 20.0), (b'e', 20.0)]);
        let the = lexicon.find(b"the", &SememeSet::new()).unwrap();
        let (bits, _) = estimate_delete_delta(&lexicon, the).unwrap();
        assert!(bits > 0.0, "Δ = {bits}");
    }

    /// Deleting a word and re-adding it at the same count are exact
    /// opposites when the addition is priced against the post-deletion
    /// counts.
    #[test]
    fn delete_then_add_round_trips() {
        let lexicon = counts_lexicon(&[(b"ab", 30.0)], &[(b'a', 40.0), (b'b', 40.0)]);
        let ab = lexicon.find(b"ab", &SememeSet::new()).unwrap();
        let (delete_bits, ledger) = estimate_delete_delta(&lexicon, ab).unwrap();

        // Rebuild the addition ledger against the post-deletion counts.
        let overlay: HashMap<WordId, f64> =
            ledger.changed.iter().map(|&(w, _, new)| (w, new)).collect();
        let view = CountsView {
            lexicon: &lexicon,
            overlay: Some(&overlay),
            total: lexicon.total_count + ledger.delta_c(),
        };
        let inside = span_counts(&lexicon, b"ab", Bound::of(lexicon.word(ab))).unwrap();
        let mut add_ledger = DeltaLedger::new(view.total);
        add_ledger.created = Some(30.0);
        let mut entries: Vec<(WordId, f64)> = inside.into_iter().collect();
        entries.sort_unstable_by_key(|&(id, _)| id);
        for (w, c_in) in entries {
            let old = view.get(w);
            add_ledger
                .changed
                .push((w, old, (old + (1.0 - 30.0) * c_in).max(0.0)));
        }
        assert_relative_eq!(add_ledger.delta_bits(), -delete_bits, epsilon = 1e-6);
    }

    #[test]
    fn learner_finds_the_repeated_word() {
        let corpus = Corpus::from_utterances(vec![b"ab".to_vec(); 50]);
        let config = RefineConfig {
            iterations: 3,
            ..RefineConfig::default()
        };
        let lexicon = learn(&corpus, &config);
        let ab = lexicon.find(b"ab", &SememeSet::new());
        assert!(ab.is_some(), "learner should have created \"ab\"");
        let (words, _) = em::viterbi(&lexicon, b"ab", None).unwrap();
        assert_eq!(words, vec![ab.unwrap()]);

        // The refined model describes the data in fewer bits than the
        // terminal-only baseline.
        let baseline = {
            let mut terminals = Lexicon::init_terminals();
            let tasks = combined_evidence(&corpus, &terminals);
            let counts = em::expected_counts(&terminals, &tasks);
            em::maximize(&mut terminals, &counts);
            let tasks = combined_evidence(&corpus, &terminals);
            description_length(&terminals, &tasks).total_bits()
        };
        let tasks = combined_evidence(&corpus, &lexicon);
        let refined = description_length(&lexicon, &tasks).total_bits();
        assert!(
            refined < baseline,
            "refined {refined:.1} bits vs baseline {baseline:.1} bits"
        );
    }

    /// The estimate's verdict on the canonical repeated-pair corpus is
    /// confirmed by exact description-length recomputation: accepting "ab"
    /// must lower the measured total.
    #[test]
    fn accepted_pair_lowers_recomputed_description_length() {
        let corpus = Corpus::from_utterances(vec![b"abababab".to_vec(); 4]);
        let mut lexicon = Lexicon::init_terminals();
        let config = RefineConfig::default();
        let (before, record) =
            em::em_iterate(&mut lexicon, &corpus, 2, Some(config.record_config()));
        let record = record.unwrap();

        let candidates = propose_additions(&lexicon, &record, &config);
        let ab = candidates
            .iter()
            .find(|c| concat_surfaces(&lexicon, &c.components) == b"ab")
            .expect("\"ab\" must be proposed");
        assert!(ab.delta_bits < 0.0, "estimate Δ = {}", ab.delta_bits);

        apply_additions(&mut lexicon, std::slice::from_ref(ab));
        let (after, _) = em::em_iterate(&mut lexicon, &corpus, 2, None);
        let realized = after.total_bits() - before.total_bits();
        assert!(
            realized < 0.0,
            "recomputed DL must fall: {} -> {}",
            before.total_bits(),
            after.total_bits()
        );
        // Soft prediction-quality diagnostic, tracked but not asserted: the
        // estimate prices only the evidence recoding, while the realized
        // change also reflects EM settling.
        println!(
            "estimated {:.1} bits, realized {realized:.1} bits",
            ab.delta_bits
        );
    }

    /// Additions may transiently raise the description length, but each
    /// full add+delete iteration must end at or below the previous
    /// iteration's total, within a 0.5% slack.
    #[test]
    fn iterations_never_raise_description_length() {
        let sentences: &[&[u8]] = &[
            b"thedogchasedthecat",
            b"thecatchasedthedog",
            b"thedogatethebone",
            b"thecatatethefish",
            b"adogchasedafish",
            b"acatatethebone",
            b"thedogandthecat",
            b"aboneandafish",
        ];
        let mut utterances = Vec::new();
        for _ in 0..3 {
            utterances.extend(sentences.iter().map(|s| s.to_vec()));
        }
        let corpus = Corpus::from_utterances(utterances);
        let config = RefineConfig {
            iterations: 8,
            ..RefineConfig::default()
        };
        let (_, trace) = learn_traced(&corpus, &config);
        assert_eq!(trace.len(), 8);
        for pair in trace.windows(2) {
            let (prev, next) = (pair[0].report.total_bits(), pair[1].report.total_bits());
            assert!(
                next <= prev * 1.005,
                "iteration {} rose from {prev:.1} to {next:.1} bits",
                pair[1].iteration
            );
        }
    }

    #[test]
    fn zero_iterations_keeps_terminals_only() {
        let corpus = Corpus::from_utterances(vec![b"abcabc".to_vec(); 10]);
        let config = RefineConfig {
            iterations: 0,
            ..RefineConfig::default()
        };
        let lexicon = learn(&corpus, &config);
        assert_eq!(lexicon.nonterminal_count(), 0);
    }

    #[test]
    fn deletion_recheck_skips_word_whose_parse_changed() {
        // "abc" is best spelled through "ab"; once "ab" is deleted, the
        // estimate that priced deleting "abc" (which assumed the spell-out
        // [ab, c]) is stale, so "abc" must survive this sweep.
        let mut lexicon = Lexicon::init_terminals();
        for b in [b'a', b'b', b'c'] {
            lexicon.word_mut(b as WordId).count = 20.0;
        }
        let ab = lexicon.insert(b"ab", SememeSet::new(), 15.0, 0.0).unwrap();
        lexicon.word_mut(ab).count = 15.0;
        let abc = lexicon.insert(b"abc", SememeSet::new(), 0.5, 0.0).unwrap();
        lexicon.word_mut(abc).count = 0.5;
        lexicon.set_probs_from_counts();

        // p(ab) > p(a)·p(b), so "abc" parses as [ab, c] at estimate time.
        let rep_abc = em::viterbi(&lexicon, b"abc", Some(Bound::of(lexicon.word(abc))))
            .unwrap()
            .0;
        assert_eq!(rep_abc, vec![ab, b'c' as WordId]);
        let candidates = vec![
            Candidate {
                kind: CandidateKind::Delete,
                components: vec![ab],
                sememe: None,
                estimated_count: 15.0,
                delta_bits: -1.0,
                rep_at_estimate: vec![b'a' as WordId, b'b' as WordId],
            },
            Candidate {
                kind: CandidateKind::Delete,
                components: vec![abc],
                sememe: None,
                estimated_count: 0.5,
                delta_bits: -0.5,
                rep_at_estimate: rep_abc,
            },
        ];
        let removed = apply_deletions(&mut lexicon, &candidates);
        assert_eq!(removed, 1);
        assert!(lexicon.try_word(ab).is_none(), "\"ab\" should be deleted");
        assert!(
            lexicon.try_word(abc).is_some(),
            "\"abc\"'s spell-out changed mid-sweep, so it must be retained"
        );
    }

    #[test]
    fn proposals_respect_the_cooccurrence_cutoff_and_cap() {
        let corpus = Corpus::from_utterances(vec![
            b"abab".to_vec(),
            b"abab".to_vec(),
            b"cd".to_vec(), // pair (c,d) occurs only once overall
        ]);
        let mut lexicon = Lexicon::init_terminals();
        let config = RefineConfig::default();
        let (_, record) =
            em::em_iterate(&mut lexicon, &corpus, 1, Some(config.record_config()));
        let record = record.unwrap();
        let candidates = propose_additions(&lexicon, &record, &config);
        let surfaces: Vec<Vec<u8>> = candidates
            .iter()
            .map(|c| concat_surfaces(&lexicon, &c.components))
            .collect();
        assert!(
            !surfaces.contains(&b"cd".to_vec()),
            "single co-occurrence must not become a candidate"
        );
        assert!(surfaces.contains(&b"ab".to_vec()) || surfaces.contains(&b"ba".to_vec()));

        // An aggressive cap keeps only the best few.
        let capped = RefineConfig {
            max_new: 1,
            ..RefineConfig::default()
        };
        let candidates = propose_additions(&lexicon, &record, &capped);
        assert!(candidates.len() <= 1);
    }
}
