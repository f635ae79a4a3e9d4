//! Bit-exact dictionary compression.
//!
//! A corpus is written as one self-contained stream: canonical prefix-code
//! specifications, the terminal alphabet, every non-terminal word spelled as
//! a sequence of strictly smaller words, then the utterances as codeword
//! sequences. Because each word's components precede it in the consistency
//! ordering, the decoder can rebuild all surfaces and reproduce the corpus
//! byte-exactly.
//!
//! Stream layout (bit-packed, zero-padded to a byte at the end):
//!
//! 1. magic `MDL1`;
//! 2. word-code spec — Elias(max codeword length + 1), then for each length
//!    1..=max an Elias(count of codewords of that length + 1);
//! 3. representation-length code spec — same shape, and after each length's
//!    count the Elias-coded representation lengths themselves, in canonical
//!    order;
//! 4. terminal section — a 256-bit bitmap of used byte values, then the
//!    codeword of each used terminal in ascending byte order;
//! 5. for each non-terminal in decreasing-frequency order: the codeword of
//!    its representation length, then its components' codewords;
//! 6. Elias(utterance count + 1), then per utterance Elias(word count) and
//!    the word codewords.
//!
//! Codewords come from a canonical Huffman code over integer usage counts:
//! words sorted by (count descending, surface ascending) receive the sorted
//! codeword lengths, and codewords are assigned in increasing lexicographic
//! order, so encoder and decoder agree without transmitting ids. Counts are
//! Viterbi usage counts over the whole description (utterance parses plus
//! the representations of retained words); words with no remaining use are
//! pruned to a fixpoint before coding.
//!
//! Elias codes here are gamma codes (1 → `1`, 5 → `00101`); fields that can
//! legitimately be zero (the two max lengths, per-length codeword counts,
//! and the utterance count) are shifted by one before encoding.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::collections::HashMap;

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::em::viterbi;
use crate::lexicon::{Bound, Lexicon, WordId, ALPHABET_SIZE};

/// Stream magic bytes.
pub const MAGIC: &[u8; 4] = b"MDL1";

/// Sanity bounds enforced while decoding, so corrupted streams fail with an
/// error instead of exhausting memory. Honest streams sit far below all of
/// them.
const MAX_CODE_LEN: usize = 60;
const MAX_CODEWORDS: u64 = 1 << 24;
const MAX_REP_LEN: u64 = 1 << 20;
const MAX_SURFACE_LEN: usize = 1 << 26;

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("stream ended unexpectedly")]
    Truncated,
    #[error("stream does not start with the expected magic bytes")]
    BadMagic,
    #[error("invalid code specification: {0}")]
    BadCodeSpec(String),
    #[error("invalid codeword")]
    InvalidCodeword,
    #[error("cyclic word representation in stream")]
    CyclicRepresentation,
    #[error("word {0} has no representation; the lexicon was not finalized")]
    MissingRepresentation(WordId),
    #[error("value out of range: {0}")]
    Range(String),
}

/// Bit sink, MSB-first within each byte.
#[derive(Clone, Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    /// Bits already used in the final byte (0..8).
    filled: u32,
}

impl BitWriter {
    pub fn new() -> Self {
        BitWriter::default()
    }

    pub fn write_bit(&mut self, bit: bool) {
        if self.filled == 0 {
            self.bytes.push(0);
        }
        if bit {
            let last = self.bytes.last_mut().expect("pushed above");
            *last |= 1 << (7 - self.filled);
        }
        self.filled = (self.filled + 1) % 8;
    }

    /// Writes the low `n` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u64, n: u32) {
        debug_assert!(n <= 64);
        for i in (0..n).rev() {
            self.write_bit((value >> i) & 1 == 1);
        }
    }

    /// Elias gamma code of `n ≥ 1`: ⌊log₂ n⌋ zeros, then n in binary.
    pub fn write_elias(&mut self, n: u64) {
        assert!(n >= 1, "Elias gamma is defined for n >= 1");
        let width = 64 - n.leading_zeros(); // ⌊log₂ n⌋ + 1
        for _ in 0..width - 1 {
            self.write_bit(false);
        }
        self.write_bits(n, width);
    }

    /// Bits written so far.
    pub fn bit_len(&self) -> u64 {
        if self.filled == 0 {
            self.bytes.len() as u64 * 8
        } else {
            (self.bytes.len() as u64 - 1) * 8 + self.filled as u64
        }
    }

    /// The zero-padded byte buffer.
    pub fn finish(self) -> Vec<u8> {
        self.bytes
    }
}

/// Bit source over a byte slice, MSB-first.
#[derive(Clone, Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub fn read_bit(&mut self) -> Result<bool, CodecError> {
        let byte = (self.pos / 8) as usize;
        if byte >= self.bytes.len() {
            return Err(CodecError::Truncated);
        }
        let bit = (self.bytes[byte] >> (7 - (self.pos % 8))) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, n: u32) -> Result<u64, CodecError> {
        debug_assert!(n <= 64);
        let mut value = 0u64;
        for _ in 0..n {
            value = (value << 1) | self.read_bit()? as u64;
        }
        Ok(value)
    }

    pub fn read_elias(&mut self) -> Result<u64, CodecError> {
        let mut zeros = 0u32;
        while !self.read_bit()? {
            zeros += 1;
            if zeros > 63 {
                return Err(CodecError::Range("Elias prefix too long".into()));
            }
        }
        let rest = self.read_bits(zeros)?;
        Ok((1u64 << zeros) | rest)
    }
}

/// A canonical prefix code: ranks 0..n get codewords whose lengths are
/// non-decreasing, assigned in increasing lexicographic order.
#[derive(Clone, Debug)]
pub struct CodeTable {
    /// Codeword length per rank (non-decreasing).
    lengths: Vec<u32>,
    /// Number of codewords of each length; index 0 unused.
    counts_per_len: Vec<u64>,
    /// First codeword value of each length.
    first_code: Vec<u64>,
    /// Rank of the first codeword of each length.
    first_rank: Vec<u64>,
}

impl CodeTable {
    /// Builds an optimal (Huffman) code for `counts`, which must be sorted
    /// non-increasing (canonical item order) and strictly positive.
    ///
    /// Ties inside the Huffman heap are resolved by insertion sequence, so
    /// the resulting length multiset is deterministic; lengths are then
    /// assigned to ranks in sorted order, which preserves optimality.
    pub fn from_counts(counts: &[u64]) -> CodeTable {
        assert!(
            counts.windows(2).all(|w| w[0] >= w[1]),
            "counts must be sorted non-increasing"
        );
        assert!(counts.iter().all(|&c| c > 0), "counts must be positive");
        let n = counts.len();
        let mut lengths = vec![0u32; n];
        match n {
            0 => {}
            1 => lengths[0] = 1,
            _ => {
                // Arena of nodes: leaves first, then internal nodes.
                let mut parent: Vec<usize> = vec![usize::MAX; n];
                let mut heap: BinaryHeap<Reverse<(u64, usize)>> = counts
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| Reverse((c, i)))
                    .collect();
                while heap.len() > 1 {
                    let Reverse((w1, n1)) = heap.pop().expect("len > 1");
                    let Reverse((w2, n2)) = heap.pop().expect("len > 1");
                    let id = parent.len();
                    parent.push(usize::MAX);
                    parent[n1] = id;
                    parent[n2] = id;
                    heap.push(Reverse((w1 + w2, id)));
                }
                for (i, length) in lengths.iter_mut().enumerate() {
                    let mut node = i;
                    while parent[node] != usize::MAX {
                        node = parent[node];
                        *length += 1;
                    }
                }
                lengths.sort_unstable();
            }
        }
        CodeTable::from_sorted_lengths(lengths)
    }

    /// Builds the table from per-length codeword counts (the decoder side).
    /// Validates that a canonical prefix code with these counts exists
    /// before materializing anything, so corrupt headers cannot force huge
    /// allocations.
    pub fn from_length_counts(counts_per_len: Vec<u64>) -> Result<CodeTable, CodecError> {
        let max_len = counts_per_len.len().saturating_sub(1);
        if max_len > MAX_CODE_LEN {
            return Err(CodecError::BadCodeSpec(format!(
                "codeword length {max_len} too large"
            )));
        }
        // Canonical feasibility is the Kraft condition applied per length.
        let mut code: u128 = 0;
        let mut total: u64 = 0;
        for len in 1..=max_len {
            code <<= 1;
            let count = counts_per_len[len];
            if code + count as u128 > 1u128 << len {
                return Err(CodecError::BadCodeSpec(format!(
                    "codeword counts violate the Kraft inequality at length {len}"
                )));
            }
            code += count as u128;
            total += count;
            if total > MAX_CODEWORDS {
                return Err(CodecError::BadCodeSpec(format!(
                    "too many codewords ({total})"
                )));
            }
        }
        let mut lengths = Vec::with_capacity(total as usize);
        for (len, &count) in counts_per_len.iter().enumerate().skip(1) {
            for _ in 0..count {
                lengths.push(len as u32);
            }
        }
        Ok(CodeTable::from_sorted_lengths(lengths))
    }

    fn from_sorted_lengths(lengths: Vec<u32>) -> CodeTable {
        debug_assert!(lengths.windows(2).all(|w| w[0] <= w[1]));
        let max_len = lengths.last().copied().unwrap_or(0) as usize;
        let mut counts_per_len = vec![0u64; max_len + 1];
        for &l in &lengths {
            counts_per_len[l as usize] += 1;
        }
        let mut first_code = vec![0u64; max_len + 1];
        let mut first_rank = vec![0u64; max_len + 1];
        let mut code = 0u64;
        let mut rank = 0u64;
        for len in 1..=max_len {
            code <<= 1;
            first_code[len] = code;
            first_rank[len] = rank;
            code += counts_per_len[len];
            rank += counts_per_len[len];
        }
        CodeTable {
            lengths,
            counts_per_len,
            first_code,
            first_rank,
        }
    }

    pub fn n_codewords(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn max_len(&self) -> u32 {
        self.lengths.last().copied().unwrap_or(0)
    }

    pub fn length(&self, rank: u64) -> u32 {
        self.lengths[rank as usize]
    }

    /// Number of codewords of each length, indexed by length (entry 0
    /// unused).
    pub fn counts_per_len(&self) -> &[u64] {
        &self.counts_per_len
    }

    /// The canonical codeword for a rank, as (value, bit length).
    pub fn codeword(&self, rank: u64) -> (u64, u32) {
        let len = self.lengths[rank as usize] as usize;
        let value = self.first_code[len] + (rank - self.first_rank[len]);
        (value, len as u32)
    }

    pub fn write_symbol(&self, writer: &mut BitWriter, rank: u64) {
        let (value, len) = self.codeword(rank);
        writer.write_bits(value, len);
    }

    /// Reads one codeword and returns its rank.
    pub fn read_symbol(&self, reader: &mut BitReader) -> Result<u64, CodecError> {
        let mut code = 0u64;
        for len in 1..self.counts_per_len.len() {
            code = (code << 1) | reader.read_bit()? as u64;
            let count = self.counts_per_len[len];
            if count > 0 && code - self.first_code[len] < count {
                return Ok(self.first_rank[len] + (code - self.first_code[len]));
            }
        }
        Err(CodecError::InvalidCodeword)
    }

    /// Σ counts[rank] · length[rank]: the cost of coding `counts` uses.
    pub fn total_encoded_bits(&self, counts: &[u64]) -> u64 {
        counts
            .iter()
            .zip(&self.lengths)
            .map(|(&c, &l)| c * l as u64)
            .sum()
    }

    /// Σ 2^−length; 1.0 for a complete code.
    pub fn kraft_sum(&self) -> f64 {
        self.lengths.iter().map(|&l| (2.0f64).powi(-(l as i32))).sum()
    }
}

/// The concrete description the encoder writes: retained words in canonical
/// order with integer usage counts, utterance parses, and representations.
#[derive(Clone, Debug)]
pub struct DescriptionPlan {
    /// Retained words, sorted by count descending then surface ascending;
    /// index = codeword rank.
    pub ranked: Vec<WordId>,
    /// Usage count per rank (utterance parses + retained representations).
    pub counts: Vec<u64>,
    /// Viterbi parse of each utterance.
    pub parses: Vec<Vec<WordId>>,
    /// Representation of each retained non-terminal, in rank order.
    pub reps: Vec<(WordId, Vec<WordId>)>,
}

/// Plans the single most-probable description of the corpus: Viterbi parses
/// everywhere, then words with no remaining use pruned to a fixpoint.
pub fn plan_description(lexicon: &Lexicon, corpus: &Corpus) -> Result<DescriptionPlan, CodecError> {
    let parses: Vec<Vec<WordId>> = corpus
        .utterances
        .par_iter()
        .map(|u| {
            viterbi(lexicon, &u.symbols, None)
                .map(|(words, _)| words)
                .expect("terminals make every utterance parseable")
        })
        .collect();

    // Representation of every non-terminal: stored if present, otherwise the
    // bounded Viterbi parse of its surface.
    let mut rep_of: HashMap<WordId, Vec<WordId>> = HashMap::new();
    for word in lexicon.iter() {
        if word.is_terminal {
            continue;
        }
        let rep = match &word.rep {
            Some(rep) => rep.words.clone(),
            None => {
                viterbi(lexicon, &word.surface, Some(Bound::of(word)))
                    .map(|(words, _)| words)
                    .ok_or(CodecError::MissingRepresentation(word.id))?
            }
        };
        rep_of.insert(word.id, rep);
    }

    // Prune words that are used nowhere in the description. Removing a word
    // removes its representation and can orphan its components, so iterate
    // to a fixpoint.
    let limit = lexicon.id_limit() as usize;
    let mut alive = vec![false; limit];
    for word in lexicon.iter() {
        alive[word.id as usize] = true;
    }
    loop {
        let mut counts = vec![0u64; limit];
        for parse in &parses {
            for &w in parse {
                counts[w as usize] += 1;
            }
        }
        for (&w, rep) in &rep_of {
            if alive[w as usize] {
                for &c in rep {
                    counts[c as usize] += 1;
                }
            }
        }
        let mut changed = false;
        for id in 0..limit {
            if alive[id] && counts[id] == 0 {
                alive[id] = false;
                changed = true;
            }
        }
        if !changed {
            let mut ranked: Vec<WordId> = (0..limit as u32).filter(|&id| alive[id as usize]).collect();
            ranked.sort_by(|&a, &b| {
                let (ca, cb) = (counts[a as usize], counts[b as usize]);
                cb.cmp(&ca)
                    .then_with(|| lexicon.word(a).surface.cmp(&lexicon.word(b).surface))
                    .then_with(|| lexicon.word(a).sememes.cmp(&lexicon.word(b).sememes))
            });
            let rank_counts: Vec<u64> = ranked.iter().map(|&id| counts[id as usize]).collect();
            let reps: Vec<(WordId, Vec<WordId>)> = ranked
                .iter()
                .filter(|&&id| !lexicon.word(id).is_terminal)
                .map(|&id| (id, rep_of[&id].clone()))
                .collect();
            return Ok(DescriptionPlan {
                ranked,
                counts: rank_counts,
                parses,
                reps,
            });
        }
    }
}

/// Compresses the corpus under the lexicon into a self-contained stream.
pub fn encode(lexicon: &Lexicon, corpus: &Corpus) -> Result<Vec<u8>, CodecError> {
    let plan = plan_description(lexicon, corpus)?;
    let mut rank_of: HashMap<WordId, u64> = HashMap::with_capacity(plan.ranked.len());
    for (rank, &id) in plan.ranked.iter().enumerate() {
        rank_of.insert(id, rank as u64);
    }
    let word_code = CodeTable::from_counts(&plan.counts);

    // Representation-length code: distinct lengths weighted by how many
    // words use them, in canonical (count desc, value asc) order.
    let mut len_uses: HashMap<u64, u64> = HashMap::new();
    for (_, rep) in &plan.reps {
        *len_uses.entry(rep.len() as u64).or_insert(0) += 1;
    }
    let mut len_values: Vec<(u64, u64)> = len_uses.into_iter().map(|(v, c)| (v, c)).collect();
    len_values.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let len_counts: Vec<u64> = len_values.iter().map(|&(_, c)| c).collect();
    let len_code = CodeTable::from_counts(&len_counts);
    let len_rank: HashMap<u64, u64> = len_values
        .iter()
        .enumerate()
        .map(|(rank, &(value, _))| (value, rank as u64))
        .collect();

    let mut out = BitWriter::new();
    for &b in MAGIC {
        out.write_bits(b as u64, 8);
    }

    // Word-code spec.
    out.write_elias(word_code.max_len() as u64 + 1);
    for len in 1..=word_code.max_len() as usize {
        out.write_elias(word_code.counts_per_len()[len] + 1);
    }

    // Representation-length code spec, with the coded values inline.
    out.write_elias(len_code.max_len() as u64 + 1);
    let mut value_rank = 0usize;
    for len in 1..=len_code.max_len() as usize {
        let count = len_code.counts_per_len()[len];
        out.write_elias(count + 1);
        for _ in 0..count {
            out.write_elias(len_values[value_rank].0);
            value_rank += 1;
        }
    }

    // Terminal bitmap and codewords in ascending byte order.
    let mut terminal_used = [false; ALPHABET_SIZE];
    for &id in &plan.ranked {
        if lexicon.word(id).is_terminal {
            terminal_used[lexicon.word(id).surface[0] as usize] = true;
        }
    }
    for &used in &terminal_used {
        out.write_bit(used);
    }
    for byte in 0..ALPHABET_SIZE {
        if terminal_used[byte] {
            let id = lexicon.terminal(byte as u8);
            word_code.write_symbol(&mut out, rank_of[&id]);
        }
    }

    // Non-terminal representations in rank order.
    for (_, rep) in &plan.reps {
        len_code.write_symbol(&mut out, len_rank[&(rep.len() as u64)]);
        for &component in rep {
            word_code.write_symbol(&mut out, rank_of[&component]);
        }
    }

    // Utterances.
    out.write_elias(plan.parses.len() as u64 + 1);
    for parse in &plan.parses {
        out.write_elias(parse.len() as u64);
        for &w in parse {
            word_code.write_symbol(&mut out, rank_of[&w]);
        }
    }

    Ok(out.finish())
}

/// Decompresses a stream produced by [`encode`].
pub fn decode(bytes: &[u8]) -> Result<Corpus, CodecError> {
    let mut reader = BitReader::new(bytes);
    for &expected in MAGIC {
        if reader.read_bits(8)? != expected as u64 {
            return Err(CodecError::BadMagic);
        }
    }

    // Word-code spec.
    let word_max_len = read_code_len(&mut reader)?;
    let mut counts_per_len = vec![0u64; word_max_len + 1];
    for len in 1..=word_max_len {
        counts_per_len[len] = read_shifted(&mut reader)?;
    }
    let word_code = CodeTable::from_length_counts(counts_per_len)?;
    let n_words = word_code.n_codewords() as u64;

    // Representation-length code spec.
    let len_max_len = read_code_len(&mut reader)?;
    let mut len_counts_per_len = vec![0u64; len_max_len + 1];
    let mut len_values: Vec<u64> = Vec::new();
    for len in 1..=len_max_len {
        let count = read_shifted(&mut reader)?;
        if count > MAX_CODEWORDS {
            return Err(CodecError::BadCodeSpec(format!(
                "too many codewords ({count})"
            )));
        }
        len_counts_per_len[len] = count;
        for _ in 0..count {
            len_values.push(reader.read_elias()?);
        }
    }
    let len_code = CodeTable::from_length_counts(len_counts_per_len)?;
    debug_assert_eq!(len_code.n_codewords(), len_values.len());

    // Terminal section: bitmap, then codewords claim ranks for bytes.
    let mut surfaces: Vec<Option<Vec<u8>>> = vec![None; n_words as usize];
    let mut used_bytes = Vec::new();
    for byte in 0..ALPHABET_SIZE {
        if reader.read_bit()? {
            used_bytes.push(byte as u8);
        }
    }
    if (used_bytes.len() as u64) > n_words {
        return Err(CodecError::BadCodeSpec(
            "more terminals than codewords".into(),
        ));
    }
    for &byte in &used_bytes {
        let rank = word_code.read_symbol(&mut reader)?;
        if surfaces[rank as usize].is_some() {
            return Err(CodecError::BadCodeSpec(
                "two terminals claim one codeword".into(),
            ));
        }
        surfaces[rank as usize] = Some(vec![byte]);
    }

    // Non-terminal representations, in rank order over unclaimed ranks.
    let mut reps: Vec<(u64, Vec<u64>)> = Vec::new();
    for rank in 0..n_words {
        if surfaces[rank as usize].is_some() {
            continue;
        }
        if len_code.is_empty() {
            return Err(CodecError::BadCodeSpec(
                "non-terminal words but empty representation-length code".into(),
            ));
        }
        let len_value = len_values[len_code.read_symbol(&mut reader)? as usize];
        if len_value == 0 || len_value > MAX_REP_LEN {
            return Err(CodecError::Range(format!(
                "representation length {len_value}"
            )));
        }
        let mut components = Vec::new();
        for _ in 0..len_value {
            components.push(word_code.read_symbol(&mut reader)?);
        }
        reps.push((rank, components));
    }

    // Resolve surfaces recursively; the consistency ordering guarantees the
    // expansion is acyclic in a well-formed stream.
    let rep_by_rank: HashMap<u64, Vec<u64>> = reps.iter().cloned().collect();
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Busy,
        Done,
    }
    fn resolve(
        rank: u64,
        rep_by_rank: &HashMap<u64, Vec<u64>>,
        surfaces: &mut Vec<Option<Vec<u8>>>,
        marks: &mut Vec<Mark>,
    ) -> Result<(), CodecError> {
        match marks[rank as usize] {
            Mark::Done => return Ok(()),
            Mark::Busy => return Err(CodecError::CyclicRepresentation),
            Mark::New => {}
        }
        marks[rank as usize] = Mark::Busy;
        if surfaces[rank as usize].is_none() {
            let components = rep_by_rank
                .get(&rank)
                .ok_or(CodecError::InvalidCodeword)?
                .clone();
            let mut surface = Vec::new();
            for c in components {
                resolve(c, rep_by_rank, surfaces, marks)?;
                surface.extend_from_slice(surfaces[c as usize].as_ref().expect("resolved"));
                if surface.len() > MAX_SURFACE_LEN {
                    return Err(CodecError::Range("word surface too long".into()));
                }
            }
            surfaces[rank as usize] = Some(surface);
        }
        marks[rank as usize] = Mark::Done;
        Ok(())
    }
    let mut marks = vec![Mark::New; n_words as usize];
    for rank in 0..n_words {
        resolve(rank, &rep_by_rank, &mut surfaces, &mut marks)?;
    }

    // Utterances.
    let n_utterances = read_shifted(&mut reader)?;
    let mut utterances = Vec::new();
    for _ in 0..n_utterances {
        let n = reader.read_elias()?;
        let mut bytes = Vec::new();
        for _ in 0..n {
            let rank = word_code.read_symbol(&mut reader)?;
            bytes.extend_from_slice(surfaces[rank as usize].as_ref().expect("resolved above"));
        }
        utterances.push(bytes);
    }
    Ok(Corpus::from_utterances(utterances))
}

/// Reads an Elias value that was shifted by one to admit zero.
fn read_shifted(reader: &mut BitReader) -> Result<u64, CodecError> {
    Ok(reader.read_elias()? - 1)
}

/// Reads a maximum codeword length, bounded before any allocation uses it.
fn read_code_len(reader: &mut BitReader) -> Result<usize, CodecError> {
    let len = read_shifted(reader)?;
    if len as usize > MAX_CODE_LEN {
        return Err(CodecError::BadCodeSpec(format!(
            "codeword length {len} too large"
        )));
    }
    Ok(len as usize)
}

/// Order-0 baseline: the cost in bits of coding each byte of the corpus
/// with an optimal prefix code over byte frequencies (no headers). The
/// learned-lexicon stream must beat this to demonstrate that multi-byte
/// structure pays for itself.
pub fn order0_baseline_bits(corpus: &Corpus) -> u64 {
    let mut freq = [0u64; ALPHABET_SIZE];
    for u in &corpus.utterances {
        for &b in &u.symbols {
            freq[b as usize] += 1;
        }
    }
    let mut counts: Vec<u64> = freq.iter().copied().filter(|&c| c > 0).collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    if counts.is_empty() {
        return 0;
    }
    let table = CodeTable::from_counts(&counts);
    table.total_encoded_bits(&counts)
}
