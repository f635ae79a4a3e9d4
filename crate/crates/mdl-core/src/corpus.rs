//! Evidence ingestion: loading and chunking raw byte streams, recording gold
//! segmentations, and parsing meaning-annotated corpora.
//!
//! Two preprocessing regimes are supported, chosen by the caller:
//!
//! - the compression pipeline keeps the text as-is (optionally lowercased and
//!   sentence-split) and only hard-chunks overlong units;
//! - the segmentation pipeline strips separator bytes (everything that is not
//!   a word character) and remembers where the removed boundaries were, as a
//!   gold bracketing to score predictions against.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use crate::lexicon::{SememeSet, SememeTable};

/// A single unit of evidence: a non-empty byte sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Utterance {
    /// Terminal symbols (raw bytes, 0–255).
    pub symbols: Vec<u8>,
    /// Ordinal index within its corpus.
    pub id: usize,
}

/// A list of utterances plus the set of terminal bytes they actually use.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub utterances: Vec<Utterance>,
    /// `alphabet[b]` is true iff byte `b` occurs somewhere in the corpus.
    pub alphabet: [bool; 256],
}

impl Default for Corpus {
    fn default() -> Self {
        Corpus {
            utterances: Vec::new(),
            alphabet: [false; 256],
        }
    }
}

impl Corpus {
    /// Builds a corpus from raw utterance byte strings, dropping empty ones.
    pub fn from_utterances<I, S>(utterances: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<Vec<u8>>,
    {
        let mut corpus = Corpus::default();
        for symbols in utterances {
            let symbols = symbols.into();
            if !symbols.is_empty() {
                corpus.push(symbols);
            }
        }
        corpus
    }

    fn push(&mut self, symbols: Vec<u8>) {
        debug_assert!(!symbols.is_empty());
        for &b in &symbols {
            self.alphabet[b as usize] = true;
        }
        let id = self.utterances.len();
        self.utterances.push(Utterance { symbols, id });
    }

    /// Total number of symbols across all utterances.
    pub fn total_symbols(&self) -> usize {
        self.utterances.iter().map(|u| u.symbols.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }
}

/// Per-utterance gold word spans as 0-based fencepost pairs `(i, j)`:
/// a gold word covers symbols `i..j` of the stripped utterance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GoldBracketing {
    /// `spans[u]` are the gold spans of utterance `u`, sorted by start.
    pub spans: Vec<Vec<(usize, usize)>>,
}

/// Options for [`load_text`].
#[derive(Clone, Debug)]
pub struct TextOptions {
    /// Map ASCII `A`–`Z` to `a`–`z`; leaves every other byte alone.
    pub lowercase: bool,
    /// Split into sentences after `.`, `!`, or `?` (the terminator stays
    /// attached to the preceding sentence).
    pub sentence_split: bool,
    /// Hard upper bound on utterance length; longer units are cut into
    /// consecutive pieces of exactly this size (plus a shorter tail).
    pub chunk_limit: usize,
}

impl Default for TextOptions {
    fn default() -> Self {
        TextOptions {
            lowercase: false,
            sentence_split: false,
            chunk_limit: 1024,
        }
    }
}

/// Errors from corpus loading and parsing.
#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("validation error at line {line}: {message}")]
    Validation { line: usize, message: String },
}

/// Loads a text file as a corpus of byte utterances.
///
/// The whole file is one unit unless `sentence_split` cuts it at sentence
/// terminators; any unit longer than `chunk_limit` is then hard-chunked.
/// An empty file yields an empty corpus.
pub fn load_text(path: &Path, options: &TextOptions) -> Result<Corpus, CorpusError> {
    let bytes = fs::read(path)?;
    Ok(corpus_from_bytes(&bytes, options))
}

/// In-memory equivalent of [`load_text`].
pub fn corpus_from_bytes(bytes: &[u8], options: &TextOptions) -> Corpus {
    assert!(options.chunk_limit >= 1, "chunk_limit must be at least 1");
    let mut text = bytes.to_vec();
    if options.lowercase {
        for b in &mut text {
            if b.is_ascii_uppercase() {
                *b = b.to_ascii_lowercase();
            }
        }
    }

    let mut units: Vec<&[u8]> = Vec::new();
    if options.sentence_split {
        let mut start = 0;
        for (i, &b) in text.iter().enumerate() {
            if matches!(b, b'.' | b'!' | b'?') {
                units.push(&text[start..=i]);
                start = i + 1;
            }
        }
        if start < text.len() {
            units.push(&text[start..]);
        }
    } else if !text.is_empty() {
        units.push(&text);
    }

    let mut corpus = Corpus::default();
    for unit in units {
        for chunk in unit.chunks(options.chunk_limit) {
            if !chunk.is_empty() {
                corpus.push(chunk.to_vec());
            }
        }
    }
    corpus
}

/// Which bytes count as separators when deriving a gold segmentation.
#[derive(Clone)]
pub struct SeparatorSet {
    is_separator: [bool; 256],
}

impl SeparatorSet {
    /// Separators are exactly the given bytes.
    pub fn new(separators: &[u8]) -> Self {
        let mut is_separator = [false; 256];
        for &b in separators {
            is_separator[b as usize] = true;
        }
        SeparatorSet { is_separator }
    }

    /// Keep ASCII alphanumerics and all bytes ≥ 0x80 (multi-byte scripts pass
    /// through untouched); everything else separates words.
    pub fn non_alphanumeric() -> Self {
        let mut is_separator = [false; 256];
        for b in 0u16..=255 {
            let byte = b as u8;
            is_separator[b as usize] = byte < 0x80 && !byte.is_ascii_alphanumeric();
        }
        SeparatorSet { is_separator }
    }

    pub fn contains(&self, byte: u8) -> bool {
        self.is_separator[byte as usize]
    }
}

/// Output of [`strip_segmentation`].
pub struct StripResult {
    /// The corpus with separators removed.
    pub corpus: Corpus,
    /// Gold word spans of each stripped utterance.
    pub gold: GoldBracketing,
    /// Number of utterances dropped because nothing remained after stripping.
    pub dropped: usize,
}

/// Removes separator bytes from every utterance and records the maximal
/// separator-free runs as gold word spans (fencepost indices into the
/// stripped utterance). Utterances left empty are dropped and counted.
pub fn strip_segmentation(corpus: &Corpus, separators: &SeparatorSet) -> StripResult {
    let mut stripped = Corpus::default();
    let mut gold = GoldBracketing::default();
    let mut dropped = 0usize;

    for utterance in &corpus.utterances {
        let mut symbols = Vec::with_capacity(utterance.symbols.len());
        let mut spans = Vec::new();
        let mut run_start: Option<usize> = None;
        for &b in &utterance.symbols {
            if separators.contains(b) {
                if let Some(start) = run_start.take() {
                    spans.push((start, symbols.len()));
                }
            } else {
                if run_start.is_none() {
                    run_start = Some(symbols.len());
                }
                symbols.push(b);
            }
        }
        if let Some(start) = run_start {
            spans.push((start, symbols.len()));
        }

        if symbols.is_empty() {
            dropped += 1;
        } else {
            stripped.push(symbols);
            gold.spans.push(spans);
        }
    }

    if dropped > 0 {
        log::warn!("strip_segmentation dropped {dropped} utterance(s) that became empty");
    }
    StripResult {
        corpus: stripped,
        gold,
        dropped,
    }
}

/// One weighted meaning hypothesis for an utterance.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedMeaning {
    pub sememes: SememeSet,
    /// Hypothesis weight; must be positive, defaults to 1 when unstated.
    pub weight: f64,
}

/// A corpus of utterances paired with weighted meaning hypotheses.
#[derive(Clone, Debug, Default)]
pub struct MeaningCorpus {
    pub corpus: Corpus,
    /// `meanings[u]` are the hypotheses for utterance `u`; never empty.
    pub meanings: Vec<Vec<WeightedMeaning>>,
    /// Interning table mapping sememe tokens to dense ids.
    pub sememes: SememeTable,
}

/// Parses the block format for meaning-annotated corpora:
///
/// ```text
/// U: johnwalked
/// M 0.5: john walk
/// M 0.2: john walk slow
/// ```
///
/// Blocks are separated by blank lines. Each block has one `U:` line (raw
/// utterance bytes) and one or more `M:` lines (whitespace-separated sememe
/// tokens, optional positive weight before the colon, default 1). An `M`
/// line with no tokens is the empty meaning.
pub fn load_meaning_corpus(path: &Path) -> Result<MeaningCorpus, CorpusError> {
    let bytes = fs::read(path)?;
    meaning_corpus_from_bytes(&bytes)
}

/// In-memory equivalent of [`load_meaning_corpus`].
pub fn meaning_corpus_from_bytes(bytes: &[u8]) -> Result<MeaningCorpus, CorpusError> {
    let mut out = MeaningCorpus::default();
    // Current block state: utterance bytes and hypotheses seen so far.
    let mut pending: Option<(usize, Vec<u8>, Vec<WeightedMeaning>)> = None;

    let parse_err = |line: usize, message: &str| CorpusError::Parse {
        line,
        message: message.to_string(),
    };

    let flush = |pending: &mut Option<(usize, Vec<u8>, Vec<WeightedMeaning>)>,
                 out: &mut MeaningCorpus|
     -> Result<(), CorpusError> {
        if let Some((line, symbols, meanings)) = pending.take() {
            if meanings.is_empty() {
                return Err(parse_err(line, "utterance block has no meaning lines"));
            }
            if symbols.is_empty() {
                return Err(parse_err(line, "utterance is empty"));
            }
            out.corpus.push(symbols);
            out.meanings.push(meanings);
        }
        Ok(())
    };

    for (index, raw_line) in bytes.split(|&b| b == b'\n').enumerate() {
        let line_no = index + 1;
        let line = match raw_line.strip_suffix(b"\r") {
            Some(trimmed) => trimmed,
            None => raw_line,
        };
        if line.iter().all(|b| b.is_ascii_whitespace()) {
            flush(&mut pending, &mut out)?;
            continue;
        }
        if let Some(rest) = line.strip_prefix(b"U:") {
            if pending.is_some() {
                return Err(parse_err(line_no, "unexpected second `U:` line in block"));
            }
            let symbols = trim_ascii(rest).to_vec();
            pending = Some((line_no, symbols, Vec::new()));
        } else if let Some(rest) = line.strip_prefix(b"M") {
            let (_, _, meanings) = pending
                .as_mut()
                .ok_or_else(|| parse_err(line_no, "`M` line before any `U:` line"))?;
            let rest = std::str::from_utf8(rest)
                .map_err(|_| parse_err(line_no, "meaning line is not valid UTF-8"))?;
            let (head, tail) = rest
                .split_once(':')
                .ok_or_else(|| parse_err(line_no, "meaning line is missing `:`"))?;
            let head = head.trim();
            let weight = if head.is_empty() {
                1.0
            } else {
                head.parse::<f64>()
                    .map_err(|_| parse_err(line_no, "meaning weight is not a number"))?
            };
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(CorpusError::Validation {
                    line: line_no,
                    message: format!("meaning weight must be positive and finite, got {weight}"),
                });
            }
            let sememes = out.sememes.intern_all(tail.split_whitespace());
            meanings.push(WeightedMeaning { sememes, weight });
        } else {
            return Err(parse_err(
                line_no,
                "expected `U: ...`, `M <weight>: ...`, or a blank line",
            ));
        }
    }
    flush(&mut pending, &mut out)?;
    Ok(out)
}

fn trim_ascii(bytes: &[u8]) -> &[u8] {
    let start = bytes
        .iter()
        .position(|b| !b.is_ascii_whitespace())
        .unwrap_or(bytes.len());
    let end = bytes
        .iter()
        .rposition(|b| !b.is_ascii_whitespace())
        .map_or(start, |i| i + 1);
    &bytes[start..end]
}

/// Groups meaning hypotheses per utterance for diagnostics: returns, per
/// distinct hypothesis count, how many utterances have that many hypotheses.
pub fn hypothesis_histogram(corpus: &MeaningCorpus) -> BTreeMap<usize, usize> {
    let mut histogram = BTreeMap::new();
    for meanings in &corpus.meanings {
        *histogram.entry(meanings.len()).or_insert(0) += 1;
    }
    histogram
}
