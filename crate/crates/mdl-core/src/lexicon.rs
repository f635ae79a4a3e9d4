//! The stochastic lexicon: words with probabilities, expected counts, and
//! optional sememe sets, plus the span indexes used to enumerate which words
//! match where inside an utterance.
//!
//! Every byte value 0–255 is permanently present as a *terminal* word, so any
//! byte string is parseable. Longer words are built during learning; each one
//! must be expressible as a concatenation of strictly smaller words (the
//! *consistency ordering*), which makes the lexicon an acyclic hierarchy: a
//! word's representation can be expanded recursively and is guaranteed to
//! bottom out at terminals.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use smallvec::SmallVec;

/// Stable word identifier. Ids of deleted words are never reused.
pub type WordId = u32;
/// Dense sememe identifier into a [`SememeTable`].
pub type SememeId = u32;

/// Number of terminal words; terminals are the single bytes 0–255.
pub const ALPHABET_SIZE: usize = 256;

/// Probability floor for words whose expected count underflows; such words
/// are kept parseable until a deletion phase removes them.
pub const PROB_FLOOR: f64 = 1e-12;

/// An ordered, duplicate-free set of sememe ids.
///
/// Kept sorted so that set identity, hashing, and merge operations are cheap
/// and deterministic.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SememeSet(SmallVec<[SememeId; 4]>);

impl SememeSet {
    pub fn new() -> Self {
        SememeSet::default()
    }

    pub fn from_ids<I: IntoIterator<Item = SememeId>>(ids: I) -> Self {
        let mut v: SmallVec<[SememeId; 4]> = ids.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        SememeSet(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, s: SememeId) -> bool {
        self.0.binary_search(&s).is_ok()
    }

    pub fn insert(&mut self, s: SememeId) -> bool {
        match self.0.binary_search(&s) {
            Ok(_) => false,
            Err(pos) => {
                self.0.insert(pos, s);
                true
            }
        }
    }

    pub fn remove(&mut self, s: SememeId) -> bool {
        match self.0.binary_search(&s) {
            Ok(pos) => {
                self.0.remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = SememeId> + '_ {
        self.0.iter().copied()
    }

    pub fn union_with(&mut self, other: &SememeSet) {
        for s in other.iter() {
            self.insert(s);
        }
    }

    pub fn union(&self, other: &SememeSet) -> SememeSet {
        let mut out = self.clone();
        out.union_with(other);
        out
    }

    /// Elements in exactly one of the two sets.
    pub fn symmetric_difference(&self, other: &SememeSet) -> SememeSet {
        let mut out = SememeSet::new();
        for s in self.iter() {
            if !other.contains(s) {
                out.insert(s);
            }
        }
        for s in other.iter() {
            if !self.contains(s) {
                out.insert(s);
            }
        }
        out
    }
}

impl FromIterator<SememeId> for SememeSet {
    fn from_iter<I: IntoIterator<Item = SememeId>>(iter: I) -> Self {
        SememeSet::from_ids(iter)
    }
}

/// Interning table mapping sememe tokens (whitespace-free strings) to dense
/// ids in insertion order.
#[derive(Clone, Debug, Default)]
pub struct SememeTable {
    names: Vec<String>,
    ids: HashMap<String, SememeId>,
}

impl SememeTable {
    pub fn new() -> Self {
        SememeTable::default()
    }

    pub fn intern(&mut self, token: &str) -> SememeId {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.names.len() as SememeId;
        self.names.push(token.to_string());
        self.ids.insert(token.to_string(), id);
        id
    }

    pub fn intern_all<'a, I: IntoIterator<Item = &'a str>>(&mut self, tokens: I) -> SememeSet {
        SememeSet::from_ids(tokens.into_iter().map(|t| self.intern(t)))
    }

    pub fn get(&self, token: &str) -> Option<SememeId> {
        self.ids.get(token).copied()
    }

    pub fn name(&self, id: SememeId) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// A parse of a byte string as a sequence of lexicon words, possibly with
/// sememe perturbations relative to the union of the words' meanings.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Representation {
    /// Component words, in surface order.
    pub words: Vec<WordId>,
    /// Sememes present in the represented meaning but not in the union of
    /// component meanings.
    pub added: SememeSet,
    /// Sememes in the union of component meanings but absent from the
    /// represented meaning.
    pub removed: SememeSet,
}

impl Representation {
    pub fn from_words(words: Vec<WordId>) -> Self {
        Representation {
            words,
            added: SememeSet::new(),
            removed: SememeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// One lexicon parameter.
#[derive(Clone, Debug)]
pub struct Word {
    pub id: WordId,
    pub surface: Box<[u8]>,
    pub sememes: SememeSet,
    /// Expected usage count over the combined evidence (corpus plus the
    /// representations of the other words).
    pub count: f64,
    /// Natural log of the word's probability.
    pub ln_prob: f64,
    pub is_terminal: bool,
    /// Most probable representation of `surface` in strictly smaller words;
    /// `None` for terminals and for words not yet parsed.
    pub rep: Option<Representation>,
}

impl Word {
    pub fn prob(&self) -> f64 {
        self.ln_prob.exp()
    }

    /// The word's probability in bits: −log₂ p(w).
    pub fn bits(&self) -> f64 {
        -self.ln_prob / std::f64::consts::LN_2
    }

    pub fn len(&self) -> usize {
        self.surface.len()
    }
}

/// How words are compared for the consistency ordering.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderingMode {
    /// Strictly shorter surface.
    Plain,
    /// Lexicographic on (surface length, sememe-set size).
    Meaning,
}

/// Upper bound for span lookups: only words strictly below the bound in the
/// consistency ordering participate in a parse.
#[derive(Clone, Copy, Debug)]
pub struct Bound {
    pub surface_len: usize,
    pub sememe_count: usize,
}

impl Bound {
    pub fn of(word: &Word) -> Bound {
        Bound {
            surface_len: word.surface.len(),
            sememe_count: word.sememes.len(),
        }
    }
}

/// Byte trie mapping surfaces (or reversed surfaces) to word ids.
#[derive(Clone, Debug, Default)]
struct Trie {
    nodes: Vec<TrieNode>,
}

#[derive(Clone, Debug, Default)]
struct TrieNode {
    /// Sorted by byte for binary search.
    children: Vec<(u8, u32)>,
    words: SmallVec<[WordId; 1]>,
}

impl Trie {
    fn new() -> Self {
        Trie {
            nodes: vec![TrieNode::default()],
        }
    }

    fn insert<I: Iterator<Item = u8>>(&mut self, key: I, id: WordId) {
        let mut node = 0usize;
        for byte in key {
            node = match self.nodes[node].children.binary_search_by_key(&byte, |c| c.0) {
                Ok(pos) => self.nodes[node].children[pos].1 as usize,
                Err(pos) => {
                    let next = self.nodes.len() as u32;
                    self.nodes.push(TrieNode::default());
                    self.nodes[node].children.insert(pos, (byte, next));
                    next as usize
                }
            };
        }
        debug_assert!(!self.nodes[node].words.contains(&id));
        self.nodes[node].words.push(id);
    }

    fn remove<I: Iterator<Item = u8>>(&mut self, key: I, id: WordId) {
        let mut node = 0usize;
        for byte in key {
            match self.nodes[node].children.binary_search_by_key(&byte, |c| c.0) {
                Ok(pos) => node = self.nodes[node].children[pos].1 as usize,
                Err(_) => return,
            }
        }
        self.nodes[node].words.retain(|&mut w| w != id);
    }

    /// Walks the trie along `bytes`, invoking `visit(word_id, depth)` for
    /// every word registered on the path (depth = number of bytes consumed).
    fn walk<I: Iterator<Item = u8>>(&self, bytes: I, mut visit: impl FnMut(WordId, usize)) {
        let mut node = 0usize;
        for (offset, byte) in bytes.enumerate() {
            match self.nodes[node].children.binary_search_by_key(&byte, |c| c.0) {
                Ok(pos) => node = self.nodes[node].children[pos].1 as usize,
                Err(_) => return,
            }
            for &id in &self.nodes[node].words {
                visit(id, offset + 1);
            }
        }
    }
}

/// Errors from lexicon mutation and serialization.
#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("a word with this surface and sememe set already exists")]
    Duplicate,
    #[error("words must have a non-empty surface")]
    EmptySurface,
    #[error("terminals cannot be removed")]
    TerminalRemoval,
    #[error("unknown word id {0}")]
    UnknownWord(WordId),
    #[error("unsupported lexicon file version: {0:?}")]
    Version(String),
    #[error("malformed lexicon file at line {line}: {message}")]
    Format { line: usize, message: String },
}

/// The full parameter set: words, span indexes, and count accumulator.
#[derive(Clone, Debug)]
pub struct Lexicon {
    words: Vec<Option<Word>>,
    /// Word identity is the (surface, sememes) pair.
    identity: HashMap<(Box<[u8]>, SememeSet), WordId>,
    /// Surfaces keyed forward, for "which words start here" queries.
    forward: Trie,
    /// Surfaces keyed reversed, for "which words end here" queries.
    reverse: Trie,
    /// Σ over words of the expected count.
    pub total_count: f64,
    pub ordering: OrderingMode,
    /// Names for sememe ids; empty in the plain model.
    pub sememe_names: SememeTable,
    live_words: usize,
    max_word_len: usize,
}

impl Lexicon {
    /// Creates the initial lexicon: all 256 single-byte terminals, uniform
    /// probability 1/256, zero counts.
    pub fn init_terminals() -> Lexicon {
        let mut lexicon = Lexicon {
            words: Vec::with_capacity(ALPHABET_SIZE),
            identity: HashMap::new(),
            forward: Trie::new(),
            reverse: Trie::new(),
            total_count: 0.0,
            ordering: OrderingMode::Plain,
            sememe_names: SememeTable::new(),
            live_words: 0,
            max_word_len: 1,
        };
        let uniform = -(ALPHABET_SIZE as f64).ln();
        for byte in 0..ALPHABET_SIZE {
            let id = byte as WordId;
            let surface: Box<[u8]> = vec![byte as u8].into_boxed_slice();
            lexicon.identity.insert((surface.clone(), SememeSet::new()), id);
            lexicon.forward.insert(surface.iter().copied(), id);
            lexicon.reverse.insert(surface.iter().copied().rev(), id);
            lexicon.words.push(Some(Word {
                id,
                surface,
                sememes: SememeSet::new(),
                count: 0.0,
                ln_prob: uniform,
                is_terminal: true,
                rep: None,
            }));
            lexicon.live_words += 1;
        }
        lexicon
    }

    /// The terminal word for a byte.
    pub fn terminal(&self, byte: u8) -> WordId {
        byte as WordId
    }

    pub fn word(&self, id: WordId) -> &Word {
        self.words[id as usize]
            .as_ref()
            .expect("word id refers to a deleted word")
    }

    pub fn word_mut(&mut self, id: WordId) -> &mut Word {
        self.words[id as usize]
            .as_mut()
            .expect("word id refers to a deleted word")
    }

    pub fn try_word(&self, id: WordId) -> Option<&Word> {
        self.words.get(id as usize).and_then(|w| w.as_ref())
    }

    /// Iterates over live words in id order.
    pub fn iter(&self) -> impl Iterator<Item = &Word> {
        self.words.iter().filter_map(|w| w.as_ref())
    }

    /// Number of live words, terminals included.
    pub fn len(&self) -> usize {
        self.live_words
    }

    pub fn is_empty(&self) -> bool {
        self.live_words == 0
    }

    /// Number of live non-terminal words.
    pub fn nonterminal_count(&self) -> usize {
        self.live_words - ALPHABET_SIZE
    }

    /// One past the largest id ever assigned (ids below this may be deleted).
    pub fn id_limit(&self) -> WordId {
        self.words.len() as WordId
    }

    pub fn max_word_len(&self) -> usize {
        self.max_word_len
    }

    /// Natural-log probability accessor used by chart inner loops.
    #[inline]
    pub fn ln_prob(&self, id: WordId) -> f64 {
        self.word(id).ln_prob
    }

    /// Looks up a word by its identity pair.
    pub fn find(&self, surface: &[u8], sememes: &SememeSet) -> Option<WordId> {
        // HashMap<(Box<[u8]>, SememeSet), _> cannot be probed with borrowed
        // parts without an owned key; surfaces are short, so just build one.
        self.identity
            .get(&(surface.to_vec().into_boxed_slice(), sememes.clone()))
            .copied()
    }

    /// Inserts a new non-terminal word. The caller supplies the initial
    /// expected count and log probability (structural search estimates both).
    pub fn insert(
        &mut self,
        surface: &[u8],
        sememes: SememeSet,
        count: f64,
        ln_prob: f64,
    ) -> Result<WordId, LexiconError> {
        if surface.is_empty() {
            return Err(LexiconError::EmptySurface);
        }
        let key = (surface.to_vec().into_boxed_slice(), sememes.clone());
        if self.identity.contains_key(&key) {
            return Err(LexiconError::Duplicate);
        }
        let id = self.words.len() as WordId;
        self.identity.insert(key, id);
        self.forward.insert(surface.iter().copied(), id);
        self.reverse.insert(surface.iter().copied().rev(), id);
        self.max_word_len = self.max_word_len.max(surface.len());
        self.words.push(Some(Word {
            id,
            surface: surface.to_vec().into_boxed_slice(),
            sememes,
            count,
            ln_prob,
            is_terminal: false,
            rep: None,
        }));
        self.live_words += 1;
        Ok(id)
    }

    /// Removes a non-terminal word. Its id is retired, never reused.
    pub fn remove(&mut self, id: WordId) -> Result<Word, LexiconError> {
        let word = self
            .words
            .get_mut(id as usize)
            .and_then(Option::take)
            .ok_or(LexiconError::UnknownWord(id))?;
        if word.is_terminal {
            self.words[id as usize] = Some(word);
            return Err(LexiconError::TerminalRemoval);
        }
        self.identity
            .remove(&(word.surface.clone(), word.sememes.clone()));
        self.forward.remove(word.surface.iter().copied(), id);
        self.reverse.remove(word.surface.iter().copied().rev(), id);
        self.live_words -= 1;
        Ok(word)
    }

    /// The consistency ordering: may `a` appear in the representation of `b`?
    pub fn order_lt(&self, a: &Word, b: &Word) -> bool {
        self.admits(a, Bound::of(b))
    }

    /// Is `word` strictly below `bound` in the consistency ordering?
    #[inline]
    pub fn admits(&self, word: &Word, bound: Bound) -> bool {
        match self.ordering {
            OrderingMode::Plain => word.surface.len() < bound.surface_len,
            OrderingMode::Meaning => {
                (word.surface.len(), word.sememes.len())
                    < (bound.surface_len, bound.sememe_count)
            }
        }
    }

    /// Visits every word whose surface starts at position `j` of `u`, as
    /// `visit(word_id, surface_len)`.
    #[inline]
    pub fn prefix_matches(&self, u: &[u8], j: usize, visit: impl FnMut(WordId, usize)) {
        self.forward.walk(u[j..].iter().copied(), visit);
    }

    /// Visits every word whose surface ends at position `i` of `u` (i.e.
    /// equals `u[i-len..i]`), as `visit(word_id, surface_len)`.
    #[inline]
    pub fn suffix_matches(&self, u: &[u8], i: usize, visit: impl FnMut(WordId, usize)) {
        self.reverse.walk(u[..i].iter().rev().copied(), visit);
    }

    /// All words ending at position `i` of `u`, with their start positions.
    /// This is the span set behind the chart recursions; exposed directly for
    /// tests and diagnostics.
    pub fn lookup_spans(&self, u: &[u8], i: usize) -> Vec<(WordId, usize)> {
        assert!(i <= u.len());
        let mut spans = Vec::new();
        self.suffix_matches(u, i, |id, len| spans.push((id, i - len)));
        spans
    }

    /// Renormalizes probabilities to `count / total`, flooring every word at
    /// [`PROB_FLOOR`] and rescaling the rest so the distribution still sums
    /// to 1. Returns the number of floored words.
    pub fn set_probs_from_counts(&mut self) -> usize {
        let total: f64 = self.iter().map(|w| w.count).sum();
        self.total_count = total;
        if total <= 0.0 {
            return 0;
        }
        let mut floored = 0usize;
        let mut floored_mass = 0.0f64;
        let mut kept_mass = 0.0f64;
        for word in self.words.iter().flatten() {
            let p = word.count / total;
            if p < PROB_FLOOR {
                floored += 1;
                floored_mass += PROB_FLOOR;
            } else {
                kept_mass += p;
            }
        }
        // Scale the unfloored mass down so floored words can sit at exactly
        // the floor while the total stays 1.
        let scale = if kept_mass > 0.0 {
            (1.0 - floored_mass) / kept_mass
        } else {
            1.0
        };
        let ln_floor = PROB_FLOOR.ln();
        for word in self.words.iter_mut().flatten() {
            let p = word.count / total;
            word.ln_prob = if p < PROB_FLOOR {
                ln_floor
            } else {
                (p * scale).ln()
            };
        }
        floored
    }

    /// Σ of word probabilities (diagnostic; 1.0 after a maximize step).
    pub fn prob_sum(&self) -> f64 {
        self.iter().map(|w| w.prob()).sum()
    }

    /// Live word ids ranked for reporting: by probability descending, ties by
    /// surface bytes ascending, then by sememe set.
    pub fn ranked_ids(&self) -> Vec<WordId> {
        let mut ids: Vec<WordId> = self.iter().map(|w| w.id).collect();
        ids.sort_by(|&a, &b| {
            let wa = self.word(a);
            let wb = self.word(b);
            wb.ln_prob
                .partial_cmp(&wa.ln_prob)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| wa.surface.cmp(&wb.surface))
                .then_with(|| wa.sememes.cmp(&wb.sememes))
        });
        ids
    }

    /// Writes the lexicon in the `MDLLEX 1` format.
    pub fn dump(&self, path: &Path) -> Result<(), LexiconError> {
        let mut out = io::BufWriter::new(fs::File::create(path)?);
        out.write_all(self.dump_to_string().as_bytes())?;
        out.flush()?;
        Ok(())
    }

    /// The `MDLLEX 1` serialization: a header line, then one tab-separated
    /// record per word: rank, bits (−log₂ p), dl_bits (cost of the word's
    /// representation), expected count, surface, sememes, and the surfaces of
    /// the representation's components. Bytes outside printable ASCII (and
    /// backslash and space, which would collide with the syntax) are escaped
    /// as `\xNN`.
    pub fn dump_to_string(&self) -> String {
        let mut out = String::from("MDLLEX 1\n");
        for (rank, &id) in self.ranked_ids().iter().enumerate() {
            let word = self.word(id);
            let dl_bits = self.rep_bits(word);
            let sememes = word
                .sememes
                .iter()
                .map(|s| self.sememe_names.name(s))
                .collect::<Vec<_>>()
                .join(" ");
            let children = match &word.rep {
                Some(rep) => rep
                    .words
                    .iter()
                    .map(|&c| escape_surface(&self.word(c).surface))
                    .collect::<Vec<_>>()
                    .join(" "),
                None => String::new(),
            };
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                rank + 1,
                word.bits(),
                dl_bits,
                word.count,
                escape_surface(&word.surface),
                sememes,
                children,
            ));
        }
        out
    }

    /// Bits needed to spell out the word's representation: the sum of its
    /// components' codeword costs. Zero for terminals (they are primitive).
    fn rep_bits(&self, word: &Word) -> f64 {
        match &word.rep {
            Some(rep) => rep.words.iter().map(|&c| self.word(c).bits()).sum(),
            None => 0.0,
        }
    }

    /// Reads a lexicon written by [`Lexicon::dump`].
    pub fn load(path: &Path) -> Result<Lexicon, LexiconError> {
        let text = fs::read_to_string(path)?;
        Lexicon::load_from_str(&text)
    }

    pub fn load_from_str(text: &str) -> Result<Lexicon, LexiconError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "MDLLEX 1")) => {}
            Some((_, other)) => return Err(LexiconError::Version(other.to_string())),
            None => return Err(LexiconError::Version(String::new())),
        }

        let mut lexicon = Lexicon::init_terminals();
        // Records also carry representation children (by surface); these are
        // resolved to word ids once every word exists.
        let mut pending_reps: Vec<(WordId, Vec<Vec<u8>>)> = Vec::new();
        let mut any_sememes = false;

        for (index, line) in lines {
            let line_no = index + 1;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 7 {
                return Err(LexiconError::Format {
                    line: line_no,
                    message: format!("expected 7 tab-separated fields, found {}", fields.len()),
                });
            }
            let bad = |message: String| LexiconError::Format {
                line: line_no,
                message,
            };
            let bits: f64 = fields[1]
                .parse()
                .map_err(|_| bad(format!("bad bits field {:?}", fields[1])))?;
            let count: f64 = fields[3]
                .parse()
                .map_err(|_| bad(format!("bad count field {:?}", fields[3])))?;
            let surface = unescape_surface(fields[4])
                .map_err(|message| bad(format!("bad surface field: {message}")))?;
            if surface.is_empty() {
                return Err(bad("empty surface".to_string()));
            }
            let sememes = if fields[5].is_empty() {
                SememeSet::new()
            } else {
                any_sememes = true;
                let table = &mut lexicon.sememe_names;
                table.intern_all(fields[5].split(' ').filter(|t| !t.is_empty()))
            };
            let ln_prob = -bits * std::f64::consts::LN_2;

            let id = if surface.len() == 1 && sememes.is_empty() {
                // Terminal record: update the pre-created terminal in place.
                let id = surface[0] as WordId;
                let word = lexicon.word_mut(id);
                word.count = count;
                word.ln_prob = ln_prob;
                id
            } else {
                lexicon
                    .insert(&surface, sememes, count, ln_prob)
                    .map_err(|e| bad(format!("cannot insert word: {e}")))?
            };

            if !fields[6].is_empty() {
                let mut children = Vec::new();
                for token in fields[6].split(' ').filter(|t| !t.is_empty()) {
                    children.push(
                        unescape_surface(token)
                            .map_err(|message| bad(format!("bad child surface: {message}")))?,
                    );
                }
                pending_reps.push((id, children));
            }
        }

        if any_sememes {
            lexicon.ordering = OrderingMode::Meaning;
        }
        lexicon.total_count = lexicon.iter().map(|w| w.count).sum();

        // Resolve representation children by surface. Where several words
        // share a surface (meaning model), take the most probable one.
        let mut best_by_surface: HashMap<&[u8], WordId> = HashMap::new();
        for word in lexicon.iter() {
            best_by_surface
                .entry(&word.surface)
                .and_modify(|id| {
                    if lexicon.word(*id).ln_prob < word.ln_prob {
                        *id = word.id;
                    }
                })
                .or_insert(word.id);
        }
        let mut resolved: Vec<(WordId, Representation)> = Vec::new();
        for (id, children) in &pending_reps {
            let mut words = Vec::with_capacity(children.len());
            for child in children {
                let child_id = best_by_surface.get(child.as_slice()).ok_or_else(|| {
                    LexiconError::Format {
                        line: 0,
                        message: format!(
                            "representation child {:?} is not a word in the file",
                            escape_surface(child)
                        ),
                    }
                })?;
                words.push(*child_id);
            }
            resolved.push((*id, Representation::from_words(words)));
        }
        for (id, rep) in resolved {
            let added_removed = {
                let word = lexicon.word(id);
                let mut union = SememeSet::new();
                for &c in &rep.words {
                    union.union_with(&lexicon.word(c).sememes.clone());
                }
                (
                    word.sememes.symmetric_difference(&union),
                    union.symmetric_difference(&word.sememes),
                )
            };
            let word = lexicon.word_mut(id);
            word.rep = Some(Representation {
                words: rep.words,
                added: added_removed
                    .0
                    .iter()
                    .filter(|&s| !added_removed.1.contains(s))
                    .collect(),
                removed: added_removed
                    .1
                    .iter()
                    .filter(|&s| !added_removed.0.contains(s))
                    .collect(),
            });
        }
        Ok(lexicon)
    }
}

/// Escapes a surface for the lexicon file: printable ASCII except backslash
/// and space passes through; everything else becomes `\xNN`.
pub fn escape_surface(surface: &[u8]) -> String {
    let mut out = String::with_capacity(surface.len());
    for &b in surface {
        if (32..=126).contains(&b) && b != b'\\' && b != b' ' {
            out.push(b as char);
        } else {
            out.push_str(&format!("\\x{b:02X}"));
        }
    }
    out
}

/// Inverts [`escape_surface`].
pub fn unescape_surface(text: &str) -> Result<Vec<u8>, String> {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\\' {
            if i + 3 >= bytes.len() || bytes[i + 1] != b'x' {
                return Err(format!("truncated escape in {text:?}"));
            }
            let hex = std::str::from_utf8(&bytes[i + 2..i + 4])
                .ok()
                .and_then(|h| u8::from_str_radix(h, 16).ok())
                .ok_or_else(|| format!("bad hex escape in {text:?}"))?;
            out.push(hex);
            i += 4;
        } else if bytes[i].is_ascii() {
            out.push(bytes[i]);
            i += 1;
        } else {
            return Err(format!("non-ascii byte in escaped surface {text:?}"));
        }
    }
    Ok(out)
}

impl fmt::Display for Lexicon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lexicon: {} words ({} non-terminal), total count {:.3}",
            self.len(),
            self.nonterminal_count(),
            self.total_count
        )
    }
}
