//! Induction of a hierarchical stochastic lexicon from raw byte streams.
//!
//! The library learns a dictionary of "words" (byte strings with
//! probabilities, and optionally sememe sets) from unsegmented input by
//! minimizing a two-part description length: the bits needed to write down
//! the lexicon itself plus the bits needed to encode the evidence with it.
//! Because each entry is in turn represented as a concatenation of smaller
//! entries, the lexicon is its own compression model, and a single set of
//! probabilities serves segmentation, compression, and language-model
//! evaluation.
//!
//! Module map:
//! - [`corpus`]: utterance ingestion, gold segmentations, meaning corpora.
//! - [`lexicon`]: words, sememes, span indexes, the consistency ordering.
//! - [`em`]: chart algorithms — forward/backward, expected counts, Viterbi,
//!   description-length accounting.
//! - [`refine`]: structural search — proposing, scoring, adding, and
//!   deleting words; the main learning loop.
//! - [`codec`]: bit-exact dictionary compression built on canonical prefix
//!   codes.
//! - [`eval`]: segmentation scoring (recall, crossing rate) and held-out
//!   cross-entropy.
//! - [`meaning`]: composition of word meanings and sememe-annotated
//!   learning.

pub mod codec;
pub mod corpus;
pub mod em;
pub mod eval;
pub mod lexicon;
pub mod meaning;
pub mod oracle;
pub mod refine;

pub use codec::{decode, encode, CodecError};
pub use corpus::{Corpus, GoldBracketing, MeaningCorpus, Utterance, WeightedMeaning};
pub use em::{Chart, CountTable, DlReport, ParseTask};
pub use eval::BracketSet;
pub use meaning::{
    learn_meanings, predict_meaning, sememe_scores, MeaningChart, MeaningConfig,
    PartitionBlocks, DEFAULT_SEMEME_BITS,
};
pub use refine::{
    learn, learn_traced, Candidate, CandidateKind, DeltaLedger, IterationStats, RefineConfig,
};
pub use lexicon::{
    Lexicon, OrderingMode, Representation, SememeId, SememeSet, SememeTable, Word, WordId,
};
