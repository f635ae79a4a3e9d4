//! `mdl`: command-line front end for MDL lexicon induction.
//!
//! Subcommands cover the full pipeline: `learn` induces a lexicon from raw
//! text, `segment` prints hierarchical segmentations, `compress` and
//! `decompress` round-trip files through the dictionary codec, `eval-seg`
//! scores segmentations against whitespace-derived gold words,
//! `cross-entropy` measures held-out coding cost, and `learn-meanings` /
//! `predict-meaning` handle sememe-annotated corpora.
//!
//! Exit codes: 0 success, 1 validation error (bad flags or malformed
//! input), 2 I/O error, 3 internal invariant failure.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mdl_core::corpus::{
    self, load_meaning_corpus, load_text, strip_segmentation, Corpus, CorpusError, SeparatorSet,
    TextOptions,
};
use mdl_core::em;
use mdl_core::eval::{self, BracketSet};
use mdl_core::lexicon::{escape_surface, Bound, Lexicon, LexiconError, WordId};
use mdl_core::meaning::{self, MeaningConfig};
use mdl_core::refine::RefineConfig;
use mdl_core::codec;

// ---------------------------------------------------------------------------
// Argument structure
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "mdl",
    version,
    about = "Learn a hierarchical stochastic lexicon from raw byte streams; \
             segment, compress, and evaluate with it",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads (default: available parallelism; the MDL_WORKERS
    /// environment variable overrides the default, this flag overrides both)
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// More log detail (-v: debug, -vv: trace)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Log warnings and errors only
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a lexicon from raw text by description-length minimization
    Learn(LearnArgs),
    /// Print the hierarchical segmentation of text under a lexicon
    Segment(SegmentArgs),
    /// Compress a file with a learned lexicon (self-contained stream)
    Compress(CompressArgs),
    /// Restore the exact bytes from a compressed stream
    Decompress(DecompressArgs),
    /// Score a lexicon's segmentations against gold words from separators
    EvalSeg(EvalSegArgs),
    /// Held-out coding cost of text under a lexicon, in bits per byte
    CrossEntropy(CrossEntropyArgs),
    /// Learn a lexicon with meanings from a (text, sememe set) corpus
    LearnMeanings(LearnMeaningsArgs),
    /// Predict utterance meanings as unions of word meanings
    PredictMeaning(PredictMeaningArgs),
}

/// Text ingestion options shared by text-reading subcommands.
#[derive(Args, Clone)]
struct TextArgs {
    /// Map ASCII A-Z to a-z before processing
    #[arg(long)]
    lowercase: bool,

    /// Split into sentences after '.', '!', or '?'
    #[arg(long)]
    sentence_split: bool,

    /// Cut any unit longer than this many bytes into consecutive pieces
    #[arg(long, default_value_t = 1024)]
    chunk_limit: usize,
}

impl TextArgs {
    fn options(&self) -> Result<TextOptions, CliError> {
        if self.chunk_limit == 0 {
            return Err(CliError::Validation(
                "--chunk-limit must be at least 1".to_string(),
            ));
        }
        Ok(TextOptions {
            lowercase: self.lowercase,
            sentence_split: self.sentence_split,
            chunk_limit: self.chunk_limit,
        })
    }
}

/// Structure-search options shared by the learners.
#[derive(Args, Clone)]
struct SearchArgs {
    /// At most this many new words per iteration
    #[arg(long, default_value_t = 20_000)]
    max_new: usize,

    /// Also build candidates from adjacent word triples
    #[arg(long)]
    triples: bool,

    /// Probability re-estimation steps before the addition phase
    #[arg(long, default_value_t = 2)]
    em_steps_add: usize,

    /// Probability re-estimation steps before the deletion phase
    #[arg(long, default_value_t = 3)]
    em_steps_delete: usize,

    /// Adjacent pairs must co-occur this often in best parses to be priced
    #[arg(long, default_value_t = 2)]
    min_pair: u32,

    /// Stop early when an iteration changes fewer than this many words
    #[arg(long)]
    early_stop: Option<usize>,
}

impl SearchArgs {
    fn refine_config(&self, iterations: u32) -> RefineConfig {
        RefineConfig {
            iterations,
            max_new: self.max_new,
            enable_triples: self.triples,
            em_steps_add: self.em_steps_add,
            em_steps_delete: self.em_steps_delete,
            pair_prune_min: self.min_pair,
            early_stop_min_changes: self.early_stop,
        }
    }
}

#[derive(Args)]
struct LearnArgs {
    /// Training text file
    #[arg(long)]
    input: PathBuf,

    /// Where to write the learned lexicon
    #[arg(long)]
    out: PathBuf,

    /// Learning iterations
    #[arg(long, default_value_t = 15)]
    iters: u32,

    /// Remove non-alphanumeric bytes before training (segmentation regime)
    #[arg(long)]
    strip: bool,

    #[command(flatten)]
    text: TextArgs,

    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SegmentFormat {
    /// Top-level words separated by spaces
    Words,
    /// Full recursive nesting as square brackets
    Brackets,
}

#[derive(Args)]
struct SegmentArgs {
    /// Lexicon file written by `learn`
    #[arg(long)]
    lexicon: PathBuf,

    /// Text to segment
    #[arg(long)]
    input: PathBuf,

    /// Where to write the segmentation (default: stdout)
    #[arg(long)]
    output: Option<PathBuf>,

    /// Output style
    #[arg(long, value_enum, default_value_t = SegmentFormat::Words)]
    format: SegmentFormat,

    #[command(flatten)]
    text: TextArgs,
}

#[derive(Args)]
struct CompressArgs {
    /// Lexicon file written by `learn`
    #[arg(long)]
    lexicon: PathBuf,

    /// File to compress
    #[arg(long)]
    input: PathBuf,

    /// Where to write the compressed stream
    #[arg(long)]
    output: PathBuf,

    /// Cut the input into units of this many bytes
    #[arg(long, default_value_t = 1024)]
    chunk_limit: usize,
}

#[derive(Args)]
struct DecompressArgs {
    /// Compressed stream written by `compress`
    #[arg(long)]
    input: PathBuf,

    /// Where to write the restored bytes
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalSegArgs {
    /// Lexicon file written by `learn`
    #[arg(long)]
    lexicon: PathBuf,

    /// Text WITH its separators; gold words are the separator-free runs
    #[arg(long)]
    input: PathBuf,

    /// Where to write the report (default: stdout)
    #[arg(long)]
    output: Option<PathBuf>,

    #[command(flatten)]
    text: TextArgs,
}

#[derive(Args)]
struct CrossEntropyArgs {
    /// Lexicon file written by `learn`
    #[arg(long)]
    lexicon: PathBuf,

    /// Held-out text to score
    #[arg(long)]
    input: PathBuf,

    #[command(flatten)]
    text: TextArgs,
}

#[derive(Args)]
struct LearnMeaningsArgs {
    /// Meaning corpus: blocks of `U: <text>` then `M <weight>: <sememes>`
    #[arg(long)]
    input: PathBuf,

    /// Where to write the learned lexicon
    #[arg(long)]
    out: PathBuf,

    /// Bits charged per sememe toggled between composed and observed meaning
    #[arg(long, default_value_t = meaning::DEFAULT_SEMEME_BITS)]
    sememe_bits: f64,

    /// Surface-only iterations before meanings are switched on
    #[arg(long, default_value_t = 10)]
    seed_iters: u32,

    /// Joint sound+meaning iterations
    #[arg(long, default_value_t = 8)]
    meaning_iters: u32,

    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct PredictMeaningInput {
    /// Plain text, one utterance per line
    #[arg(long)]
    input: Option<PathBuf>,

    /// Meaning corpus; predictions are scored against its top hypotheses
    #[arg(long)]
    gold: Option<PathBuf>,
}

#[derive(Args)]
struct PredictMeaningArgs {
    /// Lexicon file written by `learn-meanings`
    #[arg(long)]
    lexicon: PathBuf,

    #[command(flatten)]
    source: PredictMeaningInput,

    /// Where to write predictions (default: stdout)
    #[arg(long)]
    output: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

enum CliError {
    /// Bad flags or malformed input data: exit 1.
    Validation(String),
    /// The file system failed: exit 2.
    Io(String),
    /// An internal invariant failed: exit 3.
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn io(path: &Path, err: std::io::Error) -> CliError {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "{m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

fn corpus_error(path: &Path, err: CorpusError) -> CliError {
    match err {
        CorpusError::Io(e) => CliError::io(path, e),
        other => CliError::Validation(format!("{}: {other}", path.display())),
    }
}

fn lexicon_error(path: &Path, err: LexiconError) -> CliError {
    match err {
        LexiconError::Io(e) => CliError::io(path, e),
        other => CliError::Validation(format!("{}: {other}", path.display())),
    }
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    init_logging(&cli);
    if let Err(err) = init_workers(&cli) {
        eprintln!("error: {err}");
        return ExitCode::from(err.exit_code());
    }

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn init_logging(cli: &Cli) {
    let default = if cli.quiet {
        "warn".to_string()
    } else {
        let ours = match cli.verbose {
            0 => "info",
            1 => "debug",
            _ => "trace",
        };
        format!("warn,mdl_core={ours},mdl_cli={ours},mdl={ours}")
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&default))
        .format_timestamp(None)
        .init();
}

/// Fixes the worker pool before any parallel work: `--workers` wins,
/// otherwise `MDL_WORKERS`, otherwise the machine's available parallelism.
fn init_workers(cli: &Cli) -> Result<(), CliError> {
    let from_env = match std::env::var("MDL_WORKERS") {
        Ok(value) => Some(value.parse::<usize>().map_err(|_| {
            CliError::Validation(format!("MDL_WORKERS must be a positive integer, got {value:?}"))
        })?),
        Err(_) => None,
    };
    let workers = cli.workers.or(from_env);
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Validation(
                "worker count must be at least 1".to_string(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
        log::debug!("using {n} worker thread(s)");
    }
    Ok(())
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Learn(args) => cmd_learn(args),
        Command::Segment(args) => cmd_segment(args),
        Command::Compress(args) => cmd_compress(args),
        Command::Decompress(args) => cmd_decompress(args),
        Command::EvalSeg(args) => cmd_eval_seg(args),
        Command::CrossEntropy(args) => cmd_cross_entropy(args),
        Command::LearnMeanings(args) => cmd_learn_meanings(args),
        Command::PredictMeaning(args) => cmd_predict_meaning(args),
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn read_corpus(path: &Path, text: &TextArgs) -> Result<Corpus, CliError> {
    let options = text.options()?;
    let corpus = load_text(path, &options).map_err(|e| corpus_error(path, e))?;
    log::info!(
        "{}: {} utterances, {} bytes",
        path.display(),
        corpus.utterances.len(),
        corpus.total_symbols()
    );
    Ok(corpus)
}

fn read_lexicon(path: &Path) -> Result<Lexicon, CliError> {
    let lexicon = Lexicon::load(path).map_err(|e| lexicon_error(path, e))?;
    log::info!("{}: {} words", path.display(), lexicon.len());
    Ok(lexicon)
}

fn write_lexicon(lexicon: &Lexicon, path: &Path) -> Result<(), CliError> {
    lexicon.dump(path).map_err(|e| lexicon_error(path, e))?;
    log::info!("wrote {} words to {}", lexicon.len(), path.display());
    Ok(())
}

/// Writes `content` to `path`, or to stdout when no path is given.
fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(path) => fs::write(path, content).map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_learn(args: LearnArgs) -> Result<(), CliError> {
    if args.iters == 0 {
        return Err(CliError::Validation(
            "--iters must be at least 1".to_string(),
        ));
    }
    let mut corpus = read_corpus(&args.input, &args.text)?;
    if args.strip {
        let stripped = strip_segmentation(&corpus, &SeparatorSet::non_alphanumeric());
        log::info!(
            "stripped to {} utterances, {} bytes ({} dropped)",
            stripped.corpus.utterances.len(),
            stripped.corpus.total_symbols(),
            stripped.dropped
        );
        corpus = stripped.corpus;
    }
    if corpus.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: no utterances to learn from",
            args.input.display()
        )));
    }
    let config = args.search.refine_config(args.iters);
    let lexicon = mdl_core::learn(&corpus, &config);
    write_lexicon(&lexicon, &args.out)
}

/// Renders one word as its recursive bracket nesting: terminals appear as
/// their (escaped) byte, every multi-byte word wraps its spell-out in
/// square brackets.
fn render_brackets(lexicon: &Lexicon, id: WordId, out: &mut String) {
    let word = lexicon.word(id);
    if word.is_terminal {
        out.push_str(&escape_surface(&word.surface));
        return;
    }
    out.push('[');
    let children: Vec<WordId> = match &word.rep {
        Some(rep) => rep.words.to_vec(),
        None => em::viterbi(lexicon, &word.surface, Some(Bound::of(word)))
            .map(|(words, _)| words)
            .unwrap_or_default(),
    };
    for child in children {
        render_brackets(lexicon, child, out);
    }
    out.push(']');
}

fn cmd_segment(args: SegmentArgs) -> Result<(), CliError> {
    let lexicon = read_lexicon(&args.lexicon)?;
    let corpus = read_corpus(&args.input, &args.text)?;
    let mut out = String::new();
    for utterance in &corpus.utterances {
        let Some((words, _)) = em::viterbi(&lexicon, &utterance.symbols, None) else {
            return Err(CliError::Internal(format!(
                "utterance {} is unparseable, yet all byte terminals exist",
                utterance.id
            )));
        };
        match args.format {
            SegmentFormat::Words => {
                let rendered: Vec<String> = words
                    .iter()
                    .map(|&w| escape_surface(&lexicon.word(w).surface))
                    .collect();
                out.push_str(&rendered.join(" "));
            }
            SegmentFormat::Brackets => {
                for &w in &words {
                    render_brackets(&lexicon, w, &mut out);
                }
            }
        }
        out.push('\n');
    }
    write_output(args.output.as_deref(), &out)
}

fn cmd_compress(args: CompressArgs) -> Result<(), CliError> {
    if args.chunk_limit == 0 {
        return Err(CliError::Validation(
            "--chunk-limit must be at least 1".to_string(),
        ));
    }
    let lexicon = read_lexicon(&args.lexicon)?;
    let bytes = fs::read(&args.input).map_err(|e| CliError::io(&args.input, e))?;
    // Raw ingestion: no lowercasing or splitting, so that the utterance
    // sequence concatenates back to the input bytes exactly.
    let options = TextOptions {
        lowercase: false,
        sentence_split: false,
        chunk_limit: args.chunk_limit,
    };
    let corpus = corpus::corpus_from_bytes(&bytes, &options);
    let stream = codec::encode(&lexicon, &corpus)
        .map_err(|e| CliError::Internal(format!("encoder: {e}")))?;
    fs::write(&args.output, &stream).map_err(|e| CliError::io(&args.output, e))?;
    let in_len = bytes.len().max(1);
    log::info!(
        "{} bytes -> {} bytes ({:.3} bits/byte)",
        bytes.len(),
        stream.len(),
        8.0 * stream.len() as f64 / in_len as f64
    );
    Ok(())
}

fn cmd_decompress(args: DecompressArgs) -> Result<(), CliError> {
    let stream = fs::read(&args.input).map_err(|e| CliError::io(&args.input, e))?;
    let corpus = codec::decode(&stream).map_err(|e| {
        CliError::Validation(format!("{}: {e}", args.input.display()))
    })?;
    let mut bytes = Vec::with_capacity(corpus.total_symbols());
    for utterance in &corpus.utterances {
        bytes.extend_from_slice(&utterance.symbols);
    }
    fs::write(&args.output, &bytes).map_err(|e| CliError::io(&args.output, e))?;
    log::info!("{} bytes -> {} bytes", stream.len(), bytes.len());
    Ok(())
}

fn percent(rate: Option<f64>) -> String {
    match rate {
        Some(r) => format!("{:.2}%", 100.0 * r),
        None => "n/a".to_string(),
    }
}

fn key_value(rate: Option<f64>) -> String {
    match rate {
        Some(r) => format!("{r:.6}"),
        None => "na".to_string(),
    }
}

fn cmd_eval_seg(args: EvalSegArgs) -> Result<(), CliError> {
    let lexicon = read_lexicon(&args.lexicon)?;
    let corpus = read_corpus(&args.input, &args.text)?;
    let stripped = strip_segmentation(&corpus, &SeparatorSet::non_alphanumeric());
    if stripped.corpus.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: nothing left after removing separators",
            args.input.display()
        )));
    }
    let gold: Vec<BracketSet> = stripped
        .gold
        .spans
        .iter()
        .map(|spans| BracketSet::from_spans(spans.iter().copied()))
        .collect();
    let report = eval::score_segmentation(&lexicon, &stripped.corpus, &gold);

    let mut out = String::new();
    out.push_str(&format!("utterances={}\n", report.utterances));
    out.push_str(&format!("dropped={}\n", stripped.dropped));
    out.push_str(&format!("gold_spans={}\n", report.gold_spans));
    out.push_str(&format!("predicted_spans={}\n", report.predicted_spans));
    out.push_str(&format!("recall={}\n", key_value(report.recall)));
    out.push_str(&format!("accuracy={}\n", key_value(report.accuracy)));
    out.push_str(&format!("crossing={}\n", key_value(report.crossing)));
    out.push('\n');
    out.push_str(&format!("{:<18} {:>12}\n", "metric", "value"));
    out.push_str(&format!("{:<18} {:>12}\n", "------", "-----"));
    out.push_str(&format!("{:<18} {:>12}\n", "recall", percent(report.recall)));
    out.push_str(&format!(
        "{:<18} {:>12}\n",
        "accuracy",
        percent(report.accuracy)
    ));
    out.push_str(&format!(
        "{:<18} {:>12}\n",
        "crossing brackets",
        percent(report.crossing)
    ));
    out.push_str(&format!("{:<18} {:>12}\n", "gold spans", report.gold_spans));
    out.push_str(&format!(
        "{:<18} {:>12}\n",
        "predicted spans", report.predicted_spans
    ));
    out.push_str(&format!("{:<18} {:>12}\n", "utterances", report.utterances));
    write_output(args.output.as_deref(), &out)
}

fn cmd_cross_entropy(args: CrossEntropyArgs) -> Result<(), CliError> {
    let lexicon = read_lexicon(&args.lexicon)?;
    let corpus = read_corpus(&args.input, &args.text)?;
    if corpus.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: no utterances to score",
            args.input.display()
        )));
    }
    let bits = eval::cross_entropy(&lexicon, &corpus);
    let out = format!(
        "symbols={}\nutterances={}\ncross_entropy_bits_per_symbol={:.6}\n",
        corpus.total_symbols(),
        corpus.utterances.len(),
        bits
    );
    write_output(None, &out)
}

fn cmd_learn_meanings(args: LearnMeaningsArgs) -> Result<(), CliError> {
    if !(args.sememe_bits.is_finite() && args.sememe_bits > 0.0) {
        return Err(CliError::Validation(
            "--sememe-bits must be a positive number".to_string(),
        ));
    }
    if args.meaning_iters == 0 {
        return Err(CliError::Validation(
            "--meaning-iters must be at least 1".to_string(),
        ));
    }
    let mcorpus =
        load_meaning_corpus(&args.input).map_err(|e| corpus_error(&args.input, e))?;
    if mcorpus.corpus.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: no utterances to learn from",
            args.input.display()
        )));
    }
    log::info!(
        "{}: {} utterances, {} distinct sememes",
        args.input.display(),
        mcorpus.corpus.utterances.len(),
        mcorpus.sememes.len()
    );
    let config = MeaningConfig {
        sememe_bits: args.sememe_bits,
        seed_iterations: args.seed_iters,
        meaning_iterations: args.meaning_iters,
        refine: args.search.refine_config(args.seed_iters.max(1)),
    };
    let lexicon = meaning::learn_meanings(&mcorpus, &config);
    write_lexicon(&lexicon, &args.out)
}

fn cmd_predict_meaning(args: PredictMeaningArgs) -> Result<(), CliError> {
    let lexicon = read_lexicon(&args.lexicon)?;
    let mut out = String::new();

    if let Some(input) = &args.source.input {
        let bytes = fs::read(input).map_err(|e| CliError::io(input, e))?;
        for line in bytes.split(|&b| b == b'\n') {
            let line = line.strip_suffix(b"\r").unwrap_or(line);
            if line.is_empty() {
                continue;
            }
            let predicted = meaning::predict_meaning(&lexicon, line);
            let names: Vec<&str> = predicted
                .iter()
                .map(|s| lexicon.sememe_names.name(s))
                .collect();
            out.push_str(&format!(
                "{}\t{}\n",
                escape_surface(line),
                names.join(" ")
            ));
        }
    } else {
        let path = args.source.gold.as_ref().expect("clap enforces the group");
        let mcorpus = load_meaning_corpus(path).map_err(|e| corpus_error(path, e))?;
        // The corpus and the lexicon intern sememe names independently, so
        // gold sets must be translated into the lexicon's identifier space
        // by name (unknown names get fresh ids and count as misses).
        let mut names = lexicon.sememe_names.clone();
        let translate: Vec<mdl_core::SememeId> = (0..mcorpus.sememes.len())
            .map(|s| names.intern(mcorpus.sememes.name(s as mdl_core::SememeId)))
            .collect();
        let mut gold = Vec::new();
        let mut predicted = Vec::new();
        for (utterance, hypotheses) in
            mcorpus.corpus.utterances.iter().zip(&mcorpus.meanings)
        {
            // The reference meaning is the highest-weight hypothesis (first
            // on ties).
            let top = hypotheses
                .iter()
                .max_by(|a, b| {
                    a.weight
                        .partial_cmp(&b.weight)
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("loader guarantees at least one hypothesis");
            gold.push(mdl_core::SememeSet::from_ids(
                top.sememes.iter().map(|s| translate[s as usize]),
            ));
            predicted.push(meaning::predict_meaning(&lexicon, &utterance.symbols));
            let names: Vec<&str> = predicted
                .last()
                .unwrap()
                .iter()
                .map(|s| lexicon.sememe_names.name(s))
                .collect();
            out.push_str(&format!(
                "{}\t{}\n",
                escape_surface(&utterance.symbols),
                names.join(" ")
            ));
        }
        let (precision, recall) = meaning::sememe_scores(&gold, &predicted);
        out.push('\n');
        out.push_str(&format!("utterances={}\n", gold.len()));
        out.push_str(&format!("precision={}\n", key_value(precision)));
        out.push_str(&format!("recall={}\n", key_value(recall)));
    }
    write_output(args.output.as_deref(), &out)
}
