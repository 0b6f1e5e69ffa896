//! Command-line front end: decoding, weight tuning, BLEU scoring, alignment
//! export, and fixture generation.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data or format errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use hybridmt::error::Error;
use hybridmt::eval::{accumulate, corpus_bleu, BleuStats};
use hybridmt::fixture::{generate, FixtureConfig};
use hybridmt::loglinear::FeatureWeights;
use hybridmt::mert::{optimize, NBestPool};
use hybridmt::nbest::{format_entry, load_weights_config, save_weights_config, write_nbest_file};
use hybridmt::ngram_lm::{load_arpa, ArpaModel};
use hybridmt::phrase_table::{load_table, match_source, MatchParams, PhraseTable, TranslationOptions};
use hybridmt::scorer::NmtScorer;
use hybridmt::search::{decode, NBestEntry, SearchParams};
use hybridmt::vocab::Vocabulary;
use hybridmt::weights::ModelWeights;

#[derive(Parser)]
#[command(name = "hybridmt", version, about = "Hybrid beam-search decoder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate source sentences, printing the best hypothesis per line.
    Decode(DecodeArgs),
    /// Tune feature weights against references by iterated n-best rescoring.
    Tune(TuneArgs),
    /// Corpus BLEU of a hypothesis file against one or more reference files.
    Bleu(BleuArgs),
    /// Decode one sentence and export its attention matrix as TSV and SVG.
    AlignExport(AlignArgs),
    /// Generate a self-contained toy data set for the other subcommands.
    Fixture(FixtureArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Model weights file.
    #[arg(long)]
    model: PathBuf,
    /// Source vocabulary, one token per line.
    #[arg(long)]
    src_vocab: PathBuf,
    /// Target vocabulary, one token per line.
    #[arg(long)]
    tgt_vocab: PathBuf,
    /// Backoff n-gram language model in ARPA format.
    #[arg(long)]
    lm: PathBuf,
    /// Phrase table (`src ||| tgt ||| p1 p2` per line).
    #[arg(long)]
    phrase_table: Option<PathBuf>,
    /// Feature weight configuration; defaults to built-in weights.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    /// Word beam size N_w.
    #[arg(long, default_value_t = 32)]
    beam_word: usize,
    /// Phrase beam size N_p; 0 disables phrase hypotheses.
    #[arg(long, default_value_t = 96)]
    beam_phrase: usize,
    /// Attention threshold for anchoring phrases.
    #[arg(long, default_value_t = 0.3)]
    tau_focus: f64,
    /// Coverage threshold; pass `inf` to disable the coverage check.
    #[arg(long, default_value = "0.7", value_parser = parse_tau_cov)]
    tau_cov: f64,
    /// Step limit is ceil(factor * source length).
    #[arg(long, default_value_t = 2.0)]
    max_step_factor: f64,
    /// Rank finished hypotheses by score divided by length.
    #[arg(long)]
    length_norm: bool,
    /// Preset: word beam only, NMT feature only, length normalization on.
    #[arg(long)]
    pure_nmt: bool,
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Source sentences, one per line.
    #[arg(long)]
    input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Number of hypotheses to keep per sentence.
    #[arg(long, default_value_t = 1)]
    nbest: usize,
    /// Also write the full n-best list with feature values to this file.
    #[arg(long)]
    nbest_out: Option<PathBuf>,
    /// Worker threads; output order always follows input order.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Source sentences, one per line.
    #[arg(long)]
    input: PathBuf,
    /// Reference translation file; repeat for multiple references.
    #[arg(long = "ref", required = true)]
    refs: Vec<PathBuf>,
    /// Where to write the tuned weights.
    #[arg(long)]
    out: PathBuf,
    /// Outer decode-and-optimize iterations.
    #[arg(long, default_value_t = 5)]
    iterations: usize,
    /// Hypotheses added to the pool per sentence and iteration.
    #[arg(long, default_value_t = 50)]
    nbest: usize,
    /// Random restarts per optimizer run.
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct BleuArgs {
    /// Hypothesis file, one tokenized sentence per line.
    #[arg(long)]
    hyp: PathBuf,
    /// Reference file; repeat for multiple references.
    #[arg(long = "ref", required = true)]
    refs: Vec<PathBuf>,
}

#[derive(Args)]
struct AlignArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Source sentences, one per line.
    #[arg(long)]
    input: PathBuf,
    /// Zero-based line to decode.
    #[arg(long, default_value_t = 0)]
    line: usize,
    /// Writes `<prefix>.tsv` and `<prefix>.svg`.
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Args)]
struct FixtureArgs {
    /// Directory to create or fill.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    sentences: usize,
    #[arg(long, default_value_t = 18)]
    src_words: usize,
    #[arg(long, default_value_t = 22)]
    tgt_words: usize,
    #[arg(long, default_value_t = 30)]
    phrase_entries: usize,
}

fn parse_tau_cov(s: &str) -> Result<f64, String> {
    if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
        return Ok(f64::INFINITY);
    }
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number or `inf`"))?;
    if v <= 0.0 {
        return Err("coverage threshold must be positive".into());
    }
    Ok(v)
}

enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

type CliResult<T> = Result<T, CliError>;

struct LoadedModels {
    scorer: NmtScorer,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    lm: ArpaModel,
    table: Option<PhraseTable>,
    weights: FeatureWeights,
}

fn load_models(args: &ModelArgs, pure_nmt: bool, need_table: bool) -> CliResult<LoadedModels> {
    if need_table && args.phrase_table.is_none() {
        return Err(CliError::Usage(
            "--phrase-table is required when the phrase beam is non-empty \
             (pass --beam-phrase 0 or --pure-nmt to decode without one)"
                .into(),
        ));
    }
    let model = Arc::new(ModelWeights::load(&args.model)?);
    let src_vocab = Vocabulary::load(&args.src_vocab)?;
    let tgt_vocab = Vocabulary::load(&args.tgt_vocab)?;
    if model.src_vocab != src_vocab.len() {
        return Err(CliError::Data(Error::Config(format!(
            "model expects {} source tokens but vocabulary has {}",
            model.src_vocab,
            src_vocab.len()
        ))));
    }
    if model.tgt_vocab != tgt_vocab.len() {
        return Err(CliError::Data(Error::Config(format!(
            "model expects {} target tokens but vocabulary has {}",
            model.tgt_vocab,
            tgt_vocab.len()
        ))));
    }
    let lm = load_arpa(&args.lm)?;
    let table = match &args.phrase_table {
        Some(p) if need_table => Some(load_table(p)?),
        _ => None,
    };
    let weights = if pure_nmt {
        FeatureWeights::nmt_only()
    } else {
        match &args.weights {
            Some(p) => load_weights_config(p)?,
            None => FeatureWeights::default(),
        }
    };
    Ok(LoadedModels {
        scorer: NmtScorer::new(model),
        src_vocab,
        tgt_vocab,
        lm,
        table,
        weights,
    })
}

fn search_params(args: &SearchArgs, nbest: usize, record_attention: bool) -> SearchParams {
    let mut p = SearchParams {
        beam_word: args.beam_word,
        beam_phrase: args.beam_phrase,
        tau_focus: args.tau_focus,
        tau_cov: args.tau_cov,
        max_step_factor: args.max_step_factor,
        length_normalization: args.length_norm,
        nbest_size: nbest.max(1),
        record_attention,
        ..SearchParams::default()
    };
    if args.pure_nmt {
        p.beam_phrase = 0;
        p.length_normalization = true;
    }
    p
}

fn echo_config(params: &SearchParams, weights: &FeatureWeights) {
    eprintln!(
        "config: beam_word={} beam_phrase={} tau_focus={} tau_cov={} \
         max_step_factor={} length_norm={} nbest={}",
        params.beam_word,
        params.beam_phrase,
        params.tau_focus,
        params.tau_cov,
        params.max_step_factor,
        params.length_normalization,
        params.nbest_size
    );
    eprintln!(
        "weights: nmt={} lm={} wp={} pp={} swc={} phr={} iphr={}",
        weights.nmt, weights.lm, weights.wp, weights.pp, weights.swc, weights.phr, weights.iphr
    );
}

fn read_lines(path: &PathBuf) -> CliResult<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_string).collect()
}

/// Decodes every sentence, fanning work out over `threads` workers while
/// keeping results in input order.
fn decode_corpus(
    sentences: &[Vec<String>],
    models: &LoadedModels,
    params: &SearchParams,
    threads: usize,
) -> CliResult<Vec<Vec<NBestEntry>>> {
    let match_params = MatchParams::default();
    let run_one = |sent: &Vec<String>| -> Result<Vec<NBestEntry>, Error> {
        let ids = models
            .src_vocab
            .encode(&sent.iter().map(String::as_str).collect::<Vec<_>>());
        let options = match models.table.as_ref() {
            Some(t) if params.beam_phrase > 0 => match_source(sent, t, &match_params),
            _ => TranslationOptions::empty(),
        };
        decode(
            &ids,
            &models.scorer,
            &options,
            &models.lm,
            &models.weights,
            params,
            &models.tgt_vocab,
        )
    };
    if threads <= 1 {
        let mut out = Vec::with_capacity(sentences.len());
        for s in sentences {
            out.push(run_one(s)?);
        }
        return Ok(out);
    }
    let mut slots: Vec<Option<Result<Vec<NBestEntry>, Error>>> =
        (0..sentences.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    std::thread::scope(|scope| {
        let next = &next;
        let run_one = &run_one;
        let mut handles = Vec::new();
        for _ in 0..threads.min(sentences.len()) {
            handles.push(scope.spawn(move || {
                let mut local = Vec::new();
                loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= sentences.len() {
                        return local;
                    }
                    local.push((i, run_one(&sentences[i])));
                }
            }));
        }
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    let mut out = Vec::with_capacity(sentences.len());
    for slot in slots {
        out.push(slot.expect("missing result")?);
    }
    Ok(out)
}

fn run_decode(args: &DecodeArgs) -> CliResult<()> {
    if args.threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let need_table = !args.search.pure_nmt && args.search.beam_phrase > 0;
    let models = load_models(&args.model, args.search.pure_nmt, need_table)?;
    let params = search_params(&args.search, args.nbest, false);
    echo_config(&params, &models.weights);
    let sentences: Vec<Vec<String>> = read_lines(&args.input)?
        .iter()
        .map(|l| tokenize(l))
        .collect();
    if sentences.iter().any(Vec::is_empty) {
        return Err(CliError::Data(Error::Config(
            "input contains an empty sentence".into(),
        )));
    }
    let results = decode_corpus(&sentences, &models, &params, args.threads)?;
    let mut out = String::new();
    for entries in &results {
        match entries.first() {
            Some(best) => out.push_str(&best.surface().join(" ")),
            None => {}
        }
        out.push('\n');
    }
    match &args.output {
        Some(p) => fs::write(p, &out).map_err(|e| Error::io(p, e))?,
        None => print!("{out}"),
    }
    if let Some(p) = &args.nbest_out {
        let rows: Vec<(usize, Vec<NBestEntry>)> =
            results.into_iter().enumerate().collect();
        write_nbest_file(p, &rows)?;
    }
    Ok(())
}

fn load_refs(paths: &[PathBuf], expected: usize) -> CliResult<Vec<Vec<Vec<String>>>> {
    // per-sentence list of reference token sequences
    let mut per_file = Vec::new();
    for p in paths {
        let lines = read_lines(p)?;
        if lines.len() != expected {
            return Err(CliError::Data(Error::Config(format!(
                "{} has {} lines, expected {}",
                p.display(),
                lines.len(),
                expected
            ))));
        }
        per_file.push(lines);
    }
    Ok((0..expected)
        .map(|i| per_file.iter().map(|f| tokenize(&f[i])).collect())
        .collect())
}

fn run_tune(args: &TuneArgs) -> CliResult<()> {
    if args.threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    if args.iterations == 0 {
        return Err(CliError::Usage("--iterations must be at least 1".into()));
    }
    let need_table = !args.search.pure_nmt && args.search.beam_phrase > 0;
    let mut models = load_models(&args.model, args.search.pure_nmt, need_table)?;
    let params = search_params(&args.search, args.nbest, false);
    echo_config(&params, &models.weights);
    let sentences: Vec<Vec<String>> = read_lines(&args.input)?
        .iter()
        .map(|l| tokenize(l))
        .collect();
    let refs = load_refs(&args.refs, sentences.len())?;

    let mut pool = NBestPool::new(sentences.len());
    for iter in 0..args.iterations {
        let results = decode_corpus(&sentences, &models, &params, args.threads)?;
        for (i, entries) in results.into_iter().enumerate() {
            for e in entries {
                pool.add(i, e.surface(), e.features, &refs[i]);
            }
        }
        let before = pool.selection_bleu(&models.weights);
        let tuned = optimize(&pool, &models.weights, args.restarts, args.seed + iter as u64)?;
        let after = pool.selection_bleu(&tuned);
        eprintln!(
            "iteration {}: pool={} entries, BLEU {:.4} -> {:.4} (oracle {:.4})",
            iter + 1,
            pool.len(),
            100.0 * before,
            100.0 * after,
            100.0 * pool.oracle_bleu()
        );
        let converged = after <= before + 1e-9;
        models.weights = tuned;
        if converged && iter > 0 {
            eprintln!("no further gain on the pool; stopping early");
            break;
        }
    }
    save_weights_config(&models.weights, &args.out)?;
    eprintln!("wrote tuned weights to {}", args.out.display());
    Ok(())
}

fn run_bleu(args: &BleuArgs) -> CliResult<()> {
    let hyp_lines = read_lines(&args.hyp)?;
    let refs = load_refs(&args.refs, hyp_lines.len())?;
    let mut total = BleuStats::default();
    for (line, r) in hyp_lines.iter().zip(&refs) {
        total = total.add(&accumulate(&tokenize(line), r));
    }
    let bleu = corpus_bleu(&total);
    println!("BLEU = {:.2} ({:.6})", 100.0 * bleu, bleu);
    Ok(())
}

fn run_align(args: &AlignArgs) -> CliResult<()> {
    let need_table = !args.search.pure_nmt && args.search.beam_phrase > 0;
    let models = load_models(&args.model, args.search.pure_nmt, need_table)?;
    let params = search_params(&args.search, 1, true);
    echo_config(&params, &models.weights);
    let lines = read_lines(&args.input)?;
    let sent = lines.get(args.line).ok_or_else(|| {
        CliError::Usage(format!(
            "--line {} is out of range; {} has {} lines",
            args.line,
            args.input.display(),
            lines.len()
        ))
    })?;
    let tokens = tokenize(sent);
    if tokens.is_empty() {
        return Err(CliError::Data(Error::Config("selected line is empty".into())));
    }
    let results = decode_corpus(&[tokens.clone()], &models, &params, 1)?;
    let best = results[0]
        .first()
        .ok_or_else(|| Error::Search("decoder produced no hypothesis".into()))?;
    println!("{}", format_entry(args.line, best));
    let tsv = hybridmt::align::export_tsv(best, &tokens)?;
    let svg = hybridmt::align::export_svg(best, &tokens)?;
    let tsv_path = args.out_prefix.with_extension("tsv");
    let svg_path = args.out_prefix.with_extension("svg");
    fs::write(&tsv_path, tsv).map_err(|e| Error::io(&tsv_path, e))?;
    fs::write(&svg_path, svg).map_err(|e| Error::io(&svg_path, e))?;
    eprintln!("wrote {} and {}", tsv_path.display(), svg_path.display());
    Ok(())
}

fn run_fixture(args: &FixtureArgs) -> CliResult<()> {
    let cfg = FixtureConfig {
        seed: args.seed,
        sentences: args.sentences,
        src_words: args.src_words,
        tgt_words: args.tgt_words,
        phrase_entries: args.phrase_entries,
        ..FixtureConfig::default()
    };
    let written = generate(&args.out, &cfg)?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Decode(a) => run_decode(a),
        Command::Tune(a) => run_tune(a),
        Command::Bleu(a) => run_bleu(a),
        Command::AlignExport(a) => run_align(a),
        Command::Fixture(a) => run_fixture(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
